#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "daca/config.hpp"
#include "daca/error.hpp"

using namespace daca;

TEST_CASE("default config") {
  const auto c = default_config();
  CHECK_FALSE(c.live_targets_enabled);
  CHECK_FALSE(c.live_target);
  for (const char* id : {"mock", "mock-echo", "mock-mickey", "gpt-4.0", "gpt-3.5-turbo", "spark-v3.0", "chatglm-turbo",
                         "qwen-14b", "qwen-max"})
    CHECK_NOTHROW(c.backend(id));
  CHECK(c.backend("qwen-max").kind == "dashscope");
  CHECK_THROWS_AS(c.backend("nobody"), ConfigError);
}

TEST_CASE("parse a full config") {
  const auto c = parse_config(R"(
backends:
  - id: local
    kind: openai
    endpoint: http://127.0.0.1:1/v1/chat/completions
    model: tiny
    auth_env: LOCAL_KEY
    pricing: qwen-14b
    timeout_ms: 500
pricing:
  reuse_price_per_1k: "0.05"
targets:
  live:
    endpoint: http://127.0.0.1:1/images
live_targets:
  enabled: true
campaign:
  backbones: [mock, local]
  transformations_per_prompt: 2
  reuse_repeats: 3
  workers: 6
  log: out/results.jsonl
  temperature: 0.5
  pipelines:
    inappropriate: stepwise.harmful
  retry:
    max_attempts: 5
    initial_backoff_ms: 10
)",
                              "/tmp/cfg");
  CHECK(c.backend("local").model_name == "tiny");
  CHECK(c.backend("local").request_timeout == std::chrono::milliseconds(500));
  CHECK(c.campaign.reuse_price_per_1k == Money::parse("0.05"));
  REQUIRE(c.live_target);
  CHECK(c.live_target->model == "dall-e-3");
  CHECK(c.live_targets_enabled);
  CHECK(c.campaign.backbones == std::vector<std::string>{"mock", "local"});
  CHECK(c.campaign.workers == 6);
  CHECK(c.campaign.log_path == "/tmp/cfg/out/results.jsonl");
  CHECK(c.campaign.temperature == doctest::Approx(0.5));
  CHECK(c.campaign.pipelines.at(Category::inappropriate) == "stepwise.harmful");
  CHECK(c.campaign.retry.max_attempts == 5);
  CHECK(c.campaign.retry.initial_backoff == std::chrono::milliseconds(10));
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_config("backends: 3"), ValidationError);
  CHECK_THROWS_AS(parse_config("backends:\n  - kind: openai\n"), ValidationError);
  CHECK_THROWS_AS(parse_config("backends:\n  - id: x\n    kind: telepathy\n"), ValidationError);
  CHECK_THROWS_AS(parse_config("backends:\n  - id: x\n    kind: openai\n"), ValidationError);
  CHECK_THROWS_AS(parse_config("backends:\n  - id: x\n    kind: mock_rules\n    pricing: nope\n"), ValidationError);
  CHECK_THROWS_AS(parse_config("campaign:\n  backbones: [ghost]\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("campaign:\n  max_concurrent_requests: 0\n"), ValidationError);
  CHECK_THROWS_AS(parse_config("targets:\n  live:\n    model: x\n"), ValidationError);
  CHECK_THROWS_AS(parse_config("- just\n- a list\n"), ValidationError);
  CHECK_THROWS_AS(parse_config("campaign: {workers: lots}"), ValidationError);
  CHECK_THROWS_AS(load_config("/nonexistent/daca.yaml"), ConfigError);
}

TEST_CASE("runtime stays offline unless every switch is on") {
  ::unsetenv("DACA_LIVE_ACK");
  auto cfg = parse_config(
      "targets:\n  live:\n    endpoint: http://127.0.0.1:1/images\nlive_targets:\n  enabled: true\n");
  auto rt = make_runtime(cfg, {"mock"}, true);
  CHECK_FALSE(rt->target->live());
  CHECK_FALSE(rt->embedder->live());
  CHECK_FALSE(rt->note.empty());
  REQUIRE(rt->ctx.backbones.size() == 1);
  CHECK(rt->ctx.backbones[0].id == "mock");

  ::setenv("DACA_LIVE_ACK", "yes", 1);
  CHECK(make_runtime(cfg, {}, true)->target->live());
  CHECK_FALSE(make_runtime(cfg, {}, false)->target->live());
  ::unsetenv("DACA_LIVE_ACK");
}

TEST_CASE("example config loads") {
  const auto path = std::filesystem::path(DACA_SOURCE_DIR) / "config.example.yaml";
  const auto c = load_config(path.string());
  CHECK(c.campaign.backbones == std::vector<std::string>{"mock"});
  CHECK_FALSE(c.live_targets_enabled);
}
