#include "daca/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "daca/error.hpp"

namespace daca {

namespace {

std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty() || p.rfind("builtin:", 0) == 0) return p;
  std::filesystem::path path(p);
  if (path.is_absolute()) return p;
  return (std::filesystem::path(base) / path).lexically_normal().string();
}

template <class T>
T get(const YAML::Node& n, const char* key, T fallback) {
  if (!n || !n[key]) return fallback;
  try {
    return n[key].as<T>();
  } catch (const YAML::Exception& e) {
    throw ValidationError(std::string("config key '") + key + "': " + e.what());
  }
}

BackendProfile parse_profile(const YAML::Node& n, const std::string& base) {
  BackendProfile p;
  p.id = get<std::string>(n, "id", "");
  if (p.id.empty()) throw ValidationError("backend entry without id");
  p.kind = get<std::string>(n, "kind", "openai");
  p.endpoint = get<std::string>(n, "endpoint", "");
  p.model_name = get<std::string>(n, "model", "");
  p.auth_env_var = get<std::string>(n, "auth_env", "");
  p.pricing_id = get<std::string>(n, "pricing", p.id);
  p.request_timeout = std::chrono::milliseconds(get<long>(n, "timeout_ms", 60000));
  p.fixtures = resolve(base, get<std::string>(n, "fixtures", ""));
  p.fallback = get<std::string>(n, "fallback", "error");
  static const char* kinds[] = {"openai", "dashscope", "mock_rules", "mock_scripted", "mock_echo"};
  if (std::find(std::begin(kinds), std::end(kinds), p.kind) == std::end(kinds))
    throw ValidationError("backend " + p.id + ": unknown kind " + p.kind);
  if (p.fallback != "error" && p.fallback != "echo")
    throw ValidationError("backend " + p.id + ": fallback must be error or echo");
  if (!p.is_mock() && p.endpoint.empty()) throw ValidationError("backend " + p.id + " needs an endpoint");
  return p;
}

}  // namespace

const BackendProfile& AppConfig::backend(std::string_view id) const {
  for (const auto& b : backends) {
    if (b.id == id) return b;
  }
  throw ConfigError("unknown backbone profile: " + std::string(id));
}

std::vector<BackendProfile> default_backend_profiles() {
  auto live = [](std::string id, std::string kind, std::string endpoint, std::string model, std::string env) {
    BackendProfile p;
    p.id = id;
    p.kind = std::move(kind);
    p.endpoint = std::move(endpoint);
    p.model_name = std::move(model);
    p.auth_env_var = std::move(env);
    p.pricing_id = std::move(id);
    return p;
  };
  auto mock = [](std::string id, std::string kind, std::string fixtures = {}) {
    BackendProfile p;
    p.id = std::move(id);
    p.kind = std::move(kind);
    p.pricing_id = "gpt-4.0";
    p.fixtures = std::move(fixtures);
    return p;
  };
  return {
      mock("mock", "mock_rules"),
      mock("mock-echo", "mock_echo"),
      mock("mock-mickey", "mock_scripted", "builtin:mickey"),
      live("gpt-4.0", "openai", "https://api.openai.com/v1/chat/completions", "gpt-4", "OPENAI_API_KEY"),
      live("gpt-3.5-turbo", "openai", "https://api.openai.com/v1/chat/completions", "gpt-3.5-turbo",
           "OPENAI_API_KEY"),
      live("spark-v3.0", "openai", "https://spark-api-open.xf-yun.com/v1/chat/completions", "generalv3",
           "SPARK_API_KEY"),
      live("chatglm-turbo", "openai", "https://open.bigmodel.cn/api/paas/v4/chat/completions", "chatglm_turbo",
           "ZHIPU_API_KEY"),
      live("qwen-14b", "dashscope",
           "https://dashscope.aliyuncs.com/api/v1/services/aigc/text-generation/generation", "qwen-14b-chat",
           "DASHSCOPE_API_KEY"),
      live("qwen-max", "dashscope",
           "https://dashscope.aliyuncs.com/api/v1/services/aigc/text-generation/generation", "qwen-max",
           "DASHSCOPE_API_KEY"),
  };
}

AppConfig default_config() {
  AppConfig c;
  c.backends = default_backend_profiles();
  c.pricing = builtin_pricing();
  c.sim_filter = builtin_sim_filter();
  return c;
}

AppConfig parse_config(std::string_view yaml, const std::string& base) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml));
  } catch (const YAML::Exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  AppConfig c = default_config();
  if (!root || root.IsNull()) return c;
  if (!root.IsMap()) throw ValidationError("config: top level must be a mapping");

  if (auto p = root["pricing"]) {
    if (p["file"]) c.pricing = load_pricing(resolve(base, p["file"].as<std::string>()));
    if (p["reuse_price_per_1k"]) c.campaign.reuse_price_per_1k = Money::parse(p["reuse_price_per_1k"].as<std::string>());
  }

  if (auto b = root["backends"]) {
    if (!b.IsSequence()) throw ValidationError("config: backends must be a list");
    for (const auto& n : b) {
      BackendProfile prof = parse_profile(n, base);
      auto it = std::find_if(c.backends.begin(), c.backends.end(),
                             [&](const BackendProfile& x) { return x.id == prof.id; });
      if (it != c.backends.end()) *it = prof;
      else c.backends.push_back(prof);
    }
  }
  for (const auto& b : c.backends) {
    if (!c.pricing.find(b.pricing_id))
      throw ValidationError("backend " + b.id + ": pricing id " + b.pricing_id + " not in the pricing table");
  }

  if (auto t = root["targets"]) {
    if (t["sim_filter"]) c.sim_filter = load_sim_filter(resolve(base, t["sim_filter"].as<std::string>()));
    if (auto l = t["live"]) {
      LiveTargetConfig lt;
      lt.endpoint = get<std::string>(l, "endpoint", "");
      lt.model = get<std::string>(l, "model", lt.model);
      lt.auth_env_var = get<std::string>(l, "auth_env", "");
      lt.size = get<std::string>(l, "size", lt.size);
      lt.timeout = std::chrono::milliseconds(get<long>(l, "timeout_ms", 120000));
      if (lt.endpoint.empty()) throw ValidationError("targets.live needs an endpoint");
      c.live_target = lt;
    }
    if (auto e = t["embedding"]) {
      EmbeddingEndpoint ep;
      ep.endpoint = get<std::string>(e, "endpoint", "");
      ep.auth_env_var = get<std::string>(e, "auth_env", "");
      ep.dims = get<std::size_t>(e, "dims", kEmbedDim);
      ep.timeout = std::chrono::milliseconds(get<long>(e, "timeout_ms", 30000));
      if (ep.endpoint.empty()) throw ValidationError("targets.embedding needs an endpoint");
      c.embedding = ep;
    }
  }

  if (auto l = root["live_targets"]) c.live_targets_enabled = get<bool>(l, "enabled", false);

  if (auto k = root["campaign"]) {
    auto& cc = c.campaign;
    cc.dataset_path = resolve(base, get<std::string>(k, "dataset", ""));
    if (k["backbones"]) cc.backbones = k["backbones"].as<std::vector<std::string>>();
    cc.transformations_per_prompt = get<int>(k, "transformations_per_prompt", cc.transformations_per_prompt);
    cc.reuse_repeats = get<int>(k, "reuse_repeats", cc.reuse_repeats);
    cc.workers = get<int>(k, "workers", cc.workers);
    cc.log_path = resolve(base, get<std::string>(k, "log", ""));
    cc.temperature = get<double>(k, "temperature", cc.temperature);
    cc.review_backbone = get<std::string>(k, "review_backbone", "");
    cc.selection_override_path = resolve(base, get<std::string>(k, "selection_override", ""));
    c.max_concurrent_requests = get<int>(k, "max_concurrent_requests", c.max_concurrent_requests);
    if (auto p = k["pipelines"]) {
      for (const auto& kv : p) cc.pipelines[parse_category(kv.first.as<std::string>())] = kv.second.as<std::string>();
    }
    if (auto r = k["retry"]) {
      cc.retry.max_attempts = get<int>(r, "max_attempts", cc.retry.max_attempts);
      cc.retry.initial_backoff = std::chrono::milliseconds(get<long>(r, "initial_backoff_ms", 1000));
    }
    for (const auto& id : cc.backbones) c.backend(id);
    if (!cc.review_backbone.empty()) c.backend(cc.review_backbone);
  }
  if (c.max_concurrent_requests < 1) throw ValidationError("max_concurrent_requests must be >= 1");
  return c;
}

AppConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  auto dir = std::filesystem::path(path).parent_path().string();
  return parse_config(ss.str(), dir.empty() ? "." : dir);
}

std::unique_ptr<Runtime> make_runtime(AppConfig cfg, const std::vector<std::string>& backbone_ids, bool live_flag) {
  auto rt = std::make_unique<Runtime>();
  rt->config = std::move(cfg);
  RequestLimiter::global().set_limit(rt->config.max_concurrent_requests);
  for (const auto& id : backbone_ids) {
    if (std::any_of(rt->ctx.backbones.begin(), rt->ctx.backbones.end(), [&](const Backbone& b) { return b.id == id; }))
      continue;
    const BackendProfile& prof = rt->config.backend(id);
    rt->owned.push_back(make_backend(prof, rt->config.pricing));
    rt->ctx.backbones.push_back({id, rt->owned.back().get(), &rt->config.pricing.at(prof.pricing_id)});
  }
  const LiveSwitches sw{rt->config.live_targets_enabled, live_flag, LiveSwitches::env_acknowledged()};
  rt->target = make_target(rt->config.sim_filter, rt->config.live_target, sw, &rt->note);
  if (rt->config.embedding && sw.all()) rt->embedder = std::make_unique<Embedder>(*rt->config.embedding);
  else rt->embedder = std::make_unique<Embedder>();
  rt->ctx.target = rt->target.get();
  rt->ctx.embedder = rt->embedder.get();
  return rt;
}

}  // namespace daca
