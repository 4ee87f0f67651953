#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "daca/campaign.hpp"
#include "daca/error.hpp"
#include "daca/mock_backends.hpp"
#include "daca/result_log.hpp"
#include "oracles.hpp"
#include "synthetic_log.hpp"

using namespace daca;
namespace fs = std::filesystem;

namespace {

std::string fresh_path(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "daca_unit";
  fs::create_directories(dir);
  const auto p = dir / name;
  fs::remove(p);
  return p.string();
}

class Broken final : public LlmBackend {
 public:
  ChatResponse chat(const ChatRequest&) override { throw BackendError("down"); }
  std::string id() const override { return "broken"; }
};

struct Fixture {
  std::unique_ptr<LlmBackend> mock = make_rule_based_backend("mock", builtin_pricing().at("gpt-4.0"));
  SimulatedTarget target{builtin_sim_filter()};
  Embedder embedder;
  CampaignContext ctx;

  Fixture() {
    ctx.backbones.push_back({"mock", mock.get(), &builtin_pricing().at("gpt-4.0")});
    ctx.target = &target;
    ctx.embedder = &embedder;
  }

  CampaignConfig config(const std::string& log, int workers) const {
    CampaignConfig cfg;
    cfg.backbones = {"mock"};
    cfg.log_path = log;
    cfg.workers = workers;
    return cfg;
  }
};

std::string without_volatile(CampaignReport r) {
  r.warnings.clear();
  return render_jsonl(r);
}

}  // namespace

TEST_CASE("campaign config checks") {
  CampaignConfig cfg;
  cfg.log_path = "x";
  cfg.backbones = {"mock"};
  CHECK_NOTHROW(check_campaign_config(cfg));
  cfg.transformations_per_prompt = 0;
  CHECK_THROWS_AS(check_campaign_config(cfg), ValidationError);
  cfg.transformations_per_prompt = 1;
  cfg.workers = 0;
  CHECK_THROWS_AS(check_campaign_config(cfg), ValidationError);
  cfg.workers = 1;
  cfg.log_path.clear();
  CHECK_THROWS_AS(check_campaign_config(cfg), ValidationError);
  CHECK(pipeline_id_for(CampaignConfig{}, Category::character_copyright) == "all_in_one.character");
}

TEST_CASE("one-time campaign with eight workers") {
  Fixture f;
  const auto log = fresh_path("eight.jsonl");
  const auto report = run_one_time_campaign(f.config(log, 8), builtin_dataset(), f.ctx);
  CHECK(report.total_runs == 80);
  CHECK(report.total_trials == 80);
  const auto loaded = load_log(log);
  CHECK(loaded.warnings.empty());
  std::set<std::string> run_ids, trial_ids;
  for (const auto& r : loaded.records) {
    CHECK(r.at("v") == kLogSchemaVersion);
    if (r.at("type") == "run") CHECK(run_ids.insert(r.at("run_id").get<std::string>()).second);
    if (r.at("type") == "trial") CHECK(trial_ids.insert(r.at("trial_id").get<std::string>()).second);
  }
  CHECK(run_ids.size() == 80);
  CHECK(trial_ids.size() == 80);

  // a deterministic backend replays to the same report with any worker count
  const auto log1 = fresh_path("one.jsonl");
  const auto again = run_one_time_campaign(f.config(log1, 1), builtin_dataset(), f.ctx);
  CHECK(without_volatile(again) == without_volatile(report));

  // the reuse pass picks one run per cell and submits it ten times
  const auto reuse_log = fresh_path("reuse.jsonl");
  const auto reuse = run_reuse_campaign(f.config(reuse_log, 4), loaded.records, f.ctx);
  const auto merged = load_log(reuse_log);
  std::int64_t reuse_trials = 0, selections = 0;
  for (const auto& r : merged.records) {
    if (r.at("type") == "trial" && r.at("mode") == "reuse") ++reuse_trials;
    if (r.at("type") == "selection") ++selections;
  }
  CHECK(selections == 4);
  CHECK(reuse_trials == 40);
  CHECK(reuse.total_trials == 40);
}

TEST_CASE("failing backbone aborts its cells") {
  Fixture f;
  Broken broken;
  f.ctx.backbones.push_back({"broken", &broken, &builtin_pricing().at("gpt-4.0")});
  auto cfg = f.config(fresh_path("broken.jsonl"), 4);
  cfg.backbones = {"broken"};
  cfg.transformations_per_prompt = 3;
  cfg.retry.max_attempts = 1;
  const auto r = run_one_time_campaign(cfg, builtin_dataset(), f.ctx);
  CHECK(r.total_trials == 0);
  std::int64_t aborted = 0;
  for (const auto& c : r.cells) aborted += c.aborted_prompts;
  CHECK(aborted == 8);
}

TEST_CASE("empty dataset yields an empty report") {
  Fixture f;
  const auto r = run_one_time_campaign(f.config(fresh_path("empty.jsonl"), 2), {}, f.ctx);
  CHECK(r.total_runs == 0);
  CHECK(r.total_trials == 0);
  CHECK_FALSE(r.overall_one_time);
}

TEST_CASE("log tolerates a truncated tail") {
  const auto log = fresh_path("tail.jsonl");
  append_result({{"type", "campaign"}}, log);
  append_result(oracle::synthetic_trial("t1", "mock", Category::discriminatory, "one_time", false), log);
  { std::ofstream(log, std::ios::app) << "{\"type\":\"tri"; }
  const auto loaded = load_log(log);
  CHECK(loaded.records.size() == 2);
  CHECK(loaded.warnings.size() == 1);
  CHECK(build_report_from_log(log).total_trials == 1);
  CHECK(load_log(fresh_path("missing.jsonl")).records.empty());
}

TEST_CASE("log writer drains on close") {
  const auto log = fresh_path("writer.jsonl");
  {
    LogWriter w(log);
    for (int i = 0; i < 500; ++i) w.push({{"type", "note"}, {"i", i}});
    w.flush();
    CHECK(load_log(log).records.size() == 500);
    w.push({{"type", "note"}});
  }
  CHECK(load_log(log).records.size() == 501);
}

TEST_CASE("stepwise submission") {
  const auto f = parse_sentence_file("# reference: a red ball on grass\nA red ball.\n# skip\n\nOn green grass.\n");
  REQUIRE(f.reference);
  CHECK(*f.reference == "a red ball on grass");
  REQUIRE(f.sentences.size() == 2);
  SimulatedTarget t(builtin_sim_filter());
  Embedder e;
  SensitivePrompt ref;
  ref.id = "ref";
  ref.text = *f.reference;
  const auto steps = stepwise_submit(f.sentences, t, e, ref);
  REQUIRE(steps.size() == 2);
  CHECK(steps[1].submitted == "A red ball. On green grass.");
  CHECK(steps[1].overlap >= steps[0].overlap);
  REQUIRE(steps[1].similarity);
  CHECK(*steps[1].similarity > 0.5);
}
