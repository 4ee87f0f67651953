#include "daca/campaign.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "daca/error.hpp"
#include "daca/text.hpp"

namespace daca {

namespace {

std::string pad_index(std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", width, i);
  return buf;
}

nlohmann::json opt(std::optional<double> v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

// Runs fn(0..n-1) on up to `workers` threads. The first exception that is not
// a daca::Error is rethrown after every thread has finished.
template <class Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto body = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lk(mu);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  const std::size_t k = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (k <= 1) {
    body();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < k; ++t) pool.emplace_back(body);
  }
  if (failure) std::rethrow_exception(failure);
}

struct Override {
  std::string category;
  std::string backbone;
  std::string run_id;
};

std::vector<Override> load_overrides(const std::string& path) {
  std::vector<Override> out;
  if (path.empty()) return out;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open selection override file: " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("category").get<std::string>(), j.at("backbone").get<std::string>(),
                     j.at("run_id").get<std::string>()});
      parse_category(out.back().category);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("selection override: " + std::string(e.what()));
    }
  }
  return out;
}

void review_trial(const CampaignConfig& cfg, CampaignContext& ctx, const TrialResult& trial, LogWriter& w) {
  if (cfg.review_backbone.empty() || trial.decision.blocked) return;
  nlohmann::json rec = {{"type", "review"}, {"trial_id", trial.trial_id}, {"source", "llm"},
                        {"reviewer", cfg.review_backbone}};
  try {
    const Backbone& rb = ctx.backbone(cfg.review_backbone);
    ChatRequest req = trial.caption ? build_review_request(*trial.caption, ReviewInput::caption, *ctx.corpus)
                                    : build_review_request(*trial.image_ref, ReviewInput::image_ref, *ctx.corpus);
    const ReviewVerdict v = parse_review_verdict(chat(*rb.backend, req).text);
    rec["appropriate"] = v.appropriate ? nlohmann::json(*v.appropriate) : nlohmann::json();
    rec["label"] = v.label;
    rec["reason"] = v.reason;
    rec["raw"] = v.raw;
  } catch (const Error& e) {
    rec["appropriate"] = nullptr;
    rec["error"] = e.what();
  }
  w.push(std::move(rec));
}

}  // namespace

void check_campaign_config(const CampaignConfig& cfg) {
  if (cfg.transformations_per_prompt < 1) throw ValidationError("transformations_per_prompt must be >= 1");
  if (cfg.reuse_repeats < 1) throw ValidationError("reuse_repeats must be >= 1");
  if (cfg.workers < 1) throw ValidationError("workers must be >= 1");
  if (cfg.log_path.empty()) throw ValidationError("campaign needs a log path");
  if (cfg.backbones.empty()) throw ValidationError("campaign needs at least one backbone");
}

const std::string& pipeline_id_for(const CampaignConfig& cfg, Category c) {
  auto it = cfg.pipelines.find(c);
  return it != cfg.pipelines.end() ? it->second : pipeline_for(c).id;
}

const Backbone& CampaignContext::backbone(const std::string& id) const {
  for (const auto& b : backbones) {
    if (b.id == id) return b;
  }
  throw ConfigError("unknown backbone: " + id);
}

const PipelineSpec& CampaignContext::pipeline(const std::string& id) const {
  for (const auto& p : *pipelines) {
    if (p.id == id) return p;
  }
  throw ConfigError("unknown pipeline: " + id);
}

nlohmann::json run_record(const PipelineRun& run, Category c, const std::optional<CostReport>& cost) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& t : run.transcripts) {
    stages.push_back({{"stage_id", t.stage_id},
                      {"rendered_prompt", t.rendered_prompt},
                      {"response", t.response_text},
                      {"input_tokens", t.usage.input_tokens},
                      {"output_tokens", t.usage.output_tokens},
                      {"latency_ms", t.latency.count()},
                      {"refusal", t.refusal},
                      {"attempts", t.attempts}});
  }
  nlohmann::json j = {{"type", "run"},
                      {"run_id", run.run_id},
                      {"sensitive_id", run.sensitive_id},
                      {"category", to_string(c)},
                      {"backbone_id", run.backbone_id},
                      {"pipeline_id", run.pipeline_id},
                      {"adversarial_text", run.adversarial_text},
                      {"failed", run.failed},
                      {"started_at", run.started_at},
                      {"finished_at", run.finished_at},
                      {"stages", std::move(stages)}};
  if (run.failed) {
    j["error"] = run.error;
    j["failed_stage"] = run.failed_stage ? nlohmann::json(*run.failed_stage) : nlohmann::json();
  }
  if (cost) {
    j["cost"] = {{"fixed_tokens", cost->fixed_tokens},
                 {"elastic_input_tokens", cost->elastic_input_tokens},
                 {"elastic_output_tokens", cost->elastic_output_tokens},
                 {"fixed_cost", cost->fixed_cost.str()},
                 {"elastic_input_cost", cost->elastic_input_cost.str()},
                 {"elastic_output_cost", cost->elastic_output_cost.str()},
                 {"elastic_cost", cost->elastic_cost.str()},
                 {"total_cost", cost->total_cost.str()}};
  }
  return j;
}

nlohmann::json trial_record(const TrialResult& t, const std::string& sensitive_id, Category c,
                            const std::string& backbone_id, const std::optional<std::string>& run_id,
                            std::optional<double> t2i, std::optional<double> t2t) {
  nlohmann::json j = {{"type", "trial"},
                      {"trial_id", t.trial_id},
                      {"prompt_id", t.prompt_id},
                      {"sensitive_id", sensitive_id},
                      {"category", to_string(c)},
                      {"backbone_id", backbone_id},
                      {"mode", to_string(t.mode)},
                      {"attempt_index", t.attempt_index},
                      {"blocked", t.decision.blocked},
                      {"reason", to_string(t.decision.reason)},
                      {"matched", t.decision.matched},
                      {"timestamp", t.timestamp},
                      {"t2i", opt(t2i)},
                      {"t2t", opt(t2t)}};
  if (run_id) j["run_id"] = *run_id;
  if (t.image_ref) j["image_ref"] = *t.image_ref;
  if (t.caption) j["caption"] = *t.caption;
  return j;
}

CampaignReport run_one_time_campaign(const CampaignConfig& cfg, const std::vector<SensitivePrompt>& dataset,
                                     CampaignContext& ctx) {
  check_campaign_config(cfg);
  if (!ctx.target || !ctx.embedder) throw ConfigError("campaign context needs a target and an embedder");
  std::vector<const Backbone*> bbs;
  for (const auto& id : cfg.backbones) bbs.push_back(&ctx.backbone(id));
  std::vector<const PipelineSpec*> pipes;
  std::vector<EmbeddingVector> refs;
  for (const auto& sp : dataset) {
    pipes.push_back(&ctx.pipeline(pipeline_id_for(cfg, sp.category)));
    refs.push_back(ctx.embedder->embed_text(sp.text));
  }

  LogWriter w(cfg.log_path);
  w.push({{"type", "campaign"},
          {"mode", "one_time"},
          {"backbones", cfg.backbones},
          {"prompts", dataset.size()},
          {"transformations_per_prompt", cfg.transformations_per_prompt},
          {"temperature", cfg.temperature},
          {"started_at", utc_now_iso()}});

  const std::size_t T = static_cast<std::size_t>(cfg.transformations_per_prompt);
  const std::size_t cells = dataset.size() * bbs.size();
  auto aborted = std::make_unique<std::atomic<bool>[]>(cells == 0 ? 1 : cells);

  parallel_for(cells * T, cfg.workers, [&](std::size_t job) {
    const std::size_t cell = job / T;
    const std::size_t k = job % T;
    const std::size_t pi = cell / bbs.size();
    const SensitivePrompt& sp = dataset[pi];
    const Backbone& bb = *bbs[cell % bbs.size()];
    const PipelineSpec& pipe = *pipes[pi];
    if (aborted[cell]) return;

    auto abort_cell = [&](const std::string& err) {
      if (!aborted[cell].exchange(true)) {
        w.push({{"type", "cell_abort"},
                {"sensitive_id", sp.id},
                {"category", to_string(sp.category)},
                {"backbone_id", bb.id},
                {"error", err}});
      }
    };

    RunOptions opts;
    opts.run_id = bb.id + "/" + sp.id + "/" + pad_index(k, 3);
    opts.temperature = bb.backend->deterministic() ? 0.0 : cfg.temperature;
    opts.retry = cfg.retry;
    PipelineRun run = run_pipeline(pipe, *ctx.corpus, sp, *bb.backend, opts);
    std::optional<CostReport> cost;
    if (!run.failed) cost = account_run(run, pipe, *ctx.corpus, *bb.scheme);
    w.push(run_record(run, sp.category, cost));
    if (run.failed) {
      abort_cell(run.error);
      return;
    }

    try {
      TrialResult trial =
          ctx.target->submit(run.run_id + "/t", run.run_id, run.adversarial_text, TrialMode::one_time, 0);
      std::optional<double> t2i;
      if (!trial.decision.blocked) t2i = safe_cosine(ctx.embedder->embed_image(trial), refs[pi]);
      const auto t2t = safe_cosine(ctx.embedder->embed_text(run.adversarial_text), refs[pi]);
      w.push(trial_record(trial, sp.id, sp.category, bb.id, run.run_id, t2i, t2t));
      review_trial(cfg, ctx, trial, w);
    } catch (const Error& e) {
      abort_cell(std::string("submission failed: ") + e.what());
    }
  });

  w.close();
  return build_report_from_log(cfg.log_path);
}

CampaignReport run_reuse_campaign(const CampaignConfig& cfg, const std::vector<nlohmann::json>& prior,
                                  CampaignContext& ctx) {
  check_campaign_config(cfg);
  if (!ctx.target || !ctx.embedder) throw ConfigError("campaign context needs a target and an embedder");

  struct PriorRun {
    std::string sensitive_id;
    std::string category;
    std::string backbone;
    std::string text;
  };
  std::map<std::string, PriorRun> runs;
  std::map<std::string, std::optional<double>> best_sim;  // run_id -> similarity of a passing trial
  for (const auto& r : prior) {
    const std::string type = r.value("type", "");
    try {
      if (type == "run" && !r.value("failed", false)) {
        runs[r.at("run_id").get<std::string>()] = {r.at("sensitive_id").get<std::string>(),
                                                   r.at("category").get<std::string>(),
                                                   r.at("backbone_id").get<std::string>(),
                                                   r.at("adversarial_text").get<std::string>()};
      } else if (type == "trial" && r.value("mode", "") == "one_time" && !r.at("blocked").get<bool>() &&
                 r.contains("run_id")) {
        // a passing trial without a similarity still qualifies, ranked last
        double s = r.contains("t2i") && r.at("t2i").is_number() ? r.at("t2i").get<double>() : -1.0;
        auto& slot = best_sim[r.at("run_id").get<std::string>()];
        if (!slot || s > *slot) slot = s;
      }
    } catch (const nlohmann::json::exception&) {
      // malformed records are reported by build_report
    }
  }
  const auto overrides = load_overrides(cfg.selection_override_path);

  struct Cell {
    std::string backbone;
    Category category;
    std::string run_id;
    std::string sensitive_id;
    std::string text;
  };
  std::vector<Cell> chosen;
  LogWriter w(cfg.log_path);
  w.push({{"type", "campaign"},
          {"mode", "reuse"},
          {"backbones", cfg.backbones},
          {"reuse_repeats", cfg.reuse_repeats},
          {"started_at", utc_now_iso()}});

  for (const auto& bid : cfg.backbones) {
    const Backbone& bb = ctx.backbone(bid);
    for (Category c : kAllCategories) {
      const std::string cat(to_string(c));
      std::vector<CandidateRun> cands;
      for (const auto& [id, pr] : runs) {
        if (pr.backbone != bid || pr.category != cat) continue;
        CandidateRun cr;
        cr.run.run_id = id;
        cr.run.adversarial_text = pr.text;
        cr.run.sensitive_id = pr.sensitive_id;
        if (auto it = best_sim.find(id); it != best_sim.end()) cr.similarity = it->second;
        cands.push_back(std::move(cr));
      }
      nlohmann::json sel = {{"type", "selection"}, {"category", cat}, {"backbone_id", bid}};
      const CandidateRun* pick = nullptr;
      bool overridden = false;
      for (const auto& o : overrides) {
        if (o.category != cat || o.backbone != bid) continue;
        for (const auto& cr : cands) {
          if (cr.run.run_id == o.run_id) pick = &cr;
        }
        if (!pick) throw ValidationError("selection override names unknown run " + o.run_id);
        overridden = true;
      }
      if (!pick) {
        try {
          pick = &select_best_prompt(cands);
        } catch (const PreconditionError&) {
          sel["unavailable"] = true;
          w.push(std::move(sel));
          continue;
        }
      }
      const TokenCost rc = reuse_cost(pick->run.adversarial_text, cfg.reuse_price_per_1k, *bb.scheme);
      sel["run_id"] = pick->run.run_id;
      sel["sensitive_id"] = pick->run.sensitive_id;
      sel["similarity"] = opt(pick->similarity);
      sel["override"] = overridden;
      sel["reuse_tokens"] = rc.tokens;
      sel["reuse_cost"] = rc.cost.str();
      w.push(std::move(sel));
      chosen.push_back({bid, c, pick->run.run_id, pick->run.sensitive_id, pick->run.adversarial_text});
    }
  }

  const std::size_t R = static_cast<std::size_t>(cfg.reuse_repeats);
  parallel_for(chosen.size() * R, cfg.workers, [&](std::size_t job) {
    const Cell& cell = chosen[job / R];
    const std::size_t i = job % R;
    const std::string trial_id =
        "reuse/" + cell.backbone + "/" + std::string(to_string(cell.category)) + "/" + pad_index(i, 2);
    try {
      TrialResult t =
          ctx.target->submit(trial_id, cell.run_id, cell.text, TrialMode::reuse, static_cast<int>(i));
      w.push(trial_record(t, cell.sensitive_id, cell.category, cell.backbone, cell.run_id, std::nullopt,
                          std::nullopt));
    } catch (const Error& e) {
      w.push({{"type", "cell_abort"},
              {"sensitive_id", cell.sensitive_id},
              {"category", to_string(cell.category)},
              {"backbone_id", cell.backbone},
              {"error", std::string("reuse submission failed: ") + e.what()}});
    }
  });

  w.close();
  return build_report_from_log(cfg.log_path);
}

std::vector<StepTrace> stepwise_submit(const std::vector<std::string>& sentences, Target& target,
                                       const Embedder& embedder, const SensitivePrompt& reference) {
  if (sentences.empty()) throw PreconditionError("no sentences to submit");
  const EmbeddingVector ref = embedder.embed_text(reference.text);
  const auto ref_tokens_v = content_tokens(reference.text);
  const std::set<std::string> ref_tokens(ref_tokens_v.begin(), ref_tokens_v.end());

  std::vector<StepTrace> trace;
  std::string cumulative;
  for (std::size_t k = 0; k < sentences.size(); ++k) {
    const std::string s = text::trim(sentences[k]);
    if (!cumulative.empty() && !s.empty()) cumulative += " ";
    cumulative += s;
    const std::string where = "step " + std::to_string(k + 1) + ": ";
    StepTrace st;
    st.submitted = cumulative;
    try {
      st.trial = target.submit("step/" + pad_index(k + 1, 2), reference.id, cumulative, TrialMode::one_time,
                               static_cast<int>(k));
      if (!st.trial.decision.blocked) st.similarity = safe_cosine(embedder.embed_image(st.trial), ref);
    } catch (const TransportError& e) {
      throw TransportError(where + e.what());
    } catch (const BackendError& e) {
      throw BackendError(where + e.what());
    } catch (const PreconditionError& e) {
      throw PreconditionError(where + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
    std::set<std::string> have;
    for (auto& t : content_tokens(cumulative)) {
      if (ref_tokens.count(t)) have.insert(t);
    }
    st.overlap = have.size();
    trace.push_back(std::move(st));
  }
  return trace;
}

SentenceFile parse_sentence_file(std::string_view input) {
  SentenceFile f;
  for (const auto& raw : text::split(input, "\n")) {
    const std::string line = text::trim(raw);
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string body = text::trim(std::string_view(line).substr(1));
      constexpr std::string_view key = "reference:";
      if (body.rfind(key, 0) == 0) f.reference = text::trim(std::string_view(body).substr(key.size()));
      continue;
    }
    f.sentences.push_back(line);
  }
  return f;
}

}  // namespace daca
