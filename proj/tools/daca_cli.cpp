#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "daca/accounting.hpp"
#include "daca/campaign.hpp"
#include "daca/config.hpp"
#include "daca/error.hpp"
#include "daca/mock_backends.hpp"
#include "daca/report.hpp"
#include "daca/text.hpp"

using namespace daca;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

AppConfig config_or_default(const std::string& path) { return path.empty() ? default_config() : load_config(path); }

void print_findings(const std::vector<Finding>& fs) {
  for (const auto& f : fs) std::cout << f.subject << ": " << f.message << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Divide-and-conquer prompt transformation and filter-bypass evaluation harness"};
  app.require_subcommand(1);

  std::string config_path;
  bool live = false;

  // transform
  auto* transform = app.add_subcommand("transform", "Transform one sensitive prompt and print the transcript");
  std::string t_pipeline, t_backbone = "mock", t_in, t_category, t_subject, t_record;
  bool t_json = false;
  transform->add_option("--pipeline", t_pipeline, "pipeline id (default: by category)");
  transform->add_option("--backbone", t_backbone, "backbone profile id")->capture_default_str();
  transform->add_option("--in", t_in, "prompt text or a file holding it")->required();
  transform->add_option("--category", t_category, "category of the prompt");
  transform->add_option("--subject", t_subject, "character name for the all-in-one pipelines");
  transform->add_option("--record", t_record, "append {digest, response} fixtures to this file");
  transform->add_option("--config", config_path, "YAML config");
  transform->add_flag("--json", t_json, "print the run as one JSON record");

  // campaign
  auto* campaign = app.add_subcommand("campaign", "Run a one-time or re-use campaign");
  std::string c_mode, c_log;
  int c_workers = 0;
  campaign->add_option("mode", c_mode, "one-time or reuse")->required()->check(CLI::IsMember({"one-time", "reuse"}));
  campaign->add_option("--config", config_path, "YAML config")->required();
  campaign->add_option("--log", c_log, "result log (overrides campaign.log)");
  campaign->add_option("--workers", c_workers, "worker threads (overrides campaign.workers)");
  campaign->add_flag("--live", live, "allow the live image target (also needs config and DACA_LIVE_ACK=yes)");

  // stepwise
  auto* stepwise = app.add_subcommand("stepwise", "Submit sentences cumulatively and trace similarity");
  std::string s_file, s_reference;
  stepwise->add_option("--file", s_file, "sentences file, one per line")->required();
  stepwise->add_option("--reference", s_reference, "reference sensitive prompt");
  stepwise->add_option("--config", config_path, "YAML config");
  stepwise->add_flag("--live", live, "allow the live image target");

  // report
  auto* report = app.add_subcommand("report", "Build report tables from a result log");
  std::string r_log, r_format = "text";
  report->add_option("--log", r_log, "result log")->required();
  report->add_option("--format", r_format, "text or jsonl")->check(CLI::IsMember({"text", "jsonl"}));

  // validate
  auto* validate = app.add_subcommand("validate", "Validate a corpus or pipeline file (builtin when no path)");
  std::string v_corpus, v_pipeline;
  auto* v_corpus_opt = validate->add_option("--corpus", v_corpus, "corpus file")->expected(0, 1);
  auto* v_pipeline_opt = validate->add_option("--pipeline", v_pipeline, "pipeline spec file")->expected(0, 1);

  // pipelines
  auto* pipelines = app.add_subcommand("pipelines", "List builtin pipelines");
  bool p_dump = false;
  pipelines->add_flag("--dump", p_dump, "print the full specs");

  // costs
  auto* costs = app.add_subcommand("costs", "Fixed token cost of the builtin pipelines per pricing scheme");
  costs->add_option("--config", config_path, "YAML config");

  // digest
  auto* digest = app.add_subcommand("digest", "Fixture digest of a prompt or of a rendered template");
  std::string d_text, d_template;
  std::vector<std::string> d_bind;
  digest->add_option("--text", d_text, "prompt text");
  digest->add_option("--template", d_template, "template id to render");
  digest->add_option("--bind", d_bind, "slot=value, repeatable");

  // filter
  auto* filter = app.add_subcommand("filter", "Check a prompt against the simulated filter");
  std::string f_text;
  filter->add_option("--in", f_text, "prompt text")->required();
  filter->add_option("--config", config_path, "YAML config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*transform) {
      AppConfig cfg = config_or_default(config_path);
      auto rt = make_runtime(cfg, {t_backbone}, false);
      SensitivePrompt sp;
      sp.id = "cli";
      sp.text = std::filesystem::is_regular_file(t_in) ? text::trim(slurp(t_in)) : t_in;
      if (!t_category.empty()) sp.category = parse_category(t_category);
      if (!t_subject.empty()) sp.subject = t_subject;
      const PipelineSpec& pipe =
          t_pipeline.empty() ? pipeline_for(sp.category) : rt->ctx.pipeline(t_pipeline);
      const Backbone& bb = rt->ctx.backbone(t_backbone);
      std::unique_ptr<RecordingBackend> rec;
      LlmBackend* backend = bb.backend;
      if (!t_record.empty()) {
        rec = std::make_unique<RecordingBackend>(*bb.backend, t_record);
        backend = rec.get();
      }
      RunOptions opts;
      opts.temperature = backend->deterministic() ? 0.0 : rt->config.campaign.temperature;
      opts.retry = rt->config.campaign.retry;
      PipelineRun run = run_pipeline(pipe, builtin_corpus(), sp, *backend, opts);
      std::optional<CostReport> cost;
      if (!run.failed) cost = account_run(run, pipe, builtin_corpus(), *bb.scheme);
      if (t_json) {
        std::cout << run_record(run, sp.category, cost).dump() << "\n";
      } else {
        for (const auto& tr : run.transcripts) {
          std::cout << "=== " << tr.stage_id << " (in " << tr.usage.input_tokens << ", out " << tr.usage.output_tokens
                    << " tokens" << (tr.refusal ? ", refusal" : "") << ")\n"
                    << tr.response_text << "\n";
        }
        if (cost)
          std::cout << "--- tokens fixed " << cost->fixed_tokens << ", elastic in " << cost->elastic_input_tokens
                    << ", elastic out " << cost->elastic_output_tokens << "; cost $" << cost->total_cost.str() << "\n";
        std::cout << "--- adversarial prompt\n" << run.adversarial_text << "\n";
      }
      if (run.failed) {
        std::cerr << "run failed: " << run.error << "\n";
        return 2;
      }
      return 0;
    }

    if (*campaign) {
      AppConfig cfg = load_config(config_path);
      if (!c_log.empty()) cfg.campaign.log_path = c_log;
      if (c_workers > 0) cfg.campaign.workers = c_workers;
      std::vector<std::string> ids = cfg.campaign.backbones;
      if (!cfg.campaign.review_backbone.empty()) ids.push_back(cfg.campaign.review_backbone);
      auto rt = make_runtime(cfg, ids, live);
      if (!rt->note.empty()) std::cerr << rt->note << "\n";
      CampaignReport rep;
      if (c_mode == "one-time") {
        std::string warning;
        auto dataset = rt->config.campaign.dataset_path.empty() ? builtin_dataset()
                                                                : load_dataset(rt->config.campaign.dataset_path, &warning);
        if (!warning.empty()) std::cerr << "warning: " << warning << "\n";
        rep = run_one_time_campaign(rt->config.campaign, dataset, rt->ctx);
      } else {
        LoadedLog prior = load_log(rt->config.campaign.log_path);
        for (const auto& w : prior.warnings) std::cerr << "warning: " << w << "\n";
        rep = run_reuse_campaign(rt->config.campaign, prior.records, rt->ctx);
      }
      for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << render_text(rep);
      return 0;
    }

    if (*stepwise) {
      AppConfig cfg = config_or_default(config_path);
      auto rt = make_runtime(cfg, {}, live);
      if (!rt->note.empty()) std::cerr << rt->note << "\n";
      SentenceFile sf = parse_sentence_file(slurp(s_file));
      SensitivePrompt ref;
      ref.id = "reference";
      ref.text = !s_reference.empty() ? s_reference : sf.reference.value_or("");
      if (ref.text.empty()) throw ValidationError("no reference prompt: pass --reference or a '# reference:' line");
      const auto trace = stepwise_submit(sf.sentences, *rt->target, *rt->embedder, ref);
      for (std::size_t i = 0; i < trace.size(); ++i) {
        const auto& st = trace[i];
        std::cout << "step " << (i + 1) << ": "
                  << (st.trial.decision.blocked ? "blocked (" + std::string(to_string(st.trial.decision.reason)) + ")"
                                                : "generated " + st.trial.image_ref.value_or(""));
        if (st.similarity) std::cout << ", similarity " << *st.similarity;
        std::cout << ", shared tokens " << st.overlap << "\n";
      }
      return 0;
    }

    if (*report) {
      CampaignReport rep = build_report_from_log(r_log);
      for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << (r_format == "jsonl" ? render_jsonl(rep) : render_text(rep));
      return 0;
    }

    if (*validate) {
      if (!*v_corpus_opt && !*v_pipeline_opt) throw ValidationError("validate needs --corpus or --pipeline");
      bool clean = true;
      const Corpus* corpus = &builtin_corpus();
      Corpus loaded;
      if (*v_corpus_opt) {
        if (!v_corpus.empty()) {
          loaded = load_corpus(v_corpus);
          corpus = &loaded;
        }
        const auto fs = validate_corpus(*corpus);
        print_findings(fs);
        clean = clean && fs.empty();
        std::cout << "corpus: " << corpus->templates.size() << " templates, " << fs.size() << " findings\n";
      }
      if (*v_pipeline_opt) {
        const auto specs = v_pipeline.empty() ? builtin_pipelines() : parse_pipeline_specs(slurp(v_pipeline));
        for (const auto& p : specs) {
          const auto fs = validate_pipeline(p, *corpus);
          print_findings(fs);
          clean = clean && fs.empty();
          std::cout << "pipeline " << p.id << ": " << p.stages.size() << " stages, " << fs.size() << " findings\n";
        }
      }
      return clean ? 0 : 1;
    }

    if (*pipelines) {
      for (const auto& p : builtin_pipelines()) {
        if (p_dump) std::cout << serialize_pipeline(p) << "\n";
        else std::cout << p.id << " (" << to_string(p.family) << ", " << p.stages.size() << " stages)\n";
      }
      return 0;
    }

    if (*costs) {
      AppConfig cfg = config_or_default(config_path);
      for (const auto& scheme : cfg.pricing.schemes) {
        for (const auto& p : builtin_pipelines()) {
          const TokenCost fc = fixed_cost(p, builtin_corpus(), scheme);
          std::cout << scheme.id << " " << p.id << " " << fc.tokens << " tokens $" << fc.cost.str() << "\n";
        }
      }
      return 0;
    }

    if (*digest) {
      ChatRequest req;
      if (!d_template.empty()) {
        SlotBindings b;
        for (const auto& kv : d_bind) {
          const auto eq = kv.find('=');
          if (eq == std::string::npos) throw ValidationError("--bind expects slot=value");
          b[kv.substr(0, eq)] = kv.substr(eq + 1);
        }
        req.messages.push_back({"user", render_template(builtin_corpus().at(d_template), b)});
      } else {
        req.messages.push_back({"user", d_text});
      }
      std::cout << request_digest(req) << "\n";
      return 0;
    }

    if (*filter) {
      AppConfig cfg = config_or_default(config_path);
      const FilterDecision d = filter_check(cfg.sim_filter, f_text);
      std::cout << (d.blocked ? "blocked" : "passed") << " " << to_string(d.reason);
      for (const auto& m : d.matched) std::cout << " [" << m << "]";
      std::cout << "\n";
      return 0;
    }
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
