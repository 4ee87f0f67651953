#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "daca/accounting.hpp"
#include "daca/backend.hpp"
#include "daca/corpus.hpp"
#include "daca/dataset.hpp"
#include "daca/metrics.hpp"
#include "daca/pipeline.hpp"
#include "daca/report.hpp"
#include "daca/result_log.hpp"
#include "daca/target.hpp"

namespace daca {

struct CampaignConfig {
  std::string dataset_path;  // empty: the shipped dataset
  // category -> pipeline id; missing categories use pipeline_for()
  std::map<Category, std::string> pipelines;
  std::vector<std::string> backbones;
  int transformations_per_prompt = 10;
  int reuse_repeats = 10;
  int workers = 1;
  std::string log_path;
  double temperature = 1.0;
  RetryPolicy retry;
  Money reuse_price_per_1k = Money::parse("0.04");
  // Optional backbone id used to review generated pseudo-images.
  std::string review_backbone;
  // Optional JSONL {category, backbone, run_id} forcing the re-use choice.
  std::string selection_override_path;
};

// Throws ValidationError for counts below one or an empty log path.
void check_campaign_config(const CampaignConfig& cfg);

const std::string& pipeline_id_for(const CampaignConfig& cfg, Category c);

struct Backbone {
  std::string id;
  LlmBackend* backend = nullptr;
  const PricingScheme* scheme = nullptr;
};

// Everything a campaign talks to. Backends and the target must be safe to
// call from several threads.
struct CampaignContext {
  const Corpus* corpus = &builtin_corpus();
  const std::vector<PipelineSpec>* pipelines = &builtin_pipelines();
  std::vector<Backbone> backbones;
  Target* target = nullptr;
  const Embedder* embedder = nullptr;

  const Backbone& backbone(const std::string& id) const;
  const PipelineSpec& pipeline(const std::string& id) const;
};

// Log record builders. Costs are exact decimal strings.
nlohmann::json run_record(const PipelineRun& run, Category c, const std::optional<CostReport>& cost);
nlohmann::json trial_record(const TrialResult& t, const std::string& sensitive_id, Category c,
                            const std::string& backbone_id, const std::optional<std::string>& run_id,
                            std::optional<double> t2i, std::optional<double> t2t);

// Runs, submits and records every (prompt x backbone x transformation);
// returns the report of the log after the campaign. A failed run aborts the
// rest of its (prompt, backbone) cell.
CampaignReport run_one_time_campaign(const CampaignConfig& cfg, const std::vector<SensitivePrompt>& dataset,
                                     CampaignContext& ctx);

// Picks the best prior run per (category, backbone) from `prior` and submits
// it reuse_repeats times. Cells without a successful run are marked
// unavailable.
CampaignReport run_reuse_campaign(const CampaignConfig& cfg, const std::vector<nlohmann::json>& prior,
                                  CampaignContext& ctx);

struct StepTrace {
  TrialResult trial;
  std::string submitted;
  // nullopt when the step was blocked or an embedding was empty
  std::optional<double> similarity;
  // distinct content tokens shared with the reference
  std::size_t overlap = 0;
};

// Submits the cumulative concatenation after each sentence.
std::vector<StepTrace> stepwise_submit(const std::vector<std::string>& sentences, Target& target,
                                       const Embedder& embedder, const SensitivePrompt& reference);

// Sentences file: one per line, '#' comments. A "# reference: <text>" line
// sets the reference prompt.
struct SentenceFile {
  std::vector<std::string> sentences;
  std::optional<std::string> reference;
};
SentenceFile parse_sentence_file(std::string_view text);

}  // namespace daca
