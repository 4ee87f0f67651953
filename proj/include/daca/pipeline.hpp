#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "daca/backend.hpp"
#include "daca/corpus.hpp"
#include "daca/dataset.hpp"

namespace daca {

enum class PipelineFamily { ALL_IN_ONE_GO, STEPWISE };

std::string_view to_string(PipelineFamily f);
PipelineFamily parse_pipeline_family(std::string_view s);

struct StageSpec {
  std::string id;
  std::string template_id;
  // slot name -> variable name, in declaration order
  std::vector<std::pair<std::string, std::string>> input_bindings;
  std::string output_var;

  bool operator==(const StageSpec&) const = default;
};

struct PipelineSpec {
  std::string id;
  PipelineFamily family = PipelineFamily::STEPWISE;
  std::vector<StageSpec> stages;
  std::vector<std::string> entry_vars;
  std::string final_var;

  bool operator==(const PipelineSpec&) const = default;
};

std::vector<Finding> validate_pipeline(const PipelineSpec& p, const Corpus& c);

const std::vector<PipelineSpec>& builtin_pipelines();
const PipelineSpec& builtin_pipeline(std::string_view id);
// all_in_one.character, all_in_one.artist or stepwise.harmful.
const PipelineSpec& pipeline_for(Category c);

// Line format: "pipeline <id>", "family", "entry", "final", then per stage
// "stage <id>", "template", "in <slot>=<var>", "out". '#' starts a comment.
std::vector<PipelineSpec> parse_pipeline_specs(std::string_view text);
std::string serialize_pipeline(const PipelineSpec& p);

struct StageTranscript {
  std::string stage_id;
  std::string rendered_prompt;
  std::string response_text;
  TokenUsage usage;
  std::chrono::milliseconds latency{0};
  bool refusal = false;
  int attempts = 1;
};

struct PipelineRun {
  std::string run_id;
  std::string sensitive_id;
  std::string backbone_id;
  std::string pipeline_id;
  std::string adversarial_text;
  std::vector<StageTranscript> transcripts;
  std::string started_at;
  std::string finished_at;
  bool failed = false;
  std::string error;
  std::optional<std::size_t> failed_stage;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
  // Defaults to std::this_thread::sleep_for; tests inject a recorder.
  std::function<void(std::chrono::milliseconds)> sleeper;
};

struct RunOptions {
  std::string run_id;
  double temperature = 1.0;
  int max_output_tokens = 2048;
  RetryPolicy retry;
};

// Values of the entry variables for `sp`: "sensitive" is the text, "subject"
// the explicit or derived subject. Unknown entry vars are a precondition error.
std::map<std::string, std::string> entry_values(const PipelineSpec& p, const SensitivePrompt& sp);

// Throws ValidationError if the pipeline does not validate. Backend failures
// after retries produce a run with failed=true rather than an exception.
PipelineRun run_pipeline(const PipelineSpec& p, const Corpus& c, const SensitivePrompt& sp, LlmBackend& backend,
                         const RunOptions& opts = {});

std::string utc_now_iso();

}  // namespace daca
