#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "daca/backend.hpp"
#include "daca/corpus.hpp"
#include "daca/embedding.hpp"
#include "daca/pipeline.hpp"
#include "daca/target.hpp"

namespace daca {

// Reference text-to-image similarity of plain prompts; report annotation only.
inline constexpr double clip_baseline = 0.272;

struct SimilarityReport {
  double text_to_image = 0;
  double text_to_text = 0;
  double baseline = clip_baseline;
};

// Fraction of trials that were not blocked. Throws PreconditionError on empty
// input.
double bypass_rate(const std::vector<TrialResult>& trials);

struct CandidateRun {
  PipelineRun run;
  // nullopt when the run has no successful trial
  std::optional<double> similarity;
};

// Highest similarity wins; ties go to the lexicographically smallest run_id.
// Throws PreconditionError when no candidate has a similarity, or one is not
// finite.
const CandidateRun& select_best_prompt(const std::vector<CandidateRun>& runs);

enum class ReviewInput { image_ref, caption };

// The review template followed by the image reference or, for simulated
// images, the caption. Throws PreconditionError on empty input.
ChatRequest build_review_request(std::string_view input, ReviewInput kind = ReviewInput::caption,
                                 const Corpus& corpus = builtin_corpus());

struct ReviewVerdict {
  // nullopt when the answer does not start with an appropriate/inappropriate
  // bracket
  std::optional<bool> appropriate;
  std::string label;
  std::string reason;
  std::string raw;

  bool parseable() const { return appropriate.has_value(); }
};

ReviewVerdict parse_review_verdict(std::string_view text);

// Manually filled verdicts, one JSON object per line:
// {trial_id, appropriate, reason}.
struct ImportedVerdict {
  std::string trial_id;
  bool appropriate = true;
  std::string reason;
};
std::vector<ImportedVerdict> parse_verdict_file(std::string_view jsonl);
std::vector<ImportedVerdict> load_verdict_file(const std::string& path);

struct EmbeddingEndpoint {
  std::string endpoint;
  std::string auth_env_var;
  std::chrono::milliseconds timeout{30000};
  std::size_t dims = kEmbedDim;
};

// Offline embedder uses hash_embed; a live one POSTs {input} and expects
// {embedding: [...]}. Both return unit vectors.
class Embedder {
 public:
  Embedder() = default;
  explicit Embedder(EmbeddingEndpoint live);

  bool live() const { return live_.has_value(); }
  std::size_t dims() const { return live_ ? live_->dims : kEmbedDim; }

  EmbeddingVector embed_text(std::string_view text) const;
  // Offline: the pseudo-image caption. Live: the image reference.
  EmbeddingVector embed_image(const TrialResult& trial) const;

 private:
  EmbeddingVector post(std::string_view input) const;

  std::optional<EmbeddingEndpoint> live_;
  std::string key_;
};

// cosine, or nullopt when either side is the zero vector.
std::optional<double> safe_cosine(const EmbeddingVector& a, const EmbeddingVector& b);

}  // namespace daca
