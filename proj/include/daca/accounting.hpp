#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "daca/corpus.hpp"
#include "daca/cost.hpp"
#include "daca/pipeline.hpp"

namespace daca {

struct TokenCost {
  std::int64_t tokens = 0;
  Money cost;
};

// Tokens of the template body with every slot left empty.
std::int64_t template_fixed_tokens(const PromptTemplate& t, const PricingScheme& scheme);

// Sum of template_fixed_tokens over the stages, priced as input. A pipeline
// with no stages costs nothing; otherwise it must validate.
TokenCost fixed_cost(const PipelineSpec& p, const Corpus& c, const PricingScheme& scheme);

struct CostReport {
  std::int64_t fixed_tokens = 0;
  std::int64_t elastic_input_tokens = 0;
  std::int64_t elastic_output_tokens = 0;
  Money fixed_cost;
  Money elastic_input_cost;
  Money elastic_output_cost;
  Money elastic_cost;
  Money total_cost;
  std::optional<std::int64_t> reuse_tokens;
  std::optional<Money> reuse_cost;
};

// Intermediate outputs are billed as output of their own stage and again as
// input of the stage that reads them. Throws PreconditionError when the run
// has no transcripts.
CostReport account_run(const PipelineRun& run, const PipelineSpec& p, const Corpus& c, const PricingScheme& scheme);

TokenCost reuse_cost(std::string_view adversarial_text, Money reuse_price_per_1k, const PricingScheme& scheme);

}  // namespace daca
