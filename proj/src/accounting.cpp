#include "daca/accounting.hpp"

#include <algorithm>

#include "daca/error.hpp"

namespace daca {

std::int64_t template_fixed_tokens(const PromptTemplate& t, const PricingScheme& scheme) {
  return estimate_tokens(strip_slots(t), scheme);
}

TokenCost fixed_cost(const PipelineSpec& p, const Corpus& c, const PricingScheme& scheme) {
  TokenCost out;
  if (p.stages.empty()) return out;
  const auto findings = validate_pipeline(p, c);
  if (!findings.empty())
    throw ValidationError("pipeline " + p.id + " does not validate: " + findings.front().message);
  for (const auto& st : p.stages) out.tokens += template_fixed_tokens(c.at(st.template_id), scheme);
  out.cost = price_tokens(out.tokens, 0, scheme);
  return out;
}

CostReport account_run(const PipelineRun& run, const PipelineSpec& p, const Corpus& c,
                       const PricingScheme& scheme) {
  if (run.transcripts.empty()) throw PreconditionError("run " + run.run_id + " has no transcripts");
  CostReport r;
  const TokenCost fixed = fixed_cost(p, c, scheme);
  r.fixed_tokens = fixed.tokens;
  r.fixed_cost = fixed.cost;
  for (const auto& tr : run.transcripts) {
    auto st = std::find_if(p.stages.begin(), p.stages.end(),
                           [&](const StageSpec& s) { return s.id == tr.stage_id; });
    if (st == p.stages.end())
      throw ValidationError("transcript stage " + tr.stage_id + " is not part of pipeline " + p.id);
    const std::int64_t own = template_fixed_tokens(c.at(st->template_id), scheme);
    r.elastic_input_tokens += std::max<std::int64_t>(0, tr.usage.input_tokens - own);
    r.elastic_output_tokens += tr.usage.output_tokens;
  }
  r.elastic_input_cost = price_tokens(r.elastic_input_tokens, 0, scheme);
  r.elastic_output_cost = price_tokens(0, r.elastic_output_tokens, scheme);
  r.elastic_cost = r.elastic_input_cost + r.elastic_output_cost;
  r.total_cost = r.fixed_cost + r.elastic_cost;
  return r;
}

TokenCost reuse_cost(std::string_view adversarial_text, Money reuse_price_per_1k, const PricingScheme& scheme) {
  TokenCost out;
  out.tokens = estimate_tokens(adversarial_text, scheme);
  out.cost = reuse_price_per_1k.per_thousand(out.tokens);
  return out;
}

}  // namespace daca
