#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "daca/money.hpp"

namespace daca {

// words_per_token kept as an exact fraction of its decimal text.
struct Ratio {
  std::int64_t num = 1;
  std::int64_t den = 1;

  static Ratio parse(std::string_view decimal);
  std::string str() const;
  bool operator==(const Ratio&) const = default;
};

struct PricingScheme {
  std::string id;
  Money input_per_1k;
  Money output_per_1k;
  Ratio words_per_token;
  // Priced at zero because the provider advertised a free tier.
  bool free_tier = false;
};

struct PricingTable {
  std::vector<PricingScheme> schemes;

  const PricingScheme* find(std::string_view id) const;
  const PricingScheme& at(std::string_view id) const;
};

// One JSON object per line: {id, input_per_1k, output_per_1k,
// words_per_token[, free_tier]}. Decimals may be JSON strings or numbers.
PricingTable parse_pricing(std::string_view jsonl);
PricingTable load_pricing(const std::string& path);
const PricingTable& builtin_pricing();

// ceil(ceil(chars / 3) / words_per_token), chars counted as Unicode scalars
// of the trimmed text.
std::int64_t estimate_tokens(std::string_view text, const PricingScheme& scheme);

Money price_tokens(std::int64_t input_tokens, std::int64_t output_tokens, const PricingScheme& scheme);

}  // namespace daca
