#include "daca/cost.hpp"

#include <charconv>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "daca/builtin_data.hpp"
#include "daca/error.hpp"
#include "daca/text.hpp"

namespace daca {

namespace {

std::string decimal_text(const nlohmann::json& v, const std::string& what) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_float()) {
    // Shortest round-trip form, so 0.003 stays "0.003".
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v.get<double>());
    std::string s(buf, res.ptr);
    if (s.find_first_of("eE") != std::string::npos) throw ValidationError(what + ": exponent notation not supported");
    return s;
  }
  throw ValidationError(what + ": expected a decimal");
}

}  // namespace

Ratio Ratio::parse(std::string_view decimal) {
  const Money m = Money::parse(decimal);
  std::int64_t num = m.units();
  std::int64_t den = Money::kUnitsPerDollar;
  const std::int64_t g = std::gcd(num, den);
  if (g != 0) {
    num /= g;
    den /= g;
  }
  return {num, den};
}

std::string Ratio::str() const {
  // Exact only when den divides a power of ten, which parse guarantees.
  return Money::from_units(num * (Money::kUnitsPerDollar / den)).str();
}

const PricingScheme* PricingTable::find(std::string_view id) const {
  for (const auto& s : schemes) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

const PricingScheme& PricingTable::at(std::string_view id) const {
  if (const auto* s = find(id)) return *s;
  throw ConfigError("unknown pricing id: " + std::string(id));
}

PricingTable parse_pricing(std::string_view jsonl) {
  PricingTable t;
  std::set<std::string> ids;
  std::size_t line_no = 0;
  for (const auto& raw : text::split(jsonl, "\n")) {
    ++line_no;
    const std::string line = text::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const std::string where = "pricing line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(where + ": " + e.what());
    }
    for (const char* key : {"id", "input_per_1k", "output_per_1k", "words_per_token"}) {
      if (!j.contains(key)) throw ValidationError(where + ": missing '" + key + "'");
    }
    PricingScheme s;
    s.id = j["id"].get<std::string>();
    s.input_per_1k = Money::parse(decimal_text(j["input_per_1k"], where));
    s.output_per_1k = Money::parse(decimal_text(j["output_per_1k"], where));
    s.words_per_token = Ratio::parse(decimal_text(j["words_per_token"], where));
    s.free_tier = j.value("free_tier", false);
    if (s.input_per_1k < Money{} || s.output_per_1k < Money{})
      throw ValidationError(where + ": negative price");
    // Prices with more than 9 decimals would make per-token products inexact.
    if (s.input_per_1k.units() % 1000 != 0 || s.output_per_1k.units() % 1000 != 0)
      throw ValidationError(where + ": prices are limited to 9 decimal places");
    const auto& r = s.words_per_token;
    if (r.num <= 0 || r.num * 2 > r.den * 3) throw ValidationError(where + ": words_per_token must be in (0, 1.5]");
    if (!ids.insert(s.id).second) throw ValidationError(where + ": duplicate id " + s.id);
    t.schemes.push_back(std::move(s));
  }
  return t;
}

PricingTable load_pricing(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open pricing file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_pricing(ss.str());
}

const PricingTable& builtin_pricing() {
  static const PricingTable t = parse_pricing(builtin_file("pricing.jsonl"));
  return t;
}

std::int64_t estimate_tokens(std::string_view text, const PricingScheme& scheme) {
  const auto chars = static_cast<std::int64_t>(text::utf8_length(text::trim(text)));
  const std::int64_t words = (chars + 2) / 3;
  const auto& r = scheme.words_per_token;
  return (words * r.den + r.num - 1) / r.num;
}

Money price_tokens(std::int64_t input_tokens, std::int64_t output_tokens, const PricingScheme& scheme) {
  if (input_tokens < 0 || output_tokens < 0) throw PreconditionError("negative token count");
  return scheme.input_per_1k.per_thousand(input_tokens) + scheme.output_per_1k.per_thousand(output_tokens);
}

}  // namespace daca
