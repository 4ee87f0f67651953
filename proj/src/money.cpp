#include "daca/money.hpp"

#include <cstdlib>

#include "daca/error.hpp"

namespace daca {

Money Money::parse(std::string_view text) {
  const std::string original(text);
  if (text.empty()) throw ValidationError("empty decimal");
  bool negative = false;
  if (text.front() == '-' || text.front() == '+') {
    negative = text.front() == '-';
    text.remove_prefix(1);
  }
  const auto dot = text.find('.');
  const std::string_view whole = text.substr(0, dot);
  const std::string_view frac = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
  if (whole.empty() && frac.empty()) throw ValidationError("malformed decimal: " + original);
  if (frac.size() > static_cast<std::size_t>(kScale))
    throw ValidationError("more than 12 decimal places: " + original);
  std::int64_t whole_value = 0;
  for (char c : whole) {
    if (c < '0' || c > '9') throw ValidationError("malformed decimal: " + original);
    if (whole_value > INT64_MAX / 10) throw ValidationError("decimal out of range: " + original);
    whole_value = whole_value * 10 + (c - '0');
  }
  if (whole_value > INT64_MAX / kUnitsPerDollar) throw ValidationError("decimal out of range: " + original);
  std::int64_t units = whole_value * kUnitsPerDollar;
  std::int64_t scale = kUnitsPerDollar / 10;
  for (char c : frac) {
    if (c < '0' || c > '9') throw ValidationError("malformed decimal: " + original);
    units += (c - '0') * scale;
    scale /= 10;
  }
  return from_units(negative ? -units : units);
}

std::string Money::str() const {
  std::int64_t u = units_;
  std::string sign;
  if (u < 0) {
    sign = "-";
    u = -u;
  }
  std::string out = sign + std::to_string(u / kUnitsPerDollar);
  std::int64_t frac = u % kUnitsPerDollar;
  if (frac == 0) return out;
  std::string digits = std::to_string(frac);
  digits.insert(0, static_cast<std::size_t>(kScale) - digits.size(), '0');
  while (!digits.empty() && digits.back() == '0') digits.pop_back();
  return out + "." + digits;
}

std::string Money::fixed(int decimals) const {
  if (decimals < 0 || decimals > kScale) throw PreconditionError("bad decimal count");
  std::int64_t step = 1;
  for (int i = 0; i < kScale - decimals; ++i) step *= 10;
  std::int64_t u = units_ < 0 ? -units_ : units_;
  std::int64_t q = u / step;
  if ((u % step) * 2 >= step) ++q;
  std::int64_t base = 1;
  for (int i = 0; i < decimals; ++i) base *= 10;
  std::string out = (units_ < 0 && q != 0 ? "-" : "") + std::to_string(q / base);
  if (decimals > 0) {
    std::string digits = std::to_string(q % base);
    digits.insert(0, static_cast<std::size_t>(decimals) - digits.size(), '0');
    out += "." + digits;
  }
  return out;
}

Money Money::per_thousand(std::int64_t tokens) const {
  if (tokens != 0 && (units_ > INT64_MAX / tokens || units_ < INT64_MIN / tokens))
    throw ValidationError("currency overflow");
  const std::int64_t scaled = units_ * tokens;
  if (scaled % 1000 != 0) throw ValidationError("inexact currency product");
  return from_units(scaled / 1000);
}

}  // namespace daca
