#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace daca {

// Exact USD amount stored as an integer count of 1e-12 dollars.
class Money {
 public:
  static constexpr std::int64_t kUnitsPerDollar = 1'000'000'000'000LL;
  static constexpr int kScale = 12;

  constexpr Money() = default;
  static constexpr Money from_units(std::int64_t units) {
    Money m;
    m.units_ = units;
    return m;
  }
  // Parses a plain decimal ("0.003", "12", "-0.5"). Throws ValidationError on
  // anything else or on more than 12 fractional digits.
  static Money parse(std::string_view text);

  constexpr std::int64_t units() const { return units_; }
  bool is_zero() const { return units_ == 0; }

  // Minimal exact decimal ("0.03976", "0", "1.5").
  std::string str() const;
  // Half-up rounding to `decimals` places, printed with exactly that many.
  std::string fixed(int decimals) const;

  // tokens / 1000 * this. Throws ValidationError if the result is not exact
  // at 1e-12 resolution.
  Money per_thousand(std::int64_t tokens) const;

  Money operator+(Money o) const { return from_units(units_ + o.units_); }
  Money operator-(Money o) const { return from_units(units_ - o.units_); }
  Money& operator+=(Money o) {
    units_ += o.units_;
    return *this;
  }
  auto operator<=>(const Money&) const = default;

 private:
  std::int64_t units_ = 0;
};

}  // namespace daca
