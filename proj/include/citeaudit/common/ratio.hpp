#pragma once

#include <compare>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>

namespace citeaudit {

/// Exact non-negative-denominator fraction. Metrics are reported as ratios so
/// the acceptance oracles can compare with zero tolerance.
class Ratio {
 public:
  constexpr Ratio() = default;
  Ratio(std::int64_t num, std::int64_t den = 1) : num_(num), den_(den) {
    if (den_ == 0) throw std::domain_error("Ratio with zero denominator");
    if (den_ < 0) {
      num_ = -num_;
      den_ = -den_;
    }
    const auto g = std::gcd(num_ < 0 ? -num_ : num_, den_);
    if (g > 1) {
      num_ /= g;
      den_ /= g;
    }
  }

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  double value() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  friend Ratio operator+(const Ratio& a, const Ratio& b) {
    const auto l = std::lcm(a.den_, b.den_);
    return Ratio(add(mul(a.num_, l / a.den_), mul(b.num_, l / b.den_)), l);
  }
  friend Ratio operator-(const Ratio& a, const Ratio& b) { return a + Ratio(-b.num_, b.den_); }
  friend Ratio operator*(const Ratio& a, const Ratio& b) {
    return Ratio(mul(a.num_, b.num_), mul(a.den_, b.den_));
  }
  friend Ratio operator/(const Ratio& a, const Ratio& b) {
    return Ratio(mul(a.num_, b.den_), mul(a.den_, b.num_));
  }
  friend bool operator==(const Ratio& a, const Ratio& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend std::strong_ordering operator<=>(const Ratio& a, const Ratio& b) {
    // __int128 keeps cross-multiplication exact for 64-bit operands
    const __int128 l = static_cast<__int128>(a.num_) * b.den_;
    const __int128 r = static_cast<__int128>(b.num_) * a.den_;
    if (l < r) return std::strong_ordering::less;
    if (l > r) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
  }

  std::string str() const {
    if (den_ == 1) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(den_);
  }

  friend std::ostream& operator<<(std::ostream& os, const Ratio& r) { return os << r.str(); }

 private:
  static std::int64_t mul(std::int64_t a, std::int64_t b) {
    std::int64_t r;
    if (__builtin_mul_overflow(a, b, &r)) throw std::overflow_error("Ratio overflow");
    return r;
  }
  static std::int64_t add(std::int64_t a, std::int64_t b) {
    std::int64_t r;
    if (__builtin_add_overflow(a, b, &r)) throw std::overflow_error("Ratio overflow");
    return r;
  }

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

/// A ratio that may be undefined (zero denominator, empty set).
using MaybeRatio = std::optional<Ratio>;

inline MaybeRatio safe_ratio(std::int64_t num, std::int64_t den) {
  if (den == 0) return std::nullopt;
  return Ratio(num, den);
}

/// Formats value*scale with `decimals` digits, rounding half to even, exactly.
inline std::string format_fixed(const Ratio& r, int decimals, std::int64_t scale = 1) {
  std::int64_t pow10 = 1;
  for (int i = 0; i < decimals; ++i) pow10 *= 10;
  const __int128 n = static_cast<__int128>(r.num()) * scale * pow10;
  const __int128 d = r.den();
  const bool negative = n < 0;
  const __int128 an = negative ? -n : n;
  __int128 q = an / d;
  const __int128 rem = an % d;
  if (rem * 2 > d || (rem * 2 == d && (q % 2) == 1)) ++q;
  const auto whole = static_cast<std::int64_t>(q / pow10);
  const auto frac = static_cast<std::int64_t>(q % pow10);
  std::string out = (negative && q != 0 ? "-" : "") + std::to_string(whole);
  if (decimals > 0) {
    std::string f = std::to_string(frac);
    out += "." + std::string(static_cast<std::size_t>(decimals) - f.size(), '0') + f;
  }
  return out;
}

inline std::string format_maybe(const MaybeRatio& r, int decimals, std::int64_t scale = 1) {
  return r ? format_fixed(*r, decimals, scale) : std::string("NA");
}

}  // namespace citeaudit
