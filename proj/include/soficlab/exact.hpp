#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <charconv>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <system_error>

#include "soficlab/error.hpp"

namespace soficlab {

using big_int = boost::multiprecision::cpp_int;
using rational = boost::multiprecision::cpp_rational;

/// Shortest round-trip decimal rendering of a double ("0.1", "1e-05").
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x < 0 ? "-inf" : "inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

/// The decimal number a user meant when typing `x`.
///
/// Thresholds are read from text, so 0.1 means one tenth rather than the
/// nearest binary double. The shortest round-trip decimal of `x` is
/// converted to an exact rational.
inline rational exact_decimal(double x) {
  if (!std::isfinite(x)) throw argument_error("exact_decimal: non-finite value");
  const std::string s = format_double(x);
  big_int mantissa = 0;
  long exponent = 0;
  bool negative = false;
  bool after_point = false;
  std::size_t i = 0;
  if (i < s.size() && s[i] == '-') {
    negative = true;
    ++i;
  }
  for (; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '.') {
      after_point = true;
    } else if (c == 'e' || c == 'E') {
      exponent += std::stol(s.substr(i + 1));
      break;
    } else {
      mantissa = mantissa * 10 + (c - '0');
      if (after_point) --exponent;
    }
  }
  rational r(mantissa);
  big_int scale = 1;
  for (long k = 0; k < std::labs(exponent); ++k) scale *= 10;
  if (exponent >= 0) {
    r *= scale;
  } else {
    r /= scale;
  }
  return negative ? rational(-r) : r;
}

/// 2^-k as an exact rational.
inline rational dyadic(unsigned k) {
  big_int den = 1;
  den <<= k;
  return rational(big_int(1), den);
}

/// Natural logarithm of a positive big integer.
inline double log_big(const big_int& n) {
  if (n <= 0) throw argument_error("log_big: non-positive argument");
  const unsigned bits = boost::multiprecision::msb(n) + 1;
  if (bits <= 1000) return std::log(n.convert_to<double>());
  const unsigned shift = bits - 64;
  const big_int top = n >> shift;
  return std::log(top.convert_to<double>()) + static_cast<double>(shift) * std::log(2.0);
}

/// ceil(q) for an exact rational.
inline big_int ceil_rational(const rational& q) {
  const big_int num = boost::multiprecision::numerator(q);
  const big_int den = boost::multiprecision::denominator(q);
  big_int quot = num / den;
  if (quot * den != num && num > 0) quot += 1;
  return quot;
}

/// floor(q) for an exact rational.
inline big_int floor_rational(const rational& q) {
  const big_int num = boost::multiprecision::numerator(q);
  const big_int den = boost::multiprecision::denominator(q);
  big_int quot = num / den;
  if (quot * den != num && num < 0) quot -= 1;
  return quot;
}

/// A real number or the sentinel -inf (the logarithm of an empty count).
///
/// -inf orders below every real. Arithmetic is only available on finite
/// values through `value()`, which throws on the sentinel.
class ExtendedReal {
 public:
  constexpr ExtendedReal() = default;
  constexpr explicit ExtendedReal(double v) : value_(v) {}

  static constexpr ExtendedReal neg_inf() {
    ExtendedReal r;
    r.neg_inf_ = true;
    return r;
  }

  constexpr bool is_neg_inf() const { return neg_inf_; }

  double value() const {
    if (neg_inf_) throw argument_error("ExtendedReal: arithmetic on -inf");
    return value_;
  }

  friend constexpr bool operator==(const ExtendedReal& a, const ExtendedReal& b) {
    if (a.neg_inf_ || b.neg_inf_) return a.neg_inf_ == b.neg_inf_;
    return a.value_ == b.value_;
  }

  friend constexpr std::partial_ordering operator<=>(const ExtendedReal& a, const ExtendedReal& b) {
    if (a.neg_inf_ && b.neg_inf_) return std::partial_ordering::equivalent;
    if (a.neg_inf_) return std::partial_ordering::less;
    if (b.neg_inf_) return std::partial_ordering::greater;
    return a.value_ <=> b.value_;
  }

  std::string to_string() const { return neg_inf_ ? std::string("-inf") : format_double(value_); }

 private:
  double value_ = 0.0;
  bool neg_inf_ = false;
};

namespace detail {

// r with r^n == count, if one exists.
inline std::optional<big_int> exact_root(const big_int& count, unsigned n) {
  if (n == 0 || count <= 0) return std::nullopt;
  if (n == 1) return count;
  const double guess = std::exp(log_big(count) / n);
  if (!(guess < 9e15)) return std::nullopt;
  const auto centre = static_cast<long long>(std::llround(guess));
  for (long long r = std::max(1LL, centre - 1); r <= centre + 1; ++r) {
    big_int power = boost::multiprecision::pow(big_int(r), n);
    if (power == count) return big_int(r);
  }
  return std::nullopt;
}

}  // namespace detail

/// (1/scale) * log(count), with log 0 = -inf. When count is an exact
/// scale-th power r^scale the result is log(r) itself, so 2^n at scale n
/// gives log 2 bit for bit.
inline ExtendedReal normalized_log(const big_int& count, double scale) {
  if (count == 0) return ExtendedReal::neg_inf();
  if (scale >= 1 && scale <= 1e5 && scale == std::floor(scale))
    if (auto r = detail::exact_root(count, static_cast<unsigned>(scale))) return ExtendedReal(log_big(*r));
  return ExtendedReal(log_big(count) / scale);
}

inline ExtendedReal normalized_log(std::uint64_t count, double scale) { return normalized_log(big_int(count), scale); }

inline ExtendedReal max(const ExtendedReal& a, const ExtendedReal& b) { return a < b ? b : a; }

}  // namespace soficlab
