#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <boost/rational.hpp>

namespace ecol {

using Rational = boost::rational<std::int64_t>;

inline std::string to_string(const Rational& r) {
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

inline double to_double(const Rational& r) {
  return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

// floor for possibly negative values
inline std::int64_t floor_of(const Rational& r) {
  std::int64_t q = r.numerator() / r.denominator();
  if (r.numerator() % r.denominator() != 0 && r.numerator() < 0) --q;
  return q;
}

inline std::int64_t ceil_of(const Rational& r) { return -floor_of(-r); }

// Parses "p/q", an integer, or a plain decimal ("0.025") exactly.
inline Rational parse_rational(std::string_view text) {
  auto fail = [&]() -> Rational {
    throw std::invalid_argument("not a rational number: '" + std::string(text) + "'");
  };
  if (text.empty()) return fail();
  auto slash = text.find('/');
  try {
    if (slash != std::string_view::npos) {
      std::size_t used = 0;
      std::string num(text.substr(0, slash)), den(text.substr(slash + 1));
      std::int64_t p = std::stoll(num, &used);
      if (used != num.size()) return fail();
      std::int64_t q = std::stoll(den, &used);
      if (used != den.size() || q == 0) return fail();
      return Rational(p, q);
    }
    bool negative = text.front() == '-';
    std::string_view body = negative ? text.substr(1) : text;
    auto dot = body.find('.');
    std::string whole(body.substr(0, dot));
    std::string frac = dot == std::string_view::npos ? "" : std::string(body.substr(dot + 1));
    if (whole.empty() && frac.empty()) return fail();
    if (frac.size() > 12) return fail();
    for (char c : whole + frac)
      if (c < '0' || c > '9') return fail();
    std::int64_t scale = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) scale *= 10;
    std::int64_t p = (whole.empty() ? 0 : std::stoll(whole)) * scale + (frac.empty() ? 0 : std::stoll(frac));
    Rational r(p, scale);
    return negative ? -r : r;
  } catch (const std::out_of_range&) {
    return fail();
  }
}

// Best rational approximation with bounded denominator (continued fractions).
inline Rational approximate_rational(double x, std::int64_t max_den = 10000) {
  if (!std::isfinite(x)) throw std::invalid_argument("cannot approximate a non-finite value");
  std::int64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  double v = x;
  for (int iter = 0; iter < 64; ++iter) {
    double a = std::floor(v);
    auto ai = static_cast<std::int64_t>(a);
    std::int64_t q2 = q0 + ai * q1;
    if (q2 > max_den) break;
    std::int64_t p2 = p0 + ai * p1;
    p0 = p1; q0 = q1; p1 = p2; q1 = q2;
    double rest = v - a;
    if (rest < 1e-12) break;
    v = 1.0 / rest;
  }
  return Rational(p1, q1);
}

}  // namespace ecol
