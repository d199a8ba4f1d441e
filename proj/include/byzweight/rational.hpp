#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cctype>
#include <string>
#include <string_view>

#include "byzweight/error.hpp"

namespace byzweight {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline BigInt floor_div(const BigInt& num, const BigInt& den) {
  BigInt q = num / den;  // truncates toward zero
  if ((num % den != 0) && ((num < 0) != (den < 0))) --q;
  return q;
}

inline BigInt floor(const Rational& x) {
  return floor_div(boost::multiprecision::numerator(x),
                   boost::multiprecision::denominator(x));
}

inline BigInt ceil(const Rational& x) { return -floor(-x); }

// Parses "0.125", "3", "-1.5", "1/8" or "2e-1" into an exact rational.
// Decimal input is taken literally (0.1 is 1/10, not the nearest double).
inline Rational parse_rational(std::string_view text) {
  auto bad = [&] {
    fail(ErrorCode::ParseError, "not a rational number: '" + std::string(text) + "'");
  };
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  if (text.empty()) bad();

  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    Rational num = parse_rational(text.substr(0, slash));
    Rational den = parse_rational(text.substr(slash + 1));
    if (den == 0) bad();
    return num / den;
  }

  bool negative = false;
  if (text.front() == '+' || text.front() == '-') {
    negative = text.front() == '-';
    text.remove_prefix(1);
  }
  BigInt mantissa = 0;
  long long scale = 0;
  bool seen_digit = false;
  bool seen_point = false;
  std::size_t i = 0;
  for (; i < text.size(); ++i) {
    char c = text[i];
    if (c >= '0' && c <= '9') {
      mantissa = mantissa * 10 + (c - '0');
      if (seen_point) --scale;
      seen_digit = true;
    } else if (c == '.' && !seen_point) {
      seen_point = true;
    } else {
      break;
    }
  }
  if (!seen_digit) bad();
  if (i < text.size()) {
    if (text[i] != 'e' && text[i] != 'E') bad();
    std::string exponent(text.substr(i + 1));
    if (exponent.empty()) bad();
    std::size_t used = 0;
    long long e = 0;
    try {
      e = std::stoll(exponent, &used);
    } catch (const std::exception&) {
      bad();
    }
    if (used != exponent.size()) bad();
    scale += e;
  }
  Rational value(mantissa);
  BigInt ten = boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(scale < 0 ? -scale : scale));
  if (scale < 0) value /= ten;
  else value *= ten;
  return negative ? -value : value;
}

// Fixed-point decimal with `digits` fractional digits, rounded half away
// from zero. Locale-independent.
inline std::string to_decimal(const Rational& x, unsigned digits) {
  BigInt scale = boost::multiprecision::pow(BigInt(10), digits);
  Rational scaled = (x < 0 ? -x : x) * scale;
  BigInt rounded = floor(scaled + Rational(1, 2));
  std::string whole = BigInt(rounded / scale).str();
  std::string frac = BigInt(rounded % scale).str();
  std::string out = (x < 0 && rounded != 0) ? "-" : "";
  out += whole;
  if (digits > 0) {
    out += '.';
    out += std::string(digits - frac.size(), '0') + frac;
  }
  return out;
}

inline double to_double(const Rational& x) { return x.convert_to<double>(); }

}  // namespace byzweight
