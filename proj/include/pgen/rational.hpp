#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <charconv>
#include <cstdint>
#include <string>

#include "pgen/errors.hpp"

namespace pgen {

// Exact arithmetic backing for measures and word statistics.
// cpp_int / cpp_rational are header-only arbitrary precision types;
// values cross into double only at explicitly documented comparison points.
using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline BigInt big_pow(std::uint64_t base, std::uint64_t exp) {
  BigInt r = 1, b = base;
  while (exp) {
    if (exp & 1) r *= b;
    b *= b;
    exp >>= 1;
  }
  return r;
}

// base^exp as int64, throwing resource_error once the value leaves the
// range where word codes and interval indices stay machine-sized.
inline std::int64_t checked_pow64(std::uint64_t base, std::uint64_t exp,
                                  std::int64_t limit = (std::int64_t{1} << 62)) {
  std::int64_t r = 1;
  for (std::uint64_t i = 0; i < exp; ++i) {
    if (r > limit / static_cast<std::int64_t>(base))
      throw resource_error("power " + std::to_string(base) + "^" + std::to_string(exp) +
                           " exceeds the machine-word budget");
    r *= static_cast<std::int64_t>(base);
  }
  return r;
}

// floor of a rational, exact; valid for negative values too.
inline BigInt floor_rational(const Rational& r) {
  BigInt num = boost::multiprecision::numerator(r);
  BigInt den = boost::multiprecision::denominator(r);  // > 0 canonically
  BigInt q = num / den;                                // truncates toward zero
  if (num < 0 && q * den != num) --q;
  return q;
}

// Truncated decimal rendering of an exact rational; a convenience field
// next to exact num/den pairs, never used in comparisons.
inline std::string decimal_string(const Rational& r, unsigned digits = 12) {
  if (r == 0) return "0";
  Rational a = r < 0 ? Rational(-r) : r;
  BigInt num = boost::multiprecision::numerator(a);
  BigInt den = boost::multiprecision::denominator(a);
  BigInt ip = num / den;
  BigInt rem = num % den;
  std::string s = r < 0 ? "-" : "";
  s += ip.str();
  if (rem != 0) {
    s += '.';
    for (unsigned i = 0; i < digits && rem != 0; ++i) {
      rem *= 10;
      s += static_cast<char>('0' + (rem / den).convert_to<int>());
      rem %= den;
    }
  }
  return s;
}

// Parses "p/q", "p", or a plain decimal like "1.25" into an exact rational.
inline Rational parse_rational(const std::string& text) {
  if (text.empty()) throw precondition_error("empty rational literal");
  auto parse_int = [](const std::string& s) -> BigInt {
    if (s.empty() || (!isdigit(static_cast<unsigned char>(s[0])) && s[0] != '-'))
      throw precondition_error("bad integer literal '" + s + "'");
    for (size_t i = 1; i < s.size(); ++i)
      if (!isdigit(static_cast<unsigned char>(s[i])))
        throw precondition_error("bad integer literal '" + s + "'");
    return BigInt(s);
  };
  auto slash = text.find('/');
  if (slash != std::string::npos) {
    BigInt p = parse_int(text.substr(0, slash));
    BigInt q = parse_int(text.substr(slash + 1));
    if (q == 0) throw precondition_error("zero denominator in '" + text + "'");
    return Rational(p, q);
  }
  auto dot = text.find('.');
  if (dot != std::string::npos) {
    std::string ip = text.substr(0, dot), fp = text.substr(dot + 1);
    if (fp.empty()) throw precondition_error("bad decimal literal '" + text + "'");
    BigInt scale = big_pow(10, fp.size());
    bool neg = !ip.empty() && ip[0] == '-';
    BigInt whole = ip.empty() || ip == "-" ? BigInt(0) : parse_int(ip);
    BigInt frac = parse_int(fp);
    BigInt num = (neg ? -1 : 1) * ((neg ? -whole : whole) * scale + frac);
    return Rational(num, scale);
  }
  return Rational(parse_int(text));
}

}  // namespace pgen
