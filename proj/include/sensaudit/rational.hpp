#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <stdexcept>
#include <string>

namespace sensaudit {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline BigInt rat_num(const Rational& r) { return boost::multiprecision::numerator(r); }
inline BigInt rat_den(const Rational& r) { return boost::multiprecision::denominator(r); }

// Parses "3", "-0.25", "1/20" into an exact rational.
Rational parse_rational(const std::string& text);

// Fixed-point decimal rendering, round-half-away-from-zero.
std::string decimal_string(const Rational& r, int digits = 10);

double to_double(const Rational& r);

BigInt binomial(const BigInt& n, const BigInt& k);

}  // namespace sensaudit
