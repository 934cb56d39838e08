#include "sensaudit/rational.hpp"

#include <cctype>

namespace sensaudit {

Rational parse_rational(const std::string& text) {
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
  if (s.empty()) throw std::invalid_argument("empty rational literal");

  auto slash = s.find('/');
  if (slash != std::string::npos) {
    BigInt num(s.substr(0, slash));
    BigInt den(s.substr(slash + 1));
    if (den == 0) throw std::invalid_argument("zero denominator in '" + text + "'");
    return Rational(num, den);
  }

  bool neg = false;
  std::size_t pos = 0;
  if (s[0] == '+' || s[0] == '-') {
    neg = s[0] == '-';
    pos = 1;
  }
  std::string digits;
  int frac_digits = 0;
  bool seen_dot = false;
  for (; pos < s.size(); ++pos) {
    char c = s[pos];
    if (c == '.') {
      if (seen_dot) throw std::invalid_argument("malformed rational '" + text + "'");
      seen_dot = true;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      digits.push_back(c);
      if (seen_dot) ++frac_digits;
    } else {
      throw std::invalid_argument("malformed rational '" + text + "'");
    }
  }
  if (digits.empty()) throw std::invalid_argument("malformed rational '" + text + "'");
  // Leading zeros would read as an octal prefix.
  const auto first = digits.find_first_not_of('0');
  digits = first == std::string::npos ? "0" : digits.substr(first);
  BigInt num(digits);
  BigInt den = 1;
  for (int i = 0; i < frac_digits; ++i) den *= 10;
  if (neg) num = -num;
  return Rational(num, den);
}

std::string decimal_string(const Rational& r, int digits) {
  BigInt scale = 1;
  for (int i = 0; i < digits; ++i) scale *= 10;
  BigInt num = rat_num(r) * scale;
  BigInt den = rat_den(r);
  bool neg = num < 0;
  if (neg) num = -num;
  BigInt q = num / den;
  BigInt rem = num % den;
  if (2 * rem >= den) ++q;  // round half away from zero

  std::string body = q.str();
  if (static_cast<int>(body.size()) <= digits)
    body.insert(0, std::string(digits + 1 - body.size(), '0'));
  std::string out = body.substr(0, body.size() - digits);
  if (digits > 0) out += "." + body.substr(body.size() - digits);
  if (neg && (q != 0)) out.insert(0, "-");
  return out;
}

double to_double(const Rational& r) { return static_cast<double>(r); }

BigInt binomial(const BigInt& n, const BigInt& k) {
  if (k < 0 || k > n) return 0;
  BigInt kk = k;
  if (n - k < kk) kk = n - k;
  BigInt result = 1;
  for (BigInt i = 1; i <= kk; ++i) {
    result *= n - kk + i;
    result /= i;
  }
  return result;
}

}  // namespace sensaudit
