#include "sensaudit/inference.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include <map>
#include <numeric>

namespace sensaudit {

void NullSpec::validate() const {
  if (alpha <= 0 || alpha >= 1) throw std::invalid_argument("alpha must lie in (0,1)");
  if (enumeration_cap <= 0) throw std::invalid_argument("enumeration cap must be positive");
  if (null_kind == NullKind::Weak && method == DecisionMethod::ExactEnumeration)
    throw std::invalid_argument(
        "exact-enumeration decisions apply to the sharp null only; use the chi-square method for "
        "the weak null");
}

namespace {

void check_length(const StratifiedExperiment& exp, const OutcomeVector& y) {
  if (static_cast<long>(y.size()) != exp.total_subjects())
    throw std::invalid_argument("outcome vector length does not match the experiment");
}

// Per-stratum counts of true positives by arm.
struct ArmCounts {
  long a = 0;  // treated positives
  long c = 0;  // control positives
};

std::vector<ArmCounts> arm_counts(const StratifiedExperiment& exp, const OutcomeVector& y) {
  std::vector<ArmCounts> out(exp.num_strata());
  for (long i = 0; i < exp.num_strata(); ++i) {
    const Stratum& s = exp.stratum(i);
    const long off = exp.offset(i);
    for (long j = 0; j < s.n(); ++j) {
      if (!y[off + j]) continue;
      s.treated[j] ? ++out[i].a : ++out[i].c;
    }
  }
  return out;
}

}  // namespace

Rational mh_statistic(const StratifiedExperiment& exp, const OutcomeVector& y) {
  check_length(exp, y);
  long t = 0;
  for (long i = 0; i < exp.num_strata(); ++i) {
    const Stratum& s = exp.stratum(i);
    const long off = exp.offset(i);
    for (long j = 0; j < s.n(); ++j)
      if (s.treated[j] && y[off + j]) ++t;
  }
  return Rational(t);
}

std::pair<Rational, Rational> mh_moments(const StratifiedExperiment& exp, const OutcomeVector& y) {
  check_length(exp, y);
  Rational e = 0, var = 0;
  const auto counts = arm_counts(exp, y);
  for (long i = 0; i < exp.num_strata(); ++i) {
    const long n = exp.stratum(i).n();
    const long m = exp.stratum(i).m();
    const long t = counts[i].a + counts[i].c;
    e += Rational(BigInt(m) * t, BigInt(n));
    var += Rational(BigInt(m) * t * (n - t) * (n - m), BigInt(n) * n * (n - 1));
  }
  return {e, var};
}

TestDecision mh_decision(const StratifiedExperiment& exp, const OutcomeVector& y,
                         const Rational& alpha) {
  const Rational t = mh_statistic(exp, y);
  const auto [e, var] = mh_moments(exp, y);
  TestDecision d;
  d.threshold = chisq_quantile(alpha);
  if (var == 0) {
    d.degenerate = true;
    return d;
  }
  d.statistic = (t - e) * (t - e) / var;
  d.reject = d.statistic > d.threshold;
  return d;
}

Rational neyman_statistic(const StratifiedExperiment& exp, const OutcomeVector& y) {
  check_length(exp, y);
  const auto counts = arm_counts(exp, y);
  const long N = exp.total_subjects();
  Rational t = 0;
  for (long i = 0; i < exp.num_strata(); ++i) {
    const long n = exp.stratum(i).n();
    const long m = exp.stratum(i).m();
    t += Rational(BigInt(n), BigInt(N)) *
         (Rational(counts[i].a, m) - Rational(counts[i].c, n - m));
  }
  return t;
}

Rational neyman_varhat(const StratifiedExperiment& exp, const OutcomeVector& y) {
  check_length(exp, y);
  const auto counts = arm_counts(exp, y);
  const long N = exp.total_subjects();
  Rational v = 0;
  for (long i = 0; i < exp.num_strata(); ++i) {
    const long n = exp.stratum(i).n();
    const long m = exp.stratum(i).m();
    if (m < 2 || n - m < 2)
      throw std::invalid_argument("stratum '" + exp.stratum(i).label +
                                  "': the plug-in variance needs at least 2 subjects per arm");
    const long a = counts[i].a;
    const long c = counts[i].c;
    // Binary outcomes give sample variances a(m-a)/(m(m-1)) and c(k-c)/(k(k-1)).
    const Rational st2_over_m(BigInt(a) * (m - a), BigInt(m) * m * (m - 1));
    const long k = n - m;
    const Rational sc2_over_k(BigInt(c) * (k - c), BigInt(k) * k * (k - 1));
    v += Rational(BigInt(n) * n, BigInt(N) * N) * (st2_over_m + sc2_over_k);
  }
  return v;
}

TestDecision neyman_decision(const StratifiedExperiment& exp, const OutcomeVector& y,
                             const Rational& alpha) {
  const Rational t = neyman_statistic(exp, y);
  const Rational var = neyman_varhat(exp, y);
  TestDecision d;
  d.threshold = chisq_quantile(alpha);
  if (var == 0) {
    d.degenerate = true;
    return d;
  }
  d.statistic = t * t / var;
  d.reject = d.statistic > d.threshold;
  return d;
}

Rational exact_randomization_pvalue(const StratifiedExperiment& exp, const OutcomeVector& y,
                                    Sidedness sidedness, const BigInt& cap) {
  check_length(exp, y);
  BigInt total = 1;
  for (const Stratum& s : exp.strata()) {
    total *= binomial(s.n(), s.m());
    if (total > cap)
      throw std::invalid_argument("assignment space exceeds the enumeration cap (" + cap.str() +
                                  ")");
  }

  const auto counts = arm_counts(exp, y);
  // Distribution of T = sum of per-stratum hypergeometric draws, as counts
  // over the assignment space.
  std::map<long, BigInt> dist;
  dist[0] = 1;
  for (long i = 0; i < exp.num_strata(); ++i) {
    const long n = exp.stratum(i).n();
    const long m = exp.stratum(i).m();
    const long t = counts[i].a + counts[i].c;
    std::map<long, BigInt> next;
    for (long a = std::max(0L, m - (n - t)); a <= std::min(m, t); ++a) {
      const BigInt w = binomial(t, a) * binomial(n - t, m - a);
      if (w == 0) continue;
      for (const auto& [sum, cnt] : dist) next[sum + a] += cnt * w;
    }
    dist.swap(next);
  }

  const long t_obs = static_cast<long>(rat_num(mh_statistic(exp, y)));
  BigInt tail = 0;
  if (sidedness == Sidedness::OneSidedUpper) {
    for (const auto& [sum, cnt] : dist)
      if (sum >= t_obs) tail += cnt;
  } else {
    const Rational e = mh_moments(exp, y).first;
    const BigInt d = rat_den(e);
    const BigInt e_scaled = rat_num(e);
    const BigInt obs_dev = abs(BigInt(t_obs) * d - e_scaled);
    for (const auto& [sum, cnt] : dist)
      if (abs(BigInt(sum) * d - e_scaled) >= obs_dev) tail += cnt;
  }
  return Rational(tail, total);
}

Rational chisq_quantile(const Rational& alpha) {
  if (alpha <= 0 || alpha >= 1) throw std::invalid_argument("alpha must lie in (0,1)");
  using Float50 = boost::multiprecision::cpp_bin_float_50;
  const boost::math::chi_squared_distribution<Float50> dist(1);
  const Float50 a(Rational(alpha).convert_to<Float50>());
  const Float50 q = boost::math::quantile(dist, 1 - a);
  // Rationalize at a fixed scale of 18 fractional digits.
  BigInt scale = 1;
  for (int i = 0; i < 18; ++i) scale *= 10;
  const Float50 scaled = q * Float50(scale.str()) + Float50(0.5);
  const BigInt num(scaled.convert_to<BigInt>());
  return Rational(num, scale);
}

bool decide(const StratifiedExperiment& exp, const OutcomeVector& y, const NullSpec& spec) {
  spec.validate();
  if (spec.method == DecisionMethod::ChiSquare) {
    return spec.null_kind == NullKind::Sharp ? mh_decision(exp, y, spec.alpha).reject
                                             : neyman_decision(exp, y, spec.alpha).reject;
  }
  const Rational p = exact_randomization_pvalue(exp, y, spec.sidedness, spec.enumeration_cap);
  return p <= spec.alpha;
}

}  // namespace sensaudit
