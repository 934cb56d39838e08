#pragma once

#include "sensaudit/experiment.hpp"
#include "sensaudit/rational.hpp"

namespace sensaudit {

enum class NullKind { Sharp, Weak };
enum class DecisionMethod { ChiSquare, ExactEnumeration };
enum class Sidedness { OneSidedUpper, TwoSided };

struct NullSpec {
  NullKind null_kind = NullKind::Sharp;
  Rational alpha = Rational(1, 20);
  DecisionMethod method = DecisionMethod::ChiSquare;
  Sidedness sidedness = Sidedness::OneSidedUpper;  // ExactEnumeration only
  BigInt enumeration_cap = 1000000;                // cap on |Z| = prod C(n_i, m_i)

  void validate() const;
};

// Chi-square style decision. `statistic` is the squared standardized value,
// compared against the rationalized chi-square critical value; rejection is
// strict (statistic > threshold). Zero null variance sets `degenerate` and
// yields Accept.
struct TestDecision {
  Rational statistic;
  Rational threshold;
  bool reject = false;
  bool degenerate = false;
};

Rational mh_statistic(const StratifiedExperiment& exp, const OutcomeVector& y);
// (E, Var) of the Mantel-Haenszel statistic under the sharp null.
std::pair<Rational, Rational> mh_moments(const StratifiedExperiment& exp, const OutcomeVector& y);
TestDecision mh_decision(const StratifiedExperiment& exp, const OutcomeVector& y,
                         const Rational& alpha);

Rational neyman_statistic(const StratifiedExperiment& exp, const OutcomeVector& y);
// Conservative plug-in variance; requires m_i >= 2 and n_i - m_i >= 2.
Rational neyman_varhat(const StratifiedExperiment& exp, const OutcomeVector& y);
TestDecision neyman_decision(const StratifiedExperiment& exp, const OutcomeVector& y,
                             const Rational& alpha);

// Exact randomization p-value of the MH statistic over the uniform
// stratified assignment distribution. Denominator is prod C(n_i, m_i).
Rational exact_randomization_pvalue(const StratifiedExperiment& exp, const OutcomeVector& y,
                                    Sidedness sidedness, const BigInt& cap = 1000000);

// Rationalized 1-alpha quantile of chi-square(1), accurate to >= 12 decimal
// digits (fixed at 18 fractional digits); deterministic.
Rational chisq_quantile(const Rational& alpha);

// Unified level-alpha decision used throughout the audit pipeline: true = Reject.
bool decide(const StratifiedExperiment& exp, const OutcomeVector& y, const NullSpec& spec);

}  // namespace sensaudit
