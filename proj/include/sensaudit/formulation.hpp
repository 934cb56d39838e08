#pragma once

#include "sensaudit/inference.hpp"
#include "sensaudit/symmetry.hpp"

#include <optional>
#include <string>
#include <vector>

namespace sensaudit {

enum class QuadSense { LeqZero, GtZero };
enum class FormulationKind { P1, P2, P3, P4, BruteForce, Custom };

// Maps the measured decision to the constraint sense of the flip problem:
// overturning a rejection needs g <= 0, overturning an acceptance needs g > 0
// (strict, so the boundary point never counts as a flip).
struct FlipDirection {
  bool original_reject = false;
  QuadSense sense() const { return original_reject ? QuadSense::LeqZero : QuadSense::GtZero; }
};

struct VarMeta {
  enum class Kind { StratumComponent, ClassDelta };
  Kind kind = Kind::StratumComponent;
  long group = 0;      // stratum index, or class index
  long component = 0;  // component 0..3 (00,01,10,11), or delta index p
  DeltaTable delta;    // populated for ClassDelta
};

// beta * (sum of the listed variables)^2; the block corrections of Q1 beyond
// the rank-one part.
struct QuadAggregate {
  Rational beta;
  std::vector<long> vars;
};

struct LinearEquality {
  std::vector<long> vars;  // indicator vector support
  BigInt rhs;
};

// Per-group data the solver needs to rebuild the aggregate search model.
struct SolveGroup {
  long n = 0;
  long m = 0;
  StratumTable lambda;
  long multiplicity = 1;           // 1 per stratum (P1/P3); P_s per class (P2/P4)
  std::vector<long> strata;        // member stratum indices
  std::vector<long> var_indices;   // 4 component vars, or one var per delta table
};

struct AggregateStructure {
  NullKind null_kind = NullKind::Sharp;
  Rational chi2;
  long n_total = 0;
  std::vector<SolveGroup> groups;
};

// Standard form: maximize q'x + c subject to x'Q1x + q1'x {<= 0 | > 0},
// per-variable integer bounds, and indicator equalities. Q1 is stored in
// structured form Q1 = w w' + sum_j beta_j a_j a_j' with a_j indicator
// vectors; entries are recovered exactly by quad_matrix_entry.
struct IqclpProblem {
  FormulationKind formulation = FormulationKind::Custom;
  long num_vars = 0;
  std::vector<BigInt> lower, upper;
  std::vector<Rational> objective;
  Rational objective_const;
  std::vector<Rational> quad_rank1;  // w
  std::vector<QuadAggregate> quad_aggregates;
  std::vector<Rational> quad_linear;  // q1
  QuadSense quad_sense = QuadSense::LeqZero;
  std::vector<LinearEquality> equalities;
  std::vector<VarMeta> var_meta;
  std::optional<AggregateStructure> aggregate;

  Rational quad_matrix_entry(long r, long t) const;
  // x'Q1x + q1'x at a rational point (no validation).
  Rational quad_value(const std::vector<Rational>& x) const;
  // The non-rank-one part q1'x + sum_j beta_j (a_j'x)^2. For the built
  // problems this equals minus chi2 times the null variance, so it is zero
  // exactly at degenerate points.
  Rational variance_term_value(const std::vector<Rational>& x) const;
  Rational objective_value(const std::vector<BigInt>& x) const;
  bool sense_satisfied(const Rational& g) const {
    return quad_sense == QuadSense::LeqZero ? g <= 0 : g > 0;
  }
  // Whether the point's decision differs from the measured one. A degenerate
  // null variance decides Accept regardless of the statistic, so the reject
  // side additionally requires a nonzero variance term. (For the sharp null
  // zero variance forces g = 0 and this reduces to the plain sign test.)
  bool flip_achieved(const std::vector<BigInt>& x) const;
  void validate_point(const std::vector<BigInt>& x) const;  // bounds + equalities
};

IqclpProblem build_p1(const StratifiedExperiment& exp, const Rational& alpha);
IqclpProblem build_p2(const StratifiedExperiment& exp, const Rational& alpha,
                      const UniqueTableIndex& index);
IqclpProblem build_p3(const StratifiedExperiment& exp, const Rational& alpha);
IqclpProblem build_p4(const StratifiedExperiment& exp, const Rational& alpha,
                      const UniqueTableIndex& index);

// Exact g(x) after validating bounds and equalities.
Rational constraint_value(const IqclpProblem& problem, const std::vector<BigInt>& x);

// Text round-trip, used for debugging and solver replay tests.
std::string dump_problem(const IqclpProblem& problem);
IqclpProblem parse_problem(const std::string& text);

}  // namespace sensaudit
