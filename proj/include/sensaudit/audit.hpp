#pragma once

#include "sensaudit/solver.hpp"

#include <optional>

namespace sensaudit {

struct SensitivityWeights {
  Rational t_fp, t_fn, c_fp, c_fn;  // treated/control x false positive/negative
};

struct SubjectRef {
  long stratum_index = 0;
  std::string stratum_label;
  long subject_index = 0;  // 0-based within the stratum
  long row = 0;            // 1-based input row
};

struct SolverStatsSummary {
  SolveStatus status = SolveStatus::Optimal;
  bool bound_only = false;
  std::uint64_t nodes = 0;
  double seconds = 0;
};

struct AnalysisReport {
  NullSpec spec;
  bool measured_reject = false;
  std::optional<TestDecision> measured_test;  // chi-square method detail
  std::optional<Rational> p_value;            // exact method only
  FormulationKind formulation_used = FormulationKind::P1;
  SymmetryDiagnostics symmetry;
  bool overturnable = false;
  bool bound_only = false;  // solver budget ran out; value below is a bound only
  std::optional<Rational> warning_accuracy;
  std::optional<long> minimal_alteration_number;
  OutcomeVector witness;
  std::vector<SubjectRef> sensitive_set;
  std::optional<SensitivityWeights> weights;
  SolverStatsSummary solver;
};

struct AuditOptions {
  SolverBudget budget;
  int oracle_cap = 20;
};

AnalysisReport warning_accuracy(const StratifiedExperiment& exp, const NullSpec& spec,
                                const AuditOptions& options = {});

// Subjects where the witness disagrees with the measured outcomes.
std::vector<SubjectRef> sensitive_set(const StratifiedExperiment& exp,
                                      const OutcomeVector& witness);

// The four misclassification proportions of the sensitive set; they sum to 1.
SensitivityWeights sensitivity_weights(const StratifiedExperiment& exp,
                                       const OutcomeVector& witness);

// Decodes a solver assignment into a concrete true-outcome vector, assigning
// alterations to the lowest-index eligible subjects of each stratum.
OutcomeVector decode_witness(const StratifiedExperiment& exp, const IqclpProblem& problem,
                             const std::vector<BigInt>& assignment);

// Same treatment allocation, replaced outcomes.
StratifiedExperiment replace_outcomes(const StratifiedExperiment& exp, const OutcomeVector& y);

struct DesignAccuracyResult {
  double estimate = 0;
  Rational exact_mean;
  long replications = 0;
  std::vector<Rational> per_replication;  // 0 for not-overturnable draws
  std::vector<char> flagged;              // budget ran out on that replication
  long flagged_count = 0;
  std::uint64_t seed = 0;
  double monte_carlo_stderr = 0;
};

// Bernoulli(p0)/Bernoulli(p1) outcome draws by arm, seeded and reproducible;
// each draw's worst-case flipping accuracy is averaged.
DesignAccuracyResult design_accuracy(const StratifiedExperiment& design, const Rational& p0,
                                     const Rational& p1, const NullSpec& spec, long replications,
                                     std::uint64_t seed, const AuditOptions& options = {},
                                     bool exclude_flagged = false);

struct MisclassificationTable {
  Rational t_fp, t_fn, c_fp, c_fn;
};

MisclassificationTable expected_misclassification_table(
    long n_treated, long n_control, const Rational& p_t1, const Rational& p_t0,
    const Rational& p_c1, const Rational& p_c0, const Rational& pi_t_fp, const Rational& pi_t_fn,
    const Rational& pi_c_fp, const Rational& pi_c_fn);

// Deterministic per-replication generator seed (splitmix64 chain).
std::uint64_t replication_seed(std::uint64_t seed, std::uint64_t replication);

}  // namespace sensaudit
