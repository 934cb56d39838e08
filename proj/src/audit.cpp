#include "sensaudit/audit.hpp"

#include <cmath>
#include <random>

namespace sensaudit {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t replication_seed(std::uint64_t seed, std::uint64_t replication) {
  std::uint64_t s = seed;
  std::uint64_t h = splitmix64(s);
  s = h ^ (0x9E3779B97F4A7C15ULL * (replication + 1));
  return splitmix64(s);
}

std::vector<SubjectRef> sensitive_set(const StratifiedExperiment& exp,
                                      const OutcomeVector& witness) {
  if (static_cast<long>(witness.size()) != exp.total_subjects())
    throw std::invalid_argument("witness length does not match the experiment");
  std::vector<SubjectRef> out;
  for (long i = 0; i < exp.num_strata(); ++i) {
    const Stratum& s = exp.stratum(i);
    const long off = exp.offset(i);
    for (long j = 0; j < s.n(); ++j)
      if (witness[off + j] != s.outcome[j])
        out.push_back(SubjectRef{i, s.label, j, s.source_row[j]});
  }
  return out;
}

SensitivityWeights sensitivity_weights(const StratifiedExperiment& exp,
                                       const OutcomeVector& witness) {
  if (static_cast<long>(witness.size()) != exp.total_subjects())
    throw std::invalid_argument("witness length does not match the experiment");
  long t_fp = 0, t_fn = 0, c_fp = 0, c_fn = 0;
  for (long i = 0; i < exp.num_strata(); ++i) {
    const Stratum& s = exp.stratum(i);
    const long off = exp.offset(i);
    for (long j = 0; j < s.n(); ++j) {
      if (witness[off + j] == s.outcome[j]) continue;
      if (s.treated[j])
        s.outcome[j] ? ++t_fp : ++t_fn;
      else
        s.outcome[j] ? ++c_fp : ++c_fn;
    }
  }
  const long total = t_fp + t_fn + c_fp + c_fn;
  if (total == 0) throw std::invalid_argument("witness equals the measured outcomes");
  return SensitivityWeights{Rational(t_fp, total), Rational(t_fn, total), Rational(c_fp, total),
                            Rational(c_fn, total)};
}

StratifiedExperiment replace_outcomes(const StratifiedExperiment& exp, const OutcomeVector& y) {
  if (static_cast<long>(y.size()) != exp.total_subjects())
    throw std::invalid_argument("outcome vector length does not match the experiment");
  std::vector<Stratum> strata;
  strata.reserve(exp.num_strata());
  for (long i = 0; i < exp.num_strata(); ++i) {
    Stratum s = exp.stratum(i);
    const long off = exp.offset(i);
    for (long j = 0; j < s.n(); ++j) s.outcome[j] = y[off + j];
    strata.push_back(std::move(s));
  }
  return StratifiedExperiment(std::move(strata));
}

namespace {

// Writes the true outcomes of one stratum from its Upsilon counts, altering
// the lowest-index eligible subjects of each (Z, Y*) cell.
void decode_stratum(const Stratum& s, const std::array<long, 4>& cells, OutcomeVector& y,
                    long offset) {
  long want_pos[2][2];  // [z][y*]: how many of that cell get true outcome 1
  want_pos[0][0] = cells[0];
  want_pos[0][1] = cells[1];
  want_pos[1][0] = cells[2];
  want_pos[1][1] = cells[3];
  // Cells with Y*=0: the first `want` subjects are altered to 1.
  // Cells with Y*=1: alterations are flips to 0, so the first
  // (cell_size - want) subjects are altered and the rest keep 1.
  long cell_size[2][2] = {{0, 0}, {0, 0}};
  for (long j = 0; j < s.n(); ++j) ++cell_size[s.treated[j]][s.outcome[j]];
  long altered_budget[2][2];
  altered_budget[0][0] = want_pos[0][0];
  altered_budget[1][0] = want_pos[1][0];
  altered_budget[0][1] = cell_size[0][1] - want_pos[0][1];
  altered_budget[1][1] = cell_size[1][1] - want_pos[1][1];
  for (long j = 0; j < s.n(); ++j) {
    const int z = s.treated[j], ys = s.outcome[j];
    if (altered_budget[z][ys] > 0) {
      y[offset + j] = ys ? 0 : 1;
      --altered_budget[z][ys];
    } else {
      y[offset + j] = ys;
    }
  }
}

}  // namespace

OutcomeVector decode_witness(const StratifiedExperiment& exp, const IqclpProblem& problem,
                             const std::vector<BigInt>& assignment) {
  if (static_cast<long>(assignment.size()) != problem.num_vars)
    throw std::invalid_argument("assignment has wrong dimension");
  OutcomeVector y(exp.total_subjects(), 0);
  if (!problem.aggregate) throw std::invalid_argument("problem carries no group metadata");

  for (const SolveGroup& g : problem.aggregate->groups) {
    const bool is_delta =
        !g.var_indices.empty() && problem.var_meta[g.var_indices[0]].kind == VarMeta::Kind::ClassDelta;
    if (!is_delta) {
      const long i = g.strata.at(0);
      const std::array<long, 4> cells{
          static_cast<long>(assignment[g.var_indices[0]]),
          static_cast<long>(assignment[g.var_indices[1]]),
          static_cast<long>(assignment[g.var_indices[2]]),
          static_cast<long>(assignment[g.var_indices[3]])};
      decode_stratum(exp.stratum(i), cells, y, exp.offset(i));
    } else {
      // Expand multiplicities in ascending delta order onto the class's
      // strata in input order.
      std::vector<std::array<long, 4>> tables;
      for (long v : g.var_indices) {
        const long count = static_cast<long>(assignment[v]);
        const DeltaTable& d = problem.var_meta[v].delta;
        for (long k = 0; k < count; ++k) tables.push_back({d.d00, d.d01, d.d10, d.d11});
      }
      if (tables.size() != g.strata.size())
        throw std::invalid_argument("class multiplicities do not cover its strata");
      for (std::size_t k = 0; k < tables.size(); ++k) {
        const long i = g.strata[k];
        decode_stratum(exp.stratum(i), tables[k], y, exp.offset(i));
      }
    }
  }
  return y;
}

namespace {

FormulationKind pick_formulation(DesignType type, NullKind kind) {
  if (kind == NullKind::Sharp)
    return type == DesignType::TypeI ? FormulationKind::P1 : FormulationKind::P2;
  return type == DesignType::TypeI ? FormulationKind::P3 : FormulationKind::P4;
}

}  // namespace

AnalysisReport warning_accuracy(const StratifiedExperiment& exp, const NullSpec& spec,
                                const AuditOptions& options) {
  spec.validate();
  AnalysisReport report;
  report.spec = spec;
  report.symmetry = symmetry_diagnostics(exp);
  const OutcomeVector measured = exp.measured_outcomes();

  if (spec.method == DecisionMethod::ChiSquare) {
    report.measured_test = spec.null_kind == NullKind::Sharp
                               ? mh_decision(exp, measured, spec.alpha)
                               : neyman_decision(exp, measured, spec.alpha);
    report.measured_reject = report.measured_test->reject;
  } else {
    report.p_value = exact_randomization_pvalue(exp, measured, spec.sidedness,
                                                spec.enumeration_cap);
    report.measured_reject = *report.p_value <= spec.alpha;
  }

  if (spec.method == DecisionMethod::ExactEnumeration) {
    report.formulation_used = FormulationKind::BruteForce;
    const auto t0 = std::chrono::steady_clock::now();
    const OracleResult oracle = brute_force_wa(exp, spec, options.oracle_cap);
    report.solver.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                                .count();
    report.solver.nodes = static_cast<std::uint64_t>(oracle.candidates_checked);
    report.solver.status = oracle.overturnable ? SolveStatus::Optimal : SolveStatus::Infeasible;
    report.overturnable = oracle.overturnable;
    if (oracle.overturnable) {
      report.warning_accuracy = oracle.warning_accuracy;
      report.witness = oracle.witness;
    }
  } else {
    IqclpProblem problem;
    switch (pick_formulation(report.symmetry.type, spec.null_kind)) {
      case FormulationKind::P1:
        problem = build_p1(exp, spec.alpha);
        break;
      case FormulationKind::P2:
        problem = build_p2(exp, spec.alpha, build_unique_table_index(exp));
        break;
      case FormulationKind::P3:
        problem = build_p3(exp, spec.alpha);
        break;
      default:
        problem = build_p4(exp, spec.alpha, build_unique_table_index(exp));
        break;
    }
    report.formulation_used = problem.formulation;
    const SolveResult sol = solve(problem, options.budget);
    report.solver.status = sol.status;
    report.solver.bound_only = sol.bound_only;
    report.solver.nodes = sol.nodes_explored;
    report.solver.seconds = sol.wall_time.count();
    if (sol.status == SolveStatus::Infeasible) {
      report.overturnable = false;
    } else if (!sol.assignment.empty()) {
      report.overturnable = true;
      report.bound_only = sol.bound_only;
      report.warning_accuracy = sol.objective;
      report.witness = decode_witness(exp, problem, sol.assignment);
    } else {
      // budget ran out before any incumbent
      report.overturnable = false;
      report.bound_only = true;
    }
  }

  if (report.overturnable && !report.witness.empty()) {
    const Rational wa = accuracy(measured, report.witness);
    if (*report.warning_accuracy != wa)
      throw std::logic_error("witness accuracy disagrees with the solver objective");
    report.minimal_alteration_number = alteration_count(measured, report.witness);
    report.sensitive_set = sensitive_set(exp, report.witness);
    if (!report.sensitive_set.empty())
      report.weights = sensitivity_weights(exp, report.witness);
    if (!report.bound_only) {
      const bool witness_reject = decide(exp, report.witness, spec);
      if (witness_reject == report.measured_reject)
        throw std::logic_error("optimal witness does not overturn the measured decision");
    }
  }
  return report;
}

DesignAccuracyResult design_accuracy(const StratifiedExperiment& design, const Rational& p0,
                                     const Rational& p1, const NullSpec& spec, long replications,
                                     std::uint64_t seed, const AuditOptions& options,
                                     bool exclude_flagged) {
  if (p0 < 0 || p0 > 1 || p1 < 0 || p1 > 1)
    throw std::invalid_argument("effect-size probabilities must lie in [0,1]");
  if (replications < 1) throw std::invalid_argument("replications must be at least 1");
  spec.validate();

  DesignAccuracyResult res;
  res.replications = replications;
  res.seed = seed;
  res.per_replication.reserve(replications);
  res.flagged.assign(replications, 0);

  // Threshold draws: u64 < floor(p * 2^64); p = 1 always fires.
  auto threshold = [](const Rational& p) -> std::pair<bool, std::uint64_t> {
    if (p >= 1) return {true, 0};
    const BigInt t = rat_num(p) * (BigInt(1) << 64) / rat_den(p);
    return {false, t.convert_to<std::uint64_t>()};
  };
  const auto [always0, thr0] = threshold(p0);
  const auto [always1, thr1] = threshold(p1);

  const auto z = design.treatment_indicators();
  const long N = design.total_subjects();

  for (long rep = 0; rep < replications; ++rep) {
    std::mt19937_64 rng(replication_seed(seed, rep));
    OutcomeVector y(N);
    for (long j = 0; j < N; ++j) {
      const std::uint64_t u = rng();
      if (z[j])
        y[j] = always1 || u < thr1;
      else
        y[j] = always0 || u < thr0;
    }
    const StratifiedExperiment drawn = replace_outcomes(design, y);
    const AnalysisReport inner = warning_accuracy(drawn, spec, options);
    Rational value = 0;
    if (inner.overturnable && inner.warning_accuracy) value = *inner.warning_accuracy;
    if (inner.bound_only) {
      res.flagged[rep] = 1;
      ++res.flagged_count;
    }
    res.per_replication.push_back(value);
  }

  Rational sum = 0;
  long used = 0;
  double mean_d = 0;
  std::vector<double> vals;
  vals.reserve(replications);
  for (long rep = 0; rep < replications; ++rep) {
    if (exclude_flagged && res.flagged[rep]) continue;
    sum += res.per_replication[rep];
    vals.push_back(to_double(res.per_replication[rep]));
    ++used;
  }
  if (used == 0) throw std::invalid_argument("all replications exceeded the solver budget");
  res.exact_mean = sum / used;
  res.estimate = to_double(res.exact_mean);
  mean_d = res.estimate;
  if (used > 1) {
    double ss = 0;
    for (double v : vals) ss += (v - mean_d) * (v - mean_d);
    res.monte_carlo_stderr = std::sqrt(ss / (static_cast<double>(used) * (used - 1)));
  }
  return res;
}

MisclassificationTable expected_misclassification_table(
    long n_treated, long n_control, const Rational& p_t1, const Rational& p_t0,
    const Rational& p_c1, const Rational& p_c0, const Rational& pi_t_fp, const Rational& pi_t_fn,
    const Rational& pi_c_fp, const Rational& pi_c_fn) {
  for (const Rational* p : {&p_t1, &p_t0, &p_c1, &p_c0, &pi_t_fp, &pi_t_fn, &pi_c_fp, &pi_c_fn})
    if (*p < 0 || *p > 1) throw std::invalid_argument("proportions must lie in [0,1]");
  if (p_t1 + p_t0 != 1 || p_c1 + p_c0 != 1)
    throw std::invalid_argument("per-arm outcome proportions must sum to 1");
  if (n_treated < 0 || n_control < 0) throw std::invalid_argument("counts must be non-negative");
  return MisclassificationTable{
      n_treated * p_t0 * pi_t_fp,
      n_treated * p_t1 * pi_t_fn,
      n_control * p_c0 * pi_c_fp,
      n_control * p_c1 * pi_c_fn,
  };
}

}  // namespace sensaudit
