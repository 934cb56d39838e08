#include "sensaudit/cli.hpp"

#include "sensaudit/report_json.hpp"

#include <fstream>
#include <iostream>

namespace sensaudit {

namespace {

NullSpec make_spec(const RunConfig& c) {
  NullSpec spec;
  if (c.null_kind == "sharp") spec.null_kind = NullKind::Sharp;
  else if (c.null_kind == "weak") spec.null_kind = NullKind::Weak;
  else throw std::invalid_argument("--null must be 'sharp' or 'weak'");
  if (c.method == "chisq") spec.method = DecisionMethod::ChiSquare;
  else if (c.method == "exact") spec.method = DecisionMethod::ExactEnumeration;
  else throw std::invalid_argument("--method must be 'chisq' or 'exact'");
  if (c.sided == "one") spec.sidedness = Sidedness::OneSidedUpper;
  else if (c.sided == "two") spec.sidedness = Sidedness::TwoSided;
  else throw std::invalid_argument("--sided must be 'one' or 'two'");
  spec.alpha = c.alpha;
  spec.enumeration_cap = c.enum_cap;
  spec.validate();
  return spec;
}

AuditOptions make_options(const RunConfig& c) {
  AuditOptions opt;
  opt.budget.max_nodes = c.budget_nodes;
  opt.budget.max_time =
      std::chrono::milliseconds(static_cast<long long>(c.budget_seconds * 1000.0));
  opt.oracle_cap = c.oracle_cap;
  return opt;
}

void emit(const RunConfig& c, const nlohmann::json& j) {
  if (c.output.empty() || c.output == "-") {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream out(c.output);
  if (!out) throw std::invalid_argument("cannot write '" + c.output + "'");
  out << j.dump(2) << "\n";
}

int run_analyze(const RunConfig& c) {
  const StratifiedExperiment exp = load_experiment_file(c.input);
  const NullSpec spec = make_spec(c);
  const AnalysisReport report = warning_accuracy(exp, spec, make_options(c));
  nlohmann::json j = analysis_json(report);
  j["command"] = "analyze";
  j["input"] = c.input;
  emit(c, j);
  return report.bound_only || report.solver.status == SolveStatus::BudgetExceeded ? 3 : 0;
}

int run_pvalue(const RunConfig& c) {
  const StratifiedExperiment exp = load_experiment_file(c.input);
  const NullSpec spec = make_spec(c);
  const OutcomeVector measured = exp.measured_outcomes();
  nlohmann::json j;
  j["schema_version"] = 1;
  j["command"] = "pvalue";
  j["input"] = c.input;
  j["alpha"] = rational_json(spec.alpha);
  j["null"] = c.null_kind;
  j["method"] = c.method;
  if (spec.method == DecisionMethod::ExactEnumeration) {
    j["sided"] = c.sided;
    const Rational p =
        exact_randomization_pvalue(exp, measured, spec.sidedness, spec.enumeration_cap);
    j["p_value"] = rational_json(p);
    j["decision"] = nlohmann::json{{"reject", p <= spec.alpha}};
  } else {
    const TestDecision d = spec.null_kind == NullKind::Sharp
                               ? mh_decision(exp, measured, spec.alpha)
                               : neyman_decision(exp, measured, spec.alpha);
    j["p_value"] = nullptr;
    j["p_value_note"] = "chi-square method reports the squared standardized statistic";
    nlohmann::json dec{{"reject", d.reject}, {"degenerate", d.degenerate},
                       {"threshold", rational_json(d.threshold)}};
    if (!d.degenerate) dec["statistic"] = rational_json(d.statistic);
    j["decision"] = dec;
  }
  emit(c, j);
  return 0;
}

int run_design(const RunConfig& c) {
  if (!c.p0_set || !c.p1_set)
    throw std::invalid_argument("design requires --p0 and --p1");
  const StratifiedExperiment design = load_experiment_file(c.input);
  const NullSpec spec = make_spec(c);
  const DesignAccuracyResult result =
      design_accuracy(design, c.p0, c.p1, spec, c.replications, c.seed, make_options(c));
  nlohmann::json j = design_json(result, c.p0, c.p1);
  j["command"] = "design";
  j["input"] = c.input;
  j["spec"] = nlohmann::json{{"null", c.null_kind}, {"method", c.method},
                             {"alpha", rational_json(c.alpha)}};
  emit(c, j);
  return result.flagged_count > 0 ? 3 : 0;
}

int run_oracle(const RunConfig& c) {
  const StratifiedExperiment exp = load_experiment_file(c.input);
  const NullSpec spec = make_spec(c);
  const OracleResult oracle = brute_force_wa(exp, spec, c.oracle_cap, /*collect_all=*/true);
  nlohmann::json j = oracle_json(exp, oracle);
  j["command"] = "oracle";
  j["input"] = c.input;
  j["spec"] = nlohmann::json{{"null", c.null_kind},
                             {"method", c.method},
                             {"sided", c.sided},
                             {"alpha", rational_json(spec.alpha)}};
  emit(c, j);
  return 0;
}

}  // namespace

int run(const RunConfig& config) {
  try {
    if (config.command == "analyze") return run_analyze(config);
    if (config.command == "pvalue") return run_pvalue(config);
    if (config.command == "design") return run_design(config);
    if (config.command == "oracle") return run_oracle(config);
    throw std::invalid_argument("unknown command '" + config.command + "'");
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace sensaudit
