#include "sensaudit/report_json.hpp"

namespace sensaudit {

using nlohmann::json;

json rational_json(const Rational& r) {
  return json{{"num", rat_num(r).str()}, {"den", rat_den(r).str()},
              {"decimal", decimal_string(r, 10)}};
}

std::string witness_string(const OutcomeVector& y) {
  std::string s;
  s.reserve(y.size());
  for (std::uint8_t v : y) s.push_back(v ? '1' : '0');
  return s;
}

namespace {

const char* formulation_name(FormulationKind f) {
  switch (f) {
    case FormulationKind::P1: return "p1";
    case FormulationKind::P2: return "p2";
    case FormulationKind::P3: return "p3";
    case FormulationKind::P4: return "p4";
    case FormulationKind::BruteForce: return "brute_force";
    case FormulationKind::Custom: return "custom";
  }
  return "custom";
}

const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::BudgetExceeded: return "budget_exceeded";
  }
  return "unknown";
}

json spec_json(const NullSpec& spec) {
  return json{
      {"null", spec.null_kind == NullKind::Sharp ? "sharp" : "weak"},
      {"alpha", rational_json(spec.alpha)},
      {"method", spec.method == DecisionMethod::ChiSquare ? "chisq" : "exact"},
      {"sided", spec.sidedness == Sidedness::OneSidedUpper ? "one" : "two"},
      {"enumeration_cap", spec.enumeration_cap.str()},
  };
}

json weights_json(const SensitivityWeights& w) {
  return json{
      {"treated_false_positive", rational_json(w.t_fp)},
      {"treated_false_negative", rational_json(w.t_fn)},
      {"control_false_positive", rational_json(w.c_fp)},
      {"control_false_negative", rational_json(w.c_fn)},
  };
}

json subjects_json(const std::vector<SubjectRef>& subjects) {
  json arr = json::array();
  for (const SubjectRef& s : subjects)
    arr.push_back(json{{"stratum", s.stratum_label},
                       {"subject_index", s.subject_index},
                       {"row", s.row}});
  return arr;
}

}  // namespace

json analysis_json(const AnalysisReport& r) {
  json j;
  j["schema_version"] = 1;
  j["spec"] = spec_json(r.spec);
  j["measured_decision"] = json{{"reject", r.measured_reject}};
  if (r.measured_test) {
    j["measured_decision"]["degenerate"] = r.measured_test->degenerate;
    if (!r.measured_test->degenerate)
      j["measured_decision"]["statistic"] = rational_json(r.measured_test->statistic);
    j["measured_decision"]["threshold"] = rational_json(r.measured_test->threshold);
  }
  if (r.p_value) {
    j["p_value"] = rational_json(*r.p_value);
  } else {
    j["p_value"] = nullptr;
    j["p_value_note"] =
        "chi-square decision method; see measured_decision for the statistic and threshold";
  }
  j["formulation"] = r.formulation_used == FormulationKind::BruteForce
                         ? "brute_force"
                         : formulation_name(r.formulation_used);
  j["symmetry"] = json{{"log_group_within", r.symmetry.log_within},
                       {"log_group_between", r.symmetry.log_between},
                       {"p1_family_variables", r.symmetry.p1_variables.str()},
                       {"p2_family_variables", r.symmetry.p2_variables.str()},
                       {"type", r.symmetry.type == DesignType::TypeI ? "I" : "II"},
                       {"criteria_agree", r.symmetry.criteria_agree}};
  j["overturnable"] = r.overturnable;
  if (r.overturnable && r.warning_accuracy) {
    if (r.bound_only) {
      // Not proven optimal: never present the bound as the warning accuracy.
      j["incumbent_lower_bound"] = rational_json(*r.warning_accuracy);
    } else {
      j["warning_accuracy"] = rational_json(*r.warning_accuracy);
    }
    if (r.minimal_alteration_number)
      j[r.bound_only ? "incumbent_alteration_number" : "minimal_alteration_number"] =
          *r.minimal_alteration_number;
    j["witness"] = witness_string(r.witness);
    j["sensitive_set"] = subjects_json(r.sensitive_set);
    if (r.weights) j["sensitivity_weights"] = weights_json(*r.weights);
  }
  j["solver"] = json{{"status", status_name(r.solver.status)},
                     {"bound_only", r.solver.bound_only},
                     {"nodes", r.solver.nodes}};
  j["timing"] = json{{"solve_seconds", r.solver.seconds}};
  return j;
}

json design_json(const DesignAccuracyResult& r, const Rational& p0, const Rational& p1) {
  json j;
  j["schema_version"] = 1;
  j["p0"] = rational_json(p0);
  j["p1"] = rational_json(p1);
  j["replications"] = r.replications;
  j["seed"] = r.seed;
  j["estimate"] = r.estimate;
  j["exact_mean"] = rational_json(r.exact_mean);
  j["monte_carlo_stderr"] = r.monte_carlo_stderr;
  j["flagged_replications"] = r.flagged_count;
  json per = json::array();
  for (const Rational& v : r.per_replication) per.push_back(rational_json(v));
  j["per_replication"] = per;
  return j;
}

json oracle_json(const StratifiedExperiment& exp, const OracleResult& oracle) {
  json j;
  j["schema_version"] = 1;
  j["candidates_checked"] = oracle.candidates_checked.str();
  j["overturnable"] = oracle.overturnable;
  if (oracle.overturnable) {
    j["warning_accuracy"] = rational_json(oracle.warning_accuracy);
    j["minimal_alteration_number"] = alteration_count(exp.measured_outcomes(), oracle.witness);
    j["witness"] = witness_string(oracle.witness);
    json all = json::array();
    for (const OutcomeVector& w : oracle.all_witnesses) all.push_back(witness_string(w));
    j["optimal_witnesses"] = all;
  }
  return j;
}

}  // namespace sensaudit
