// Python bindings for the core operations: experiment loading, test
// statistics, warning/design accuracy, and the brute-force oracle.

#include "sensaudit/audit.hpp"
#include "sensaudit/report_json.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace sensaudit;

namespace {

py::object to_fraction(const Rational& r) {
  static py::object fraction = py::module_::import("fractions").attr("Fraction");
  return fraction(rat_num(r).str() + "/" + rat_den(r).str());
}

Rational from_py(const py::handle& value) {
  if (py::isinstance<py::int_>(value))
    return Rational(BigInt(py::str(value).cast<std::string>()));
  if (py::isinstance<py::float_>(value)) {
    std::ostringstream s;
    s.precision(17);
    s << value.cast<double>();
    return parse_rational(s.str());
  }
  if (py::isinstance<py::str>(value)) return parse_rational(value.cast<std::string>());
  // fractions.Fraction or anything with numerator/denominator
  if (py::hasattr(value, "numerator") && py::hasattr(value, "denominator"))
    return Rational(BigInt(py::str(value.attr("numerator")).cast<std::string>()),
                    BigInt(py::str(value.attr("denominator")).cast<std::string>()));
  throw std::invalid_argument("cannot interpret value as an exact rational");
}

NullSpec make_spec(const std::string& null_kind, const py::handle& alpha,
                   const std::string& method, const std::string& sided, long enum_cap) {
  NullSpec spec;
  if (null_kind == "sharp") spec.null_kind = NullKind::Sharp;
  else if (null_kind == "weak") spec.null_kind = NullKind::Weak;
  else throw std::invalid_argument("null must be 'sharp' or 'weak'");
  if (method == "chisq") spec.method = DecisionMethod::ChiSquare;
  else if (method == "exact") spec.method = DecisionMethod::ExactEnumeration;
  else throw std::invalid_argument("method must be 'chisq' or 'exact'");
  if (sided == "one") spec.sidedness = Sidedness::OneSidedUpper;
  else if (sided == "two") spec.sidedness = Sidedness::TwoSided;
  else throw std::invalid_argument("sided must be 'one' or 'two'");
  spec.alpha = from_py(alpha);
  spec.enumeration_cap = enum_cap;
  spec.validate();
  return spec;
}

OutcomeVector to_outcomes(const py::sequence& seq) {
  OutcomeVector y;
  y.reserve(py::len(seq));
  for (const auto& item : seq) {
    const long v = item.cast<long>();
    if (v != 0 && v != 1) throw std::invalid_argument("outcomes must be 0 or 1");
    y.push_back(static_cast<std::uint8_t>(v));
  }
  return y;
}

py::dict analysis_to_dict(const AnalysisReport& r) {
  py::dict d;
  d["measured_reject"] = r.measured_reject;
  d["overturnable"] = r.overturnable;
  d["bound_only"] = r.bound_only;
  if (r.p_value) d["p_value"] = to_fraction(*r.p_value);
  switch (r.formulation_used) {
    case FormulationKind::P1: d["formulation"] = "p1"; break;
    case FormulationKind::P2: d["formulation"] = "p2"; break;
    case FormulationKind::P3: d["formulation"] = "p3"; break;
    case FormulationKind::P4: d["formulation"] = "p4"; break;
    case FormulationKind::BruteForce: d["formulation"] = "brute_force"; break;
    case FormulationKind::Custom: d["formulation"] = "custom"; break;
  }
  if (r.overturnable && r.warning_accuracy) {
    d[r.bound_only ? "incumbent_lower_bound" : "warning_accuracy"] =
        to_fraction(*r.warning_accuracy);
    if (r.minimal_alteration_number) d["minimal_alteration_number"] = *r.minimal_alteration_number;
    d["witness"] = witness_string(r.witness);
    py::list sens;
    for (const SubjectRef& ref : r.sensitive_set) {
      py::dict e;
      e["stratum"] = ref.stratum_label;
      e["subject_index"] = ref.subject_index;
      e["row"] = ref.row;
      sens.append(e);
    }
    d["sensitive_set"] = sens;
    if (r.weights) {
      py::dict w;
      w["treated_false_positive"] = to_fraction(r.weights->t_fp);
      w["treated_false_negative"] = to_fraction(r.weights->t_fn);
      w["control_false_positive"] = to_fraction(r.weights->c_fp);
      w["control_false_negative"] = to_fraction(r.weights->c_fn);
      d["sensitivity_weights"] = w;
    }
  }
  d["solver_nodes"] = r.solver.nodes;
  d["solver_seconds"] = r.solver.seconds;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Exact sensitivity auditing of randomized experiments under outcome "
            "misclassification";

  py::class_<StratifiedExperiment>(m, "Experiment")
      .def_property_readonly("num_strata", &StratifiedExperiment::num_strata)
      .def_property_readonly("num_subjects", &StratifiedExperiment::total_subjects)
      .def("measured_outcomes",
           [](const StratifiedExperiment& e) {
             py::list out;
             for (std::uint8_t v : e.measured_outcomes()) out.append(static_cast<int>(v));
             return out;
           })
      .def("treatment_indicators",
           [](const StratifiedExperiment& e) {
             py::list out;
             for (std::uint8_t v : e.treatment_indicators()) out.append(static_cast<int>(v));
             return out;
           })
      .def("__repr__", [](const StratifiedExperiment& e) {
        std::ostringstream s;
        s << "Experiment(strata=" << e.num_strata() << ", subjects=" << e.total_subjects() << ")";
        return s.str();
      });

  m.def("load_experiment", &load_experiment_file, py::arg("path"),
        "Load a stratum,treated,outcome CSV file.");
  m.def(
      "load_experiment_csv",
      [](const std::string& text) {
        std::istringstream in(text);
        return load_experiment(in);
      },
      py::arg("text"), "Parse experiment CSV text.");

  m.def(
      "accuracy",
      [](const py::sequence& y_star, const py::sequence& y) {
        return to_fraction(accuracy(to_outcomes(y_star), to_outcomes(y)));
      },
      py::arg("measured"), py::arg("truth"));
  m.def(
      "alteration_count",
      [](const py::sequence& y_star, const py::sequence& y) {
        return alteration_count(to_outcomes(y_star), to_outcomes(y));
      },
      py::arg("measured"), py::arg("truth"));

  m.def(
      "mh_statistic",
      [](const StratifiedExperiment& exp, const py::sequence& y) {
        return to_fraction(mh_statistic(exp, to_outcomes(y)));
      },
      py::arg("experiment"), py::arg("outcomes"));
  m.def(
      "mh_moments",
      [](const StratifiedExperiment& exp, const py::sequence& y) {
        const auto [e, v] = mh_moments(exp, to_outcomes(y));
        return py::make_tuple(to_fraction(e), to_fraction(v));
      },
      py::arg("experiment"), py::arg("outcomes"));
  m.def(
      "chisq_quantile",
      [](const py::handle& alpha) { return to_fraction(chisq_quantile(from_py(alpha))); },
      py::arg("alpha"));
  m.def(
      "exact_pvalue",
      [](const StratifiedExperiment& exp, const std::string& sided, long enum_cap) {
        return to_fraction(exact_randomization_pvalue(
            exp, exp.measured_outcomes(),
            sided == "two" ? Sidedness::TwoSided : Sidedness::OneSidedUpper, enum_cap));
      },
      py::arg("experiment"), py::arg("sided") = "one", py::arg("enum_cap") = 1000000);

  m.def(
      "classify_design",
      [](const StratifiedExperiment& exp) {
        return classify_design(exp) == DesignType::TypeI ? "I" : "II";
      },
      py::arg("experiment"));

  m.def(
      "analyze",
      [](const StratifiedExperiment& exp, const std::string& null_kind, const py::handle& alpha,
         const std::string& method, const std::string& sided, long enum_cap, int oracle_cap,
         double budget_seconds) {
        AuditOptions options;
        options.oracle_cap = oracle_cap;
        options.budget.max_time =
            std::chrono::milliseconds(static_cast<long long>(budget_seconds * 1000));
        return analysis_to_dict(
            warning_accuracy(exp, make_spec(null_kind, alpha, method, sided, enum_cap), options));
      },
      py::arg("experiment"), py::arg("null") = "sharp", py::arg("alpha") = "0.05",
      py::arg("method") = "chisq", py::arg("sided") = "one", py::arg("enum_cap") = 1000000,
      py::arg("oracle_cap") = 20, py::arg("budget_seconds") = 3600.0,
      "Measured decision, warning accuracy, sensitive set, and weights.");

  m.def(
      "design_accuracy",
      [](const StratifiedExperiment& exp, const py::handle& p0, const py::handle& p1,
         long replications, std::uint64_t seed, const std::string& null_kind,
         const py::handle& alpha, const std::string& method) {
        const DesignAccuracyResult r =
            design_accuracy(exp, from_py(p0), from_py(p1),
                            make_spec(null_kind, alpha, method, "one", 1000000), replications,
                            seed);
        py::dict d;
        d["estimate"] = r.estimate;
        d["exact_mean"] = to_fraction(r.exact_mean);
        d["stderr"] = r.monte_carlo_stderr;
        d["replications"] = r.replications;
        d["seed"] = r.seed;
        d["flagged"] = r.flagged_count;
        py::list per;
        for (const Rational& v : r.per_replication) per.append(to_fraction(v));
        d["per_replication"] = per;
        return d;
      },
      py::arg("experiment"), py::arg("p0"), py::arg("p1"), py::arg("replications") = 1000,
      py::arg("seed") = 0, py::arg("null") = "sharp", py::arg("alpha") = "0.05",
      py::arg("method") = "chisq",
      "Monte-Carlo design accuracy under Bernoulli outcome draws.");

  m.def(
      "oracle",
      [](const StratifiedExperiment& exp, const std::string& null_kind, const py::handle& alpha,
         const std::string& method, const std::string& sided, int cap) {
        const OracleResult r = brute_force_wa(
            exp, make_spec(null_kind, alpha, method, sided, 1000000), cap, /*collect_all=*/true);
        py::dict d;
        d["overturnable"] = r.overturnable;
        if (r.overturnable) {
          d["warning_accuracy"] = to_fraction(r.warning_accuracy);
          d["witness"] = witness_string(r.witness);
          py::list all;
          for (const OutcomeVector& w : r.all_witnesses) all.append(witness_string(w));
          d["optimal_witnesses"] = all;
        }
        return d;
      },
      py::arg("experiment"), py::arg("null") = "sharp", py::arg("alpha") = "0.05",
      py::arg("method") = "exact", py::arg("sided") = "one", py::arg("cap") = 20,
      "Exhaustive warning-accuracy optimum with every optimal witness.");

  m.def(
      "expected_misclassification_table",
      [](long n_treated, long n_control, const py::handle& p_t1, const py::handle& p_t0,
         const py::handle& p_c1, const py::handle& p_c0, const py::handle& pi_t_fp,
         const py::handle& pi_t_fn, const py::handle& pi_c_fp, const py::handle& pi_c_fn) {
        const MisclassificationTable t = expected_misclassification_table(
            n_treated, n_control, from_py(p_t1), from_py(p_t0), from_py(p_c1), from_py(p_c0),
            from_py(pi_t_fp), from_py(pi_t_fn), from_py(pi_c_fp), from_py(pi_c_fn));
        py::dict d;
        d["treated_false_positive"] = to_fraction(t.t_fp);
        d["treated_false_negative"] = to_fraction(t.t_fn);
        d["control_false_positive"] = to_fraction(t.c_fp);
        d["control_false_negative"] = to_fraction(t.c_fn);
        return d;
      },
      py::arg("n_treated"), py::arg("n_control"), py::arg("p_t1"), py::arg("p_t0"),
      py::arg("p_c1"), py::arg("p_c0"), py::arg("pi_t_fp"), py::arg("pi_t_fn"),
      py::arg("pi_c_fp"), py::arg("pi_c_fn"));
}
