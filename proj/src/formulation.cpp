#include "sensaudit/formulation.hpp"

#include <sstream>

namespace sensaudit {

Rational IqclpProblem::quad_matrix_entry(long r, long t) const {
  Rational e = quad_rank1.at(r) * quad_rank1.at(t);
  for (const QuadAggregate& agg : quad_aggregates) {
    bool has_r = false, has_t = false;
    for (long v : agg.vars) {
      has_r |= v == r;
      has_t |= v == t;
    }
    if (has_r && has_t) e += agg.beta;
  }
  return e;
}

Rational IqclpProblem::quad_value(const std::vector<Rational>& x) const {
  if (static_cast<long>(x.size()) != num_vars)
    throw std::invalid_argument("point has wrong dimension");
  Rational w_dot = 0, lin = 0;
  for (long v = 0; v < num_vars; ++v) {
    w_dot += quad_rank1[v] * x[v];
    lin += quad_linear[v] * x[v];
  }
  Rational g = w_dot * w_dot + lin;
  for (const QuadAggregate& agg : quad_aggregates) {
    Rational s = 0;
    for (long v : agg.vars) s += x[v];
    g += agg.beta * s * s;
  }
  return g;
}

Rational IqclpProblem::variance_term_value(const std::vector<Rational>& x) const {
  if (static_cast<long>(x.size()) != num_vars)
    throw std::invalid_argument("point has wrong dimension");
  Rational v = 0;
  for (long i = 0; i < num_vars; ++i) v += quad_linear[i] * x[i];
  for (const QuadAggregate& agg : quad_aggregates) {
    Rational s = 0;
    for (long i : agg.vars) s += x[i];
    v += agg.beta * s * s;
  }
  return v;
}

bool IqclpProblem::flip_achieved(const std::vector<BigInt>& x) const {
  validate_point(x);
  std::vector<Rational> xr(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) xr[i] = Rational(x[i]);
  const Rational g = quad_value(xr);
  const Rational vt = variance_term_value(xr);
  if (quad_sense == QuadSense::LeqZero) return g <= 0 || vt == 0;
  return g > 0 && vt != 0;
}

Rational IqclpProblem::objective_value(const std::vector<BigInt>& x) const {
  Rational obj = objective_const;
  for (long v = 0; v < num_vars; ++v) obj += objective[v] * Rational(x[v]);
  return obj;
}

void IqclpProblem::validate_point(const std::vector<BigInt>& x) const {
  if (static_cast<long>(x.size()) != num_vars)
    throw std::invalid_argument("point has wrong dimension");
  for (long v = 0; v < num_vars; ++v)
    if (x[v] < lower[v] || x[v] > upper[v])
      throw std::invalid_argument("variable " + std::to_string(v) + " violates its bounds");
  for (const LinearEquality& eq : equalities) {
    BigInt s = 0;
    for (long v : eq.vars) s += x[v];
    if (s != eq.rhs) throw std::invalid_argument("equality constraint violated");
  }
}

Rational constraint_value(const IqclpProblem& problem, const std::vector<BigInt>& x) {
  problem.validate_point(x);
  std::vector<Rational> xr(x.size());
  for (std::size_t v = 0; v < x.size(); ++v) xr[v] = Rational(x[v]);
  return problem.quad_value(xr);
}

namespace {

Rational measured_objective_const(const StratifiedExperiment& exp) {
  long positives = 0;
  for (const Stratum& s : exp.strata())
    for (std::uint8_t y : s.outcome) positives += y;
  return Rational(exp.total_subjects() - positives, exp.total_subjects());
}

void require_arm_sizes(const StratifiedExperiment& exp) {
  for (const Stratum& s : exp.strata())
    if (s.m() < 2 || s.n() - s.m() < 2)
      throw std::invalid_argument("stratum '" + s.label +
                                  "': the weak-null formulation needs at least 2 subjects per arm");
}

QuadSense flip_sense_sharp(const StratifiedExperiment& exp, const Rational& alpha) {
  const FlipDirection dir{mh_decision(exp, exp.measured_outcomes(), alpha).reject};
  return dir.sense();
}

QuadSense flip_sense_weak(const StratifiedExperiment& exp, const Rational& alpha) {
  const FlipDirection dir{neyman_decision(exp, exp.measured_outcomes(), alpha).reject};
  return dir.sense();
}

// Shared skeleton of the per-stratum (Upsilon) problems: variables, bounds,
// objective, var_meta, and group records.
IqclpProblem upsilon_skeleton(const StratifiedExperiment& exp) {
  IqclpProblem p;
  const long I = exp.num_strata();
  const long N = exp.total_subjects();
  p.num_vars = 4 * I;
  p.lower.assign(p.num_vars, 0);
  p.upper.resize(p.num_vars);
  p.objective.resize(p.num_vars);
  p.quad_rank1.resize(p.num_vars);
  p.quad_linear.resize(p.num_vars);
  p.var_meta.resize(p.num_vars);
  p.objective_const = measured_objective_const(exp);

  const auto tables = stratum_tables(exp);
  for (long i = 0; i < I; ++i) {
    const StratumTable& t = tables[i];
    const long base = 4 * i;
    const long ub[4] = {t.l00, t.l01, t.l10, t.l11};
    for (long k = 0; k < 4; ++k) {
      p.upper[base + k] = ub[k];
      p.objective[base + k] = Rational(k % 2 == 0 ? -1 : 1, N);
      p.var_meta[base + k] = VarMeta{VarMeta::Kind::StratumComponent, i, k, {}};
    }
  }
  return p;
}

void attach_upsilon_groups(IqclpProblem& p, const StratifiedExperiment& exp, NullKind kind,
                           const Rational& chi2) {
  AggregateStructure agg;
  agg.null_kind = kind;
  agg.chi2 = chi2;
  agg.n_total = exp.total_subjects();
  const auto tables = stratum_tables(exp);
  for (long i = 0; i < exp.num_strata(); ++i) {
    SolveGroup g;
    g.n = exp.stratum(i).n();
    g.m = exp.stratum(i).m();
    g.lambda = tables[i];
    g.multiplicity = 1;
    g.strata = {i};
    g.var_indices = {4 * i, 4 * i + 1, 4 * i + 2, 4 * i + 3};
    agg.groups.push_back(std::move(g));
  }
  p.aggregate = std::move(agg);
}

// Shared skeleton of the per-class (delta) problems.
IqclpProblem delta_skeleton(const StratifiedExperiment& exp, const UniqueTableIndex& index,
                            NullKind kind, const Rational& chi2) {
  if (index.stratum_to_class.size() != static_cast<std::size_t>(exp.num_strata()))
    throw std::invalid_argument("unique-table index does not match the experiment");
  IqclpProblem p;
  const long N = exp.total_subjects();
  p.objective_const = measured_objective_const(exp);

  AggregateStructure agg;
  agg.null_kind = kind;
  agg.chi2 = chi2;
  agg.n_total = N;

  for (std::size_t s = 0; s < index.unique_tables.size(); ++s) {
    const StratumTable& cls = index.unique_tables[s];
    const long P = index.multiplicity[s];
    SolveGroup g;
    g.n = cls.n();
    g.m = cls.m();
    g.lambda = cls;
    g.multiplicity = P;
    for (long i = 0; i < exp.num_strata(); ++i)
      if (index.stratum_to_class[i] == static_cast<long>(s)) g.strata.push_back(i);

    LinearEquality eq;
    eq.rhs = P;
    const auto deltas = enumerate_delta_tables(cls);
    for (std::size_t dp = 0; dp < deltas.size(); ++dp) {
      const DeltaTable& d = deltas[dp];
      const long v = p.num_vars++;
      p.lower.push_back(0);
      p.upper.push_back(P);  // implied by the class equality; valid tightening
      p.objective.push_back(Rational(d.d01 + d.d11 - d.d00 - d.d10, N));
      p.var_meta.push_back(
          VarMeta{VarMeta::Kind::ClassDelta, static_cast<long>(s), static_cast<long>(dp), d});
      eq.vars.push_back(v);
      g.var_indices.push_back(v);
    }
    p.equalities.push_back(std::move(eq));
    agg.groups.push_back(std::move(g));
  }
  p.quad_rank1.assign(p.num_vars, Rational(0));
  p.quad_linear.assign(p.num_vars, Rational(0));
  p.aggregate = std::move(agg);
  return p;
}

}  // namespace

IqclpProblem build_p1(const StratifiedExperiment& exp, const Rational& alpha) {
  const Rational chi2 = chisq_quantile(alpha);
  IqclpProblem p = upsilon_skeleton(exp);
  p.formulation = FormulationKind::P1;
  p.quad_sense = flip_sense_sharp(exp, alpha);
  for (long i = 0; i < exp.num_strata(); ++i) {
    const long n = exp.stratum(i).n();
    const long m = exp.stratum(i).m();
    const long base = 4 * i;
    const Rational ratio(m, n);
    p.quad_rank1[base + 0] = -ratio;
    p.quad_rank1[base + 1] = -ratio;
    p.quad_rank1[base + 2] = 1 - ratio;
    p.quad_rank1[base + 3] = 1 - ratio;
    // -chi2 * Var(t) expands to kappa*t^2 - kappa*n*t with t the stratum total.
    const Rational kappa = chi2 * Rational(BigInt(m) * (n - m), BigInt(n) * n * (n - 1));
    p.quad_aggregates.push_back(QuadAggregate{kappa, {base, base + 1, base + 2, base + 3}});
    for (long k = 0; k < 4; ++k) p.quad_linear[base + k] = -kappa * n;
  }
  attach_upsilon_groups(p, exp, NullKind::Sharp, chi2);
  return p;
}

IqclpProblem build_p3(const StratifiedExperiment& exp, const Rational& alpha) {
  require_arm_sizes(exp);
  const Rational chi2 = chisq_quantile(alpha);
  const long N = exp.total_subjects();
  IqclpProblem p = upsilon_skeleton(exp);
  p.formulation = FormulationKind::P3;
  p.quad_sense = flip_sense_weak(exp, alpha);
  for (long i = 0; i < exp.num_strata(); ++i) {
    const long n = exp.stratum(i).n();
    const long m = exp.stratum(i).m();
    const long k = n - m;
    const long base = 4 * i;
    p.quad_rank1[base + 0] = -Rational(BigInt(n), BigInt(N) * k);
    p.quad_rank1[base + 1] = p.quad_rank1[base + 0];
    p.quad_rank1[base + 2] = Rational(BigInt(n), BigInt(N) * m);
    p.quad_rank1[base + 3] = p.quad_rank1[base + 2];
    const Rational n2_over_N2(BigInt(n) * n, BigInt(N) * N);
    const Rational beta_c = chi2 * n2_over_N2 / (BigInt(k) * k * (k - 1));
    const Rational beta_t = chi2 * n2_over_N2 / (BigInt(m) * m * (m - 1));
    p.quad_aggregates.push_back(QuadAggregate{beta_c, {base, base + 1}});
    p.quad_aggregates.push_back(QuadAggregate{beta_t, {base + 2, base + 3}});
    const Rational lin_c = -chi2 * n2_over_N2 / (BigInt(k) * (k - 1));
    const Rational lin_t = -chi2 * n2_over_N2 / (BigInt(m) * (m - 1));
    p.quad_linear[base + 0] = lin_c;
    p.quad_linear[base + 1] = lin_c;
    p.quad_linear[base + 2] = lin_t;
    p.quad_linear[base + 3] = lin_t;
  }
  attach_upsilon_groups(p, exp, NullKind::Weak, chi2);
  return p;
}

IqclpProblem build_p2(const StratifiedExperiment& exp, const Rational& alpha,
                      const UniqueTableIndex& index) {
  const Rational chi2 = chisq_quantile(alpha);
  IqclpProblem p = delta_skeleton(exp, index, NullKind::Sharp, chi2);
  p.formulation = FormulationKind::P2;
  p.quad_sense = flip_sense_sharp(exp, alpha);
  for (long v = 0; v < p.num_vars; ++v) {
    const VarMeta& meta = p.var_meta[v];
    const StratumTable& cls = index.unique_tables[meta.group];
    const long n = cls.n();
    const long m = cls.m();
    const DeltaTable& d = meta.delta;
    const long t = d.d00 + d.d01 + d.d10 + d.d11;
    p.quad_rank1[v] = Rational(d.d10 + d.d11) - Rational(m, n) * t;
    p.quad_linear[v] = -chi2 * Rational(BigInt(m) * t * (n - t) * (n - m), BigInt(n) * n * (n - 1));
  }
  return p;
}

IqclpProblem build_p4(const StratifiedExperiment& exp, const Rational& alpha,
                      const UniqueTableIndex& index) {
  require_arm_sizes(exp);
  const Rational chi2 = chisq_quantile(alpha);
  const long N = exp.total_subjects();
  IqclpProblem p = delta_skeleton(exp, index, NullKind::Weak, chi2);
  p.formulation = FormulationKind::P4;
  p.quad_sense = flip_sense_weak(exp, alpha);
  for (long v = 0; v < p.num_vars; ++v) {
    const VarMeta& meta = p.var_meta[v];
    const StratumTable& cls = index.unique_tables[meta.group];
    const long n = cls.n();
    const long m = cls.m();
    const long k = n - m;
    const DeltaTable& d = meta.delta;
    const long a = d.d10 + d.d11;
    const long c = d.d00 + d.d01;
    p.quad_rank1[v] =
        Rational(BigInt(n) * a, BigInt(N) * m) - Rational(BigInt(n) * c, BigInt(N) * k);
    const Rational n2_over_N2(BigInt(n) * n, BigInt(N) * N);
    p.quad_linear[v] =
        -chi2 * n2_over_N2 *
        (Rational(a, BigInt(m) * (m - 1)) - Rational(BigInt(a) * a, BigInt(m) * m * (m - 1)) +
         Rational(c, BigInt(k) * (k - 1)) - Rational(BigInt(c) * c, BigInt(k) * k * (k - 1)));
  }
  return p;
}

// ---------------------------------------------------------------------------
// Text dump / parse

namespace {

std::string rat_str(const Rational& r) { return rat_num(r).str() + "/" + rat_den(r).str(); }

}  // namespace

std::string dump_problem(const IqclpProblem& p) {
  std::ostringstream out;
  out << "iqclp 1\n";
  const char* form = "custom";
  switch (p.formulation) {
    case FormulationKind::P1: form = "p1"; break;
    case FormulationKind::P2: form = "p2"; break;
    case FormulationKind::P3: form = "p3"; break;
    case FormulationKind::P4: form = "p4"; break;
    case FormulationKind::BruteForce:
    case FormulationKind::Custom: break;
  }
  out << "formulation " << form << "\n";
  out << "sense " << (p.quad_sense == QuadSense::LeqZero ? "leq" : "gt") << "\n";
  out << "nvars " << p.num_vars << "\n";
  out << "objconst " << rat_str(p.objective_const) << "\n";
  for (long v = 0; v < p.num_vars; ++v) {
    out << "var " << v << " lb " << p.lower[v] << " ub " << p.upper[v] << " obj "
        << rat_str(p.objective[v]) << " w " << rat_str(p.quad_rank1[v]) << " q1 "
        << rat_str(p.quad_linear[v]);
    const VarMeta& meta = p.var_meta.empty() ? VarMeta{} : p.var_meta[v];
    if (!p.var_meta.empty()) {
      if (meta.kind == VarMeta::Kind::StratumComponent) {
        out << " stratum " << meta.group << " comp " << meta.component;
      } else {
        out << " class " << meta.group << " delta " << meta.component << " " << meta.delta.d00
            << " " << meta.delta.d01 << " " << meta.delta.d10 << " " << meta.delta.d11;
      }
    }
    out << "\n";
  }
  for (const QuadAggregate& a : p.quad_aggregates) {
    out << "agg beta " << rat_str(a.beta) << " vars";
    for (long v : a.vars) out << " " << v;
    out << "\n";
  }
  for (const LinearEquality& eq : p.equalities) {
    out << "eq rhs " << eq.rhs << " vars";
    for (long v : eq.vars) out << " " << v;
    out << "\n";
  }
  if (p.aggregate) {
    const AggregateStructure& agg = *p.aggregate;
    out << "nullkind " << (agg.null_kind == NullKind::Sharp ? "sharp" : "weak") << "\n";
    out << "chi2 " << rat_str(agg.chi2) << "\n";
    out << "ntotal " << agg.n_total << "\n";
    for (const SolveGroup& g : agg.groups) {
      out << "group n " << g.n << " m " << g.m << " lambda " << g.lambda.l00 << " " << g.lambda.l01
          << " " << g.lambda.l10 << " " << g.lambda.l11 << " mult " << g.multiplicity << " strata";
      for (long i : g.strata) out << " " << i;
      out << " vars";
      for (long v : g.var_indices) out << " " << v;
      out << "\n";
    }
  }
  out << "end iqclp\n";
  return out.str();
}

IqclpProblem parse_problem(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  IqclpProblem p;
  AggregateStructure agg;
  bool has_agg = false;
  bool header = false, footer = false;

  auto fail = [](const std::string& why) -> void {
    throw std::invalid_argument("problem dump: " + why);
  };

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "iqclp") {
      int version = 0;
      ls >> version;
      if (version != 1) fail("unsupported version");
      header = true;
    } else if (tok == "formulation") {
      std::string f;
      ls >> f;
      if (f == "p1") p.formulation = FormulationKind::P1;
      else if (f == "p2") p.formulation = FormulationKind::P2;
      else if (f == "p3") p.formulation = FormulationKind::P3;
      else if (f == "p4") p.formulation = FormulationKind::P4;
      else p.formulation = FormulationKind::Custom;
    } else if (tok == "sense") {
      std::string s;
      ls >> s;
      p.quad_sense = s == "leq" ? QuadSense::LeqZero : QuadSense::GtZero;
    } else if (tok == "nvars") {
      ls >> p.num_vars;
      p.lower.assign(p.num_vars, 0);
      p.upper.assign(p.num_vars, 0);
      p.objective.assign(p.num_vars, Rational(0));
      p.quad_rank1.assign(p.num_vars, Rational(0));
      p.quad_linear.assign(p.num_vars, Rational(0));
      p.var_meta.assign(p.num_vars, VarMeta{});
    } else if (tok == "objconst") {
      std::string r;
      ls >> r;
      p.objective_const = parse_rational(r);
    } else if (tok == "var") {
      long v = -1;
      std::string key, val;
      ls >> v;
      if (v < 0 || v >= p.num_vars) fail("variable index out of range");
      VarMeta meta;
      while (ls >> key) {
        if (key == "lb") { ls >> val; p.lower[v] = BigInt(val); }
        else if (key == "ub") { ls >> val; p.upper[v] = BigInt(val); }
        else if (key == "obj") { ls >> val; p.objective[v] = parse_rational(val); }
        else if (key == "w") { ls >> val; p.quad_rank1[v] = parse_rational(val); }
        else if (key == "q1") { ls >> val; p.quad_linear[v] = parse_rational(val); }
        else if (key == "stratum") { meta.kind = VarMeta::Kind::StratumComponent; ls >> meta.group; }
        else if (key == "comp") { ls >> meta.component; }
        else if (key == "class") { meta.kind = VarMeta::Kind::ClassDelta; ls >> meta.group; }
        else if (key == "delta") {
          ls >> meta.component >> meta.delta.d00 >> meta.delta.d01 >> meta.delta.d10 >>
              meta.delta.d11;
        } else fail("unknown var field '" + key + "'");
      }
      p.var_meta[v] = meta;
    } else if (tok == "agg") {
      QuadAggregate a;
      std::string key, val;
      ls >> key >> val;
      if (key != "beta") fail("agg line needs beta");
      a.beta = parse_rational(val);
      ls >> key;
      long v;
      while (ls >> v) a.vars.push_back(v);
      p.quad_aggregates.push_back(std::move(a));
    } else if (tok == "eq") {
      LinearEquality eq;
      std::string key, val;
      ls >> key >> val;
      if (key != "rhs") fail("eq line needs rhs");
      eq.rhs = BigInt(val);
      ls >> key;
      long v;
      while (ls >> v) eq.vars.push_back(v);
      p.equalities.push_back(std::move(eq));
    } else if (tok == "nullkind") {
      std::string s;
      ls >> s;
      agg.null_kind = s == "sharp" ? NullKind::Sharp : NullKind::Weak;
      has_agg = true;
    } else if (tok == "chi2") {
      std::string r;
      ls >> r;
      agg.chi2 = parse_rational(r);
    } else if (tok == "ntotal") {
      ls >> agg.n_total;
    } else if (tok == "group") {
      SolveGroup g;
      std::string key;
      while (ls >> key) {
        if (key == "n") ls >> g.n;
        else if (key == "m") ls >> g.m;
        else if (key == "lambda")
          ls >> g.lambda.l00 >> g.lambda.l01 >> g.lambda.l10 >> g.lambda.l11;
        else if (key == "mult") ls >> g.multiplicity;
        else if (key == "strata") {
          long i;
          while (ls >> i) g.strata.push_back(i);
          // "vars" follows inside the same stream; recover by clearing state
          ls.clear();
        } else if (key == "vars") {
          long v;
          while (ls >> v) g.var_indices.push_back(v);
          ls.clear();
        } else fail("unknown group field '" + key + "'");
      }
      agg.groups.push_back(std::move(g));
    } else if (tok == "end") {
      footer = true;
    } else {
      fail("unknown line '" + tok + "'");
    }
  }
  if (!header || !footer) fail("missing header or footer");
  if (has_agg) p.aggregate = std::move(agg);
  return p;
}

}  // namespace sensaudit
