#include "sensaudit/solver.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <ostream>

namespace sensaudit {

namespace {

using Clock = std::chrono::steady_clock;

// ---------------------------------------------------------------------------
// Aggregate search model. The quadratic constraint of every builder problem
// takes the form g(x) = (sum_g sum_states mu*u)^2 + sum_g sum_states mu*r,
// where each group contributes `multiplicity` units and every unit picks one
// state. States carry integer alteration costs; maximizing the objective is
// minimizing total cost.

struct AggState {
  std::array<long, 4> cells{};  // Upsilon counts or delta table entries
  long cost = 0;                // alterations vs the measured state, per unit
  long delta_var = -1;          // variable index (delta problems only)
  Rational u, r;
  BigInt u_scaled, r_scaled;    // u*Du, r*Dr
  BigInt du, dr;                // deltas vs the group's base state (scaled)
  double du_d = 0, dr_d = 0;    // for greedy move scoring only
};

struct AggGroupModel {
  long n = 0, m = 0;
  StratumTable lambda;
  long multiplicity = 1;
  bool is_delta = false;
  std::vector<long> strata;                       // member strata, ascending
  std::vector<std::array<long, 4>> member_vars;   // per member, its 4 var indices
  std::vector<AggState> states;                   // exploration order
  long base_state = -1;
  long max_unit_cost = 0;
};

struct HullPoint {
  Rational x, y;  // per-cost (delta u, delta r)
  friend bool operator==(const HullPoint&, const HullPoint&) = default;
};

Rational cross(const HullPoint& o, const HullPoint& a, const HullPoint& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

std::vector<HullPoint> lower_hull(std::vector<HullPoint> pts) {
  std::sort(pts.begin(), pts.end(), [](const HullPoint& a, const HullPoint& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  std::vector<HullPoint> h;
  for (const HullPoint& p : pts) {
    while (h.size() >= 2 && cross(h[h.size() - 2], h.back(), p) <= 0) h.pop_back();
    h.push_back(p);
  }
  return h;
}

std::vector<HullPoint> full_hull(std::vector<HullPoint> pts) {
  std::sort(pts.begin(), pts.end(), [](const HullPoint& a, const HullPoint& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() <= 2) return pts;
  std::vector<HullPoint> lo, hi;
  for (const HullPoint& p : pts) {
    while (lo.size() >= 2 && cross(lo[lo.size() - 2], lo.back(), p) <= 0) lo.pop_back();
    lo.push_back(p);
  }
  for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
    while (hi.size() >= 2 && cross(hi[hi.size() - 2], hi.back(), *it) <= 0) hi.pop_back();
    hi.push_back(*it);
  }
  lo.insert(lo.end(), hi.begin() + 1, hi.end() - 1);
  return lo;
}

struct SearchLimits {
  std::uint64_t max_nodes;
  Clock::time_point deadline;
};

class AggregateSolver {
 public:
  AggregateSolver(const IqclpProblem& p, std::ostream* log) : p_(p), log_(log) {}

  // Returns false when the problem does not fit the aggregate model; the
  // caller then uses the generic search.
  bool prepare();
  SolveResult run(const SolverBudget& budget);

 private:
  struct Incumbent {
    bool found = false;
    long cost = 0;
    std::vector<std::vector<long>> counts;  // per group, per state
  };

  void build_states(const SolveGroup& sg, AggGroupModel& g) const;
  void merge_identical_groups();
  void scale_states();
  void order_states_and_groups();
  void build_suffixes();
  void probe_single_groups();
  void probe_greedy();
  bool exact_feasible(const BigInt& u_scaled, const BigInt& r_scaled) const;
  bool bound_admits(long gi, const BigInt& u_scaled, const BigInt& r_scaled, long budget,
                    bool zero_r_prefix) const;
  void dfs(long gi, long si, long units_left, BigInt u, BigInt r, long cost, bool zero_r_prefix);
  void consider_leaf(const BigInt& u, const BigInt& r, long cost);
  std::vector<BigInt> decode(const Incumbent& inc) const;

  const IqclpProblem& p_;
  std::ostream* log_;
  bool leq_ = true;
  long n_total_ = 0;
  std::vector<AggGroupModel> groups_;
  BigInt du_denom_ = 1, dr_denom_ = 1;  // Du, Dr
  // Suffix data indexed by group position (size G+1).
  std::vector<BigInt> suffix_base_u_, suffix_base_r_;
  std::vector<long> suffix_max_cost_;
  std::vector<char> suffix_zero_r_;
  std::vector<long> suffix_zero_r_cost_;  // cheapest all-degenerate completion
  std::vector<std::vector<HullPoint>> suffix_lower_hull_, suffix_hull_vertices_;
  // Integer-scaled copies for the per-node bound tests: vertex (px, py) means
  // a per-cost move of (px/C, py/C) in (u, r) scaled units.
  BigInt cost_lcm_ = 1;              // C
  BigInt drc_, du2c2_;               // Dr*C and Du^2*C^2
  std::vector<std::vector<std::pair<BigInt, BigInt>>> suffix_lower_scaled_, suffix_full_scaled_;
  BigInt base_u_total_ = 0, base_r_total_ = 0;

  Incumbent incumbent_;
  std::vector<std::uint64_t> nodes_at_group_;
  std::vector<std::vector<long>> counts_;
  SearchLimits limits_{};
  std::uint64_t nodes_ = 0;
  bool budget_hit_ = false;
};

void AggregateSolver::build_states(const SolveGroup& sg, AggGroupModel& g) const {
  const long N = n_total_;
  const StratumTable& lam = g.lambda;
  const Rational base_obj(lam.l01 + lam.l11, N);

  auto push_state = [&](std::array<long, 4> cells, long delta_var) {
    AggState st;
    st.cells = cells;
    st.delta_var = delta_var;
    // Alterations vs the measured cells (0, l01, 0, l11).
    st.cost = cells[0] + (lam.l01 - cells[1]) + cells[2] + (lam.l11 - cells[3]);
    if (delta_var >= 0) {
      st.u = p_.quad_rank1[delta_var];
      st.r = p_.quad_linear[delta_var];
    } else {
      st.u = 0;
      st.r = 0;
      const auto& vars = g.member_vars.front();
      for (int k = 0; k < 4; ++k) {
        st.u += p_.quad_rank1[vars[k]] * cells[k];
        st.r += p_.quad_linear[vars[k]] * cells[k];
      }
      for (const QuadAggregate& agg : p_.quad_aggregates) {
        long in = 0;
        Rational s = 0;
        for (long v : agg.vars)
          for (int k = 0; k < 4; ++k)
            if (vars[k] == v) {
              ++in;
              s += cells[k];
            }
        if (in == static_cast<long>(agg.vars.size()) && in > 0) st.r += agg.beta * s * s;
      }
    }
    g.states.push_back(std::move(st));
  };

  if (g.is_delta) {
    // Collapse delta tables that share (d10+d11, d00+d01); the cheapest
    // representative dominates, ties to the smallest delta index.
    std::map<std::pair<long, long>, std::tuple<long, std::array<long, 4>, long>> rep;
    for (std::size_t k = 0; k < sg.var_indices.size(); ++k) {
      const long v = sg.var_indices[k];
      const DeltaTable& d = p_.var_meta[v].delta;
      const std::array<long, 4> cells{d.d00, d.d01, d.d10, d.d11};
      const long cost = cells[0] + (lam.l01 - cells[1]) + cells[2] + (lam.l11 - cells[3]);
      const auto key = std::make_pair(d.d10 + d.d11, d.d00 + d.d01);
      auto it = rep.find(key);
      if (it == rep.end() || cost < std::get<0>(it->second)) rep[key] = {cost, cells, v};
    }
    for (const auto& [key, val] : rep) push_state(std::get<1>(val), std::get<2>(val));
  } else {
    for (long a = 0; a <= g.m; ++a)
      for (long c = 0; c <= g.n - g.m; ++c) {
        // Greedy split: given arm totals, put true positives on the measured
        // positives first; this maximizes agreement at fixed (a, c).
        const long u11 = std::min(a, lam.l11);
        const long u01 = std::min(c, lam.l01);
        push_state({c - u01, u01, a - u11, u11}, -1);
      }
  }

  for (std::size_t s = 0; s < g.states.size(); ++s) {
    if (g.states[s].cost == 0) g.base_state = static_cast<long>(s);
    g.max_unit_cost = std::max(g.max_unit_cost, g.states[s].cost);
  }
}

bool AggregateSolver::prepare() {
  if (!p_.aggregate) return false;
  const AggregateStructure& agg = *p_.aggregate;
  n_total_ = agg.n_total;
  if (n_total_ <= 0) return false;
  leq_ = p_.quad_sense == QuadSense::LeqZero;

  // Check that the groups partition the variables.
  std::vector<char> seen(p_.num_vars, 0);
  for (const SolveGroup& sg : agg.groups)
    for (long v : sg.var_indices) {
      if (v < 0 || v >= p_.num_vars || seen[v]) return false;
      seen[v] = 1;
    }
  for (char c : seen)
    if (!c) return false;

  for (const SolveGroup& sg : agg.groups) {
    AggGroupModel g;
    g.n = sg.n;
    g.m = sg.m;
    g.lambda = sg.lambda;
    g.multiplicity = sg.multiplicity;
    g.strata = sg.strata;
    if (sg.var_indices.size() == 4 && !sg.var_indices.empty() &&
        p_.var_meta[sg.var_indices[0]].kind == VarMeta::Kind::StratumComponent) {
      g.is_delta = false;
      g.member_vars.push_back({sg.var_indices[0], sg.var_indices[1], sg.var_indices[2],
                               sg.var_indices[3]});
      // Bounds must equal the measured table.
      const std::array<long, 4> lamc{g.lambda.l00, g.lambda.l01, g.lambda.l10, g.lambda.l11};
      for (int k = 0; k < 4; ++k)
        if (p_.lower[sg.var_indices[k]] != 0 || p_.upper[sg.var_indices[k]] != lamc[k])
          return false;
      if (g.multiplicity != 1) return false;
    } else {
      g.is_delta = true;
      if (static_cast<long>(sg.var_indices.size()) !=
          (g.lambda.l00 + 1) * (g.lambda.l01 + 1) * (g.lambda.l10 + 1) * (g.lambda.l11 + 1))
        return false;
      for (long v : sg.var_indices)
        if (p_.var_meta[v].kind != VarMeta::Kind::ClassDelta) return false;
    }
    build_states(sg, g);
    if (g.base_state < 0) return false;
    groups_.push_back(std::move(g));
  }

  // Cost/objective consistency: cost must equal N * (q(base) - q(state)).
  // The per-state residual r is minus chi2 times a variance contribution, so
  // it must be non-positive; the degeneracy handling below relies on that.
  for (const AggGroupModel& g : groups_) {
    const AggState& base = g.states[g.base_state];
    for (const AggState& st : g.states) {
      if (st.r > 0) return false;
      Rational dq;
      if (g.is_delta) {
        dq = p_.objective[base.delta_var] - p_.objective[st.delta_var];
      } else {
        const auto& vars = g.member_vars.front();
        for (int k = 0; k < 4; ++k)
          dq += p_.objective[vars[k]] * Rational(base.cells[k] - st.cells[k]);
      }
      if (dq * n_total_ != Rational(st.cost - base.cost)) return false;
    }
  }

  merge_identical_groups();
  scale_states();
  order_states_and_groups();
  build_suffixes();
  return true;
}

void AggregateSolver::merge_identical_groups() {
  std::vector<AggGroupModel> merged;
  for (AggGroupModel& g : groups_) {
    bool absorbed = false;
    if (!g.is_delta) {
      for (AggGroupModel& h : merged) {
        if (h.is_delta || h.n != g.n || h.m != g.m || !(h.lambda == g.lambda)) continue;
        // Identical strata are interchangeable; require exactly equal data.
        bool same = true;
        const auto& hv = h.member_vars.front();
        const auto& gv = g.member_vars.front();
        for (int k = 0; k < 4 && same; ++k)
          same = p_.quad_rank1[hv[k]] == p_.quad_rank1[gv[k]] &&
                 p_.quad_linear[hv[k]] == p_.quad_linear[gv[k]] &&
                 p_.objective[hv[k]] == p_.objective[gv[k]];
        if (!same) continue;
        for (std::size_t s = 0; s < h.states.size() && same; ++s)
          same = h.states[s].u == g.states[s].u && h.states[s].r == g.states[s].r &&
                 h.states[s].cost == g.states[s].cost;
        if (!same) continue;
        h.multiplicity += g.multiplicity;
        h.strata.insert(h.strata.end(), g.strata.begin(), g.strata.end());
        h.member_vars.push_back(g.member_vars.front());
        absorbed = true;
        break;
      }
    }
    if (!absorbed) merged.push_back(std::move(g));
  }
  groups_ = std::move(merged);
}

void AggregateSolver::scale_states() {
  for (const AggGroupModel& g : groups_)
    for (const AggState& st : g.states) {
      du_denom_ = lcm(du_denom_, rat_den(st.u));
      dr_denom_ = lcm(dr_denom_, rat_den(st.r));
    }
  for (AggGroupModel& g : groups_) {
    for (AggState& st : g.states) {
      st.u_scaled = rat_num(st.u) * (du_denom_ / rat_den(st.u));
      st.r_scaled = rat_num(st.r) * (dr_denom_ / rat_den(st.r));
    }
    const AggState base = g.states[g.base_state];
    for (AggState& st : g.states) {
      st.du = st.u_scaled - base.u_scaled;
      st.dr = st.r_scaled - base.r_scaled;
      st.du_d = static_cast<double>(Rational(st.du, du_denom_));
      st.dr_d = static_cast<double>(Rational(st.dr, dr_denom_));
    }
  }
}

void AggregateSolver::order_states_and_groups() {
  std::sort(groups_.begin(), groups_.end(), [](const AggGroupModel& a, const AggGroupModel& b) {
    if (a.n != b.n) return a.n > b.n;
    const long ai = a.strata.empty() ? -1 : a.strata.front();
    const long bi = b.strata.empty() ? -1 : b.strata.front();
    return ai < bi;
  });

  base_u_total_ = 0;
  base_r_total_ = 0;
  for (const AggGroupModel& g : groups_) {
    base_u_total_ += g.multiplicity * g.states[g.base_state].u_scaled;
    base_r_total_ += g.multiplicity * g.states[g.base_state].r_scaled;
  }

  // Exploration order: states making the most constraint progress per unit
  // cost first; the flip target determines the sign.
  const Rational u0(base_u_total_, du_denom_);
  for (AggGroupModel& g : groups_) {
    std::vector<long> idx(g.states.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<long>(i);
    std::vector<Rational> score(g.states.size());
    for (std::size_t i = 0; i < g.states.size(); ++i) {
      const AggState& st = g.states[i];
      if (st.cost == 0) {
        score[i] = 0;
        continue;
      }
      const Rational du(st.du, du_denom_);
      const Rational dr(st.dr, dr_denom_);
      Rational dg = 2 * u0 * du + du * du + dr;  // g shift when applied at the root
      if (leq_) dg = -dg;                        // progress means pushing g down
      score[i] = dg / st.cost;
    }
    std::sort(idx.begin(), idx.end(), [&](long a, long b) {
      if (score[a] != score[b]) return score[a] > score[b];
      if (g.states[a].cost != g.states[b].cost) return g.states[a].cost < g.states[b].cost;
      return g.states[a].cells < g.states[b].cells;
    });
    std::vector<AggState> ordered;
    ordered.reserve(g.states.size());
    for (long i : idx) ordered.push_back(g.states[i]);
    g.states = std::move(ordered);
    for (std::size_t s = 0; s < g.states.size(); ++s)
      if (g.states[s].cost == 0) g.base_state = static_cast<long>(s);
  }
}

void AggregateSolver::build_suffixes() {
  const long G = static_cast<long>(groups_.size());
  suffix_base_u_.assign(G + 1, 0);
  suffix_base_r_.assign(G + 1, 0);
  suffix_max_cost_.assign(G + 1, 0);
  suffix_zero_r_.assign(G + 1, 1);
  suffix_zero_r_cost_.assign(G + 1, 0);
  suffix_lower_hull_.assign(G + 1, {});
  suffix_hull_vertices_.assign(G + 1, {});

  std::vector<HullPoint> pts{{Rational(0), Rational(0)}};
  for (long gi = G - 1; gi >= 0; --gi) {
    const AggGroupModel& g = groups_[gi];
    suffix_base_u_[gi] = suffix_base_u_[gi + 1] + g.multiplicity * g.states[g.base_state].u_scaled;
    suffix_base_r_[gi] = suffix_base_r_[gi + 1] + g.multiplicity * g.states[g.base_state].r_scaled;
    suffix_max_cost_[gi] = suffix_max_cost_[gi + 1] + g.multiplicity * g.max_unit_cost;
    long zero_r_cost = -1;
    for (const AggState& st : g.states)
      if (st.r_scaled == 0 && (zero_r_cost < 0 || st.cost < zero_r_cost)) zero_r_cost = st.cost;
    suffix_zero_r_[gi] = suffix_zero_r_[gi + 1] && zero_r_cost >= 0;
    suffix_zero_r_cost_[gi] =
        suffix_zero_r_[gi] ? suffix_zero_r_cost_[gi + 1] + g.multiplicity * zero_r_cost : 0;
    std::vector<HullPoint> acc = suffix_lower_hull_[gi + 1];
    std::vector<HullPoint> acc_full = suffix_hull_vertices_[gi + 1];
    if (gi == G - 1) {
      acc = pts;
      acc_full = pts;
    }
    for (const AggState& st : g.states) {
      if (st.cost == 0) continue;
      HullPoint hp{Rational(st.du, du_denom_) / st.cost, Rational(st.dr, dr_denom_) / st.cost};
      acc.push_back(hp);
      acc_full.push_back(hp);
    }
    suffix_lower_hull_[gi] = lower_hull(std::move(acc));
    suffix_hull_vertices_[gi] = full_hull(std::move(acc_full));
  }
  suffix_lower_hull_[G] = pts;
  suffix_hull_vertices_[G] = pts;

  cost_lcm_ = 1;
  for (const AggGroupModel& g : groups_)
    for (const AggState& st : g.states)
      if (st.cost > 0) cost_lcm_ = lcm(cost_lcm_, BigInt(st.cost));
  drc_ = dr_denom_ * cost_lcm_;
  du2c2_ = du_denom_ * du_denom_ * cost_lcm_ * cost_lcm_;
  // Hull coordinates are absolute per-cost moves; the bound test works in
  // (u*Du, r*Dr) units, so scale by Du*C and Dr*C. Denominators divide
  // Du*cost (resp. Dr*cost), hence these divisions are exact.
  auto scale_hull = [&](const std::vector<HullPoint>& hull) {
    std::vector<std::pair<BigInt, BigInt>> out;
    out.reserve(hull.size());
    for (const HullPoint& hp : hull) {
      const BigInt xd = du_denom_ * cost_lcm_;
      const BigInt yd = dr_denom_ * cost_lcm_;
      if (xd % rat_den(hp.x) != 0 || yd % rat_den(hp.y) != 0)
        throw std::logic_error("hull scaling is not exact");
      out.emplace_back(rat_num(hp.x) * (xd / rat_den(hp.x)),
                       rat_num(hp.y) * (yd / rat_den(hp.y)));
    }
    return out;
  };
  suffix_lower_scaled_.resize(G + 1);
  suffix_full_scaled_.resize(G + 1);
  for (long gi = 0; gi <= G; ++gi) {
    suffix_lower_scaled_[gi] = scale_hull(suffix_lower_hull_[gi]);
    suffix_full_scaled_[gi] = scale_hull(suffix_hull_vertices_[gi]);
  }
}

bool AggregateSolver::exact_feasible(const BigInt& u_scaled, const BigInt& r_scaled) const {
  // g = (U/Du)^2 + R/Dr; sign decided by Dr*U^2 + Du^2*R. A zero variance
  // term (R == 0) is a degenerate point and decides Accept, whatever the
  // statistic.
  if (r_scaled == 0) return leq_;
  const BigInt t = dr_denom_ * u_scaled * u_scaled + du_denom_ * du_denom_ * r_scaled;
  return leq_ ? t <= 0 : t > 0;
}

// Can any completion of groups gi.. with extra cost <= budget satisfy the
// constraint? Relaxation: spent cost scales the convex hull of per-cost moves.
bool AggregateSolver::bound_admits(long gi, const BigInt& u_scaled, const BigInt& r_scaled,
                                   long budget, bool zero_r_prefix) const {
  if (budget < 0) return false;
  // A completion placing every unit on a zero-r state is degenerate and
  // feasible on the accept side, provided the cheapest such completion fits
  // the budget. (Unit moves within a group can split across zero-r states,
  // but each unit pays at least the group's cheapest one.)
  if (leq_ && zero_r_prefix && suffix_zero_r_[gi] && suffix_zero_r_cost_[gi] <= budget)
    return true;
  // All-integer evaluation of g over the budget-scaled hull: with
  // U = u0 + b*px/C and R = r0 + b*py/C, the sign of g matches
  // F = Dr*C*(u0*C + b*px)^2 + Du^2*C^2*(r0*C + b*py).
  const BigInt u0c = u_scaled * cost_lcm_;
  const BigInt r0c = r_scaled * cost_lcm_;
  auto vertex_value = [&](const std::pair<BigInt, BigInt>& v) {
    const BigInt a = u0c + budget * v.first;
    return drc_ * a * a + du2c2_ * (r0c + budget * v.second);
  };
  if (leq_) {
    const auto& hull = suffix_lower_scaled_[gi];
    for (std::size_t i = 0; i < hull.size(); ++i) {
      if (vertex_value(hull[i]) <= 0) return true;
      if (i + 1 < hull.size()) {
        // Interior minimum of the convex quadratic along the edge.
        const BigInt a_lin = u0c + budget * hull[i].first;
        const BigInt b_lin = budget * (hull[i + 1].first - hull[i].first);
        if (b_lin == 0) continue;
        const BigInt qa = drc_ * b_lin * b_lin;
        const BigInt qb =
            2 * drc_ * a_lin * b_lin + du2c2_ * budget * (hull[i + 1].second - hull[i].second);
        if (qb >= 0 || -qb >= 2 * qa) continue;  // minimizer outside (0,1)
        const BigInt qc = drc_ * a_lin * a_lin + du2c2_ * (r0c + budget * hull[i].second);
        if (4 * qa * qc <= qb * qb) return true;
      }
    }
    return false;
  }
  for (const auto& v : suffix_full_scaled_[gi])
    if (vertex_value(v) > 0) return true;
  return false;
}

void AggregateSolver::consider_leaf(const BigInt& u, const BigInt& r, long cost) {
  if (!exact_feasible(u, r)) return;
  if (incumbent_.found && cost >= incumbent_.cost) return;
  incumbent_.found = true;
  incumbent_.cost = cost;
  incumbent_.counts = counts_;
  if (log_) *log_ << "incumbent cost=" << cost << "\n";
}

void AggregateSolver::dfs(long gi, long si, long units_left, BigInt u, BigInt r, long cost,
                          bool zero_r_prefix) {
  const long G = static_cast<long>(groups_.size());
  if (!nodes_at_group_.empty() && gi < G) ++nodes_at_group_[gi];
  while (true) {
    if (++nodes_ >= limits_.max_nodes) {
      budget_hit_ = true;
      return;
    }
    if ((nodes_ & 1023) == 0 && Clock::now() >= limits_.deadline) {
      budget_hit_ = true;
      return;
    }
    if (gi == G) {
      consider_leaf(u, r, cost);
      return;
    }
    const AggGroupModel& g = groups_[gi];
    if (units_left == 0) {
      ++gi;
      si = 0;
      units_left = gi < G ? groups_[gi].multiplicity : 0;
      const long budget =
          incumbent_.found ? std::min<long>(incumbent_.cost - 1 - cost, suffix_max_cost_[gi])
                           : suffix_max_cost_[gi];
      if (!bound_admits(gi, u, r, budget, zero_r_prefix)) {
        if (log_) *log_ << "prune group=" << gi << " cost=" << cost << "\n";
        return;
      }
      continue;
    }
    if (si >= static_cast<long>(g.states.size())) return;  // units unplaced: dead end

    const AggState& st = g.states[si];
    long mu_max = units_left;
    if (st.cost > 0) {
      if (incumbent_.found) {
        const long affordable = (incumbent_.cost - 1 - cost) / st.cost;
        mu_max = std::min(mu_max, std::max<long>(affordable, 0));
      }
    }
    for (long mu = mu_max; mu >= 1; --mu) {
      counts_[gi][si] = mu;
      const BigInt nu = u + mu * st.du;
      const BigInt nr = r + mu * st.dr;
      const long ncost = cost + mu * st.cost;
      const long budget = incumbent_.found
                              ? std::min<long>(incumbent_.cost - 1 - ncost, suffix_max_cost_[gi])
                              : suffix_max_cost_[gi];
      const bool zr = zero_r_prefix && st.r_scaled == 0;
      if (budget >= 0 && bound_admits(gi, nu, nr, budget, zr))
        dfs(gi, si + 1, units_left - mu, nu, nr, ncost, zr);
      counts_[gi][si] = 0;
      if (budget_hit_) return;
    }
    ++si;  // mu = 0: advance in place
  }
}

void AggregateSolver::probe_single_groups() {
  // For each single state applied mu times (everything else at base), the
  // constraint value is quadratic in mu; find the cheapest feasible mu.
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    const AggGroupModel& g = groups_[gi];
    for (std::size_t si = 0; si < g.states.size(); ++si) {
      const AggState& st = g.states[si];
      if (st.cost == 0) continue;
      if (incumbent_.found && st.cost >= incumbent_.cost) continue;
      const long hi_units = g.multiplicity;
      auto value = [&](long mu) {
        const BigInt nu = base_u_total_ + mu * st.du;
        const BigInt nr = base_r_total_ + mu * st.dr;
        return exact_feasible(nu, nr);
      };
      long found = -1;
      if (leq_) {
        // g(mu) is convex; locate the feasible interval's left edge.
        long lo = 1, hi = hi_units;
        // First check the integer minimizer region by scanning bounds of the
        // convex parabola via binary search on the derivative sign.
        // Simpler: binary search the smallest feasible mu among [1, hi] if
        // feasibility is an interval; test the vertex first.
        // Exact vertex: mu* = -(2*U0*du*Dr*Du + dr*Du^2) / (2*du^2*Dr) in
        // scaled terms; clamp and test nearby integers.
        if (st.du != 0) {
          const Rational du(st.du, du_denom_);
          const Rational dr(st.dr, dr_denom_);
          const Rational u0(base_u_total_, du_denom_);
          const Rational vertex = -(2 * u0 * du + dr) / (2 * du * du);
          BigInt vfloor = rat_num(vertex) / rat_den(vertex);
          if (vertex < 0) vfloor -= 1;
          for (BigInt cand = vfloor; cand <= vfloor + 1; ++cand) {
            long c = cand < 1 ? 1 : (cand > hi_units ? hi_units : static_cast<long>(cand));
            if (value(c)) {
              // walk left to the smallest feasible mu by binary search
              long l = 1, rgt = c;
              while (l < rgt) {
                const long mid = l + (rgt - l) / 2;
                if (value(mid)) rgt = mid;
                else l = mid + 1;
              }
              found = l;
              break;
            }
          }
        } else {
          // linear in mu
          long l = 1, rgt = hi_units;
          if (value(rgt)) {
            while (l < rgt) {
              const long mid = l + (rgt - l) / 2;
              if (value(mid)) rgt = mid;
              else l = mid + 1;
            }
            found = l;
          }
        }
        (void)lo;
        (void)hi;
      } else {
        // g(mu) convex, feasibility = g > 0 holds outside an interval; the
        // smallest feasible mu is either 1 or past the right interval edge.
        if (value(1)) {
          found = 1;
        } else if (value(hi_units)) {
          long l = 1, rgt = hi_units;
          while (l < rgt) {
            const long mid = l + (rgt - l) / 2;
            if (value(mid)) rgt = mid;
            else l = mid + 1;
          }
          found = l;
        }
      }
      if (found > 0) {
        const long total = found * st.cost;
        if (!incumbent_.found || total < incumbent_.cost) {
          incumbent_.found = true;
          incumbent_.cost = total;
          incumbent_.counts.assign(groups_.size(), {});
          for (std::size_t k = 0; k < groups_.size(); ++k) {
            incumbent_.counts[k].assign(groups_[k].states.size(), 0);
            incumbent_.counts[k][groups_[k].base_state] = groups_[k].multiplicity;
          }
          incumbent_.counts[gi][si] = found;
          incumbent_.counts[gi][g.base_state] -= found;
        }
      }
    }
  }
}

void AggregateSolver::probe_greedy() {
  // Ratio greedy over unit moves (state -> costlier state), double-precision
  // scoring with exact feasibility checks.
  std::vector<std::vector<long>> cur(groups_.size());
  for (std::size_t k = 0; k < groups_.size(); ++k) {
    cur[k].assign(groups_[k].states.size(), 0);
    cur[k][groups_[k].base_state] = groups_[k].multiplicity;
  }
  BigInt u = base_u_total_, r = base_r_total_;
  double ud = static_cast<double>(Rational(u, du_denom_));
  double rd = static_cast<double>(Rational(r, dr_denom_));
  long cost = 0;
  const long step_cap = 2 * n_total_ + 200;
  const double sign = leq_ ? 1.0 : -1.0;      // want sign*g to go down

  for (long step = 0; step < step_cap; ++step) {
    if (exact_feasible(u, r)) {
      if (!incumbent_.found || cost < incumbent_.cost) {
        incumbent_.found = true;
        incumbent_.cost = cost;
        incumbent_.counts = cur;
      }
      return;
    }
    if (incumbent_.found && cost >= incumbent_.cost) return;
    const double g_now = sign * (ud * ud + rd);
    double best_ratio = 0;
    long bg = -1, bfrom = -1, bto = -1;
    for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
      const auto& sts = groups_[gi].states;
      for (std::size_t from = 0; from < sts.size(); ++from) {
        if (cur[gi][from] == 0) continue;
        for (std::size_t to = 0; to < sts.size(); ++to) {
          const long dc = sts[to].cost - sts[from].cost;
          if (dc <= 0) continue;
          const double nu = ud + sts[to].du_d - sts[from].du_d;
          const double nr = rd + sts[to].dr_d - sts[from].dr_d;
          const double progress = g_now - sign * (nu * nu + nr);
          if (progress <= 0) continue;
          const double ratio = progress / dc;
          if (ratio > best_ratio) {
            best_ratio = ratio;
            bg = static_cast<long>(gi);
            bfrom = static_cast<long>(from);
            bto = static_cast<long>(to);
          }
        }
      }
    }
    if (bg < 0) return;  // stuck
    const auto& sts = groups_[bg].states;
    u += sts[bto].du - sts[bfrom].du;
    r += sts[bto].dr - sts[bfrom].dr;
    ud += sts[bto].du_d - sts[bfrom].du_d;
    rd += sts[bto].dr_d - sts[bfrom].dr_d;
    cost += sts[bto].cost - sts[bfrom].cost;
    --cur[bg][bfrom];
    ++cur[bg][bto];
  }
}

std::vector<BigInt> AggregateSolver::decode(const Incumbent& inc) const {
  std::vector<BigInt> x(p_.num_vars, 0);
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    const AggGroupModel& g = groups_[gi];
    if (g.is_delta) {
      for (std::size_t si = 0; si < g.states.size(); ++si)
        if (inc.counts[gi][si] > 0) x[g.states[si].delta_var] = inc.counts[gi][si];
    } else {
      // Assign states (canonical cell order) to member strata in input order.
      std::vector<long> order(g.states.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<long>(i);
      std::sort(order.begin(), order.end(),
                [&](long a, long b) { return g.states[a].cells < g.states[b].cells; });
      // Members sorted by stratum index.
      std::vector<std::size_t> member_order(g.strata.size());
      for (std::size_t i = 0; i < member_order.size(); ++i) member_order[i] = i;
      std::sort(member_order.begin(), member_order.end(),
                [&](std::size_t a, std::size_t b) { return g.strata[a] < g.strata[b]; });
      std::size_t next_member = 0;
      for (long si : order) {
        for (long k = 0; k < inc.counts[gi][si]; ++k) {
          const auto& vars = g.member_vars[member_order[next_member++]];
          for (int c = 0; c < 4; ++c) x[vars[c]] = g.states[si].cells[c];
        }
      }
    }
  }
  return x;
}

SolveResult AggregateSolver::run(const SolverBudget& budget) {
  const auto start = Clock::now();
  limits_.max_nodes = budget.max_nodes;
  limits_.deadline = start + budget.max_time;

  probe_single_groups();
  probe_greedy();
  if (log_ && incumbent_.found) *log_ << "probe incumbent cost=" << incumbent_.cost << "\n";
  if (log_) {
    // Root relaxation value: smallest budget the bound admits.
    long lo = 0, hi = suffix_max_cost_[0];
    if (!bound_admits(0, base_u_total_, base_r_total_, hi, true)) {
      *log_ << "root bound: infeasible at any budget\n";
    } else {
      while (lo < hi) {
        const long mid = lo + (hi - lo) / 2;
        if (bound_admits(0, base_u_total_, base_r_total_, mid, true)) hi = mid;
        else lo = mid + 1;
      }
      *log_ << "root lower bound cost=" << lo << "\n";
    }
  }

  counts_.assign(groups_.size(), {});
  for (std::size_t k = 0; k < groups_.size(); ++k)
    counts_[k].assign(groups_[k].states.size(), 0);
  if (log_) nodes_at_group_.assign(groups_.size(), 0);

  // Root reachability: no feasible point at all?
  const bool root_possible =
      bound_admits(0, base_u_total_, base_r_total_, suffix_max_cost_[0], true);
  if (root_possible) {
    const long G = static_cast<long>(groups_.size());
    if (G > 0) dfs(0, 0, groups_[0].multiplicity, base_u_total_, base_r_total_, 0, true);
    else consider_leaf(base_u_total_, base_r_total_, 0), ++nodes_;
  }

  if (log_ && !nodes_at_group_.empty()) {
    *log_ << "nodes by group:";
    for (std::size_t k = 0; k < nodes_at_group_.size(); ++k)
      if (nodes_at_group_[k] > 0) *log_ << " " << k << ":" << nodes_at_group_[k];
    *log_ << "\n";
  }
  SolveResult res;
  res.nodes_explored = nodes_;
  res.wall_time = Clock::now() - start;
  if (budget_hit_) {
    res.status = SolveStatus::BudgetExceeded;
    res.bound_only = true;
    if (incumbent_.found) {
      res.assignment = decode(incumbent_);
      res.objective = p_.objective_value(res.assignment);
    }
    return res;
  }
  if (!incumbent_.found) {
    res.status = SolveStatus::Infeasible;
    return res;
  }
  res.status = SolveStatus::Optimal;
  res.assignment = decode(incumbent_);
  res.objective = p_.objective_value(res.assignment);
  // Internal consistency: the witness must satisfy the problem exactly.
  if (!p_.flip_achieved(res.assignment))
    throw std::logic_error("solver returned an assignment violating the constraint");
  return res;
}

// ---------------------------------------------------------------------------
// Generic fallback: plain DFS over variables with interval pruning. Intended
// for small hand-built problems without aggregate metadata.

class GenericSolver {
 public:
  GenericSolver(const IqclpProblem& p, std::ostream* log) : p_(p), log_(log) {}

  SolveResult run(const SolverBudget& budget);

 private:
  void dfs(long v);

  const IqclpProblem& p_;
  std::ostream* log_;
  std::vector<BigInt> x_;
  std::vector<Rational> w_partial_suffix_min_, w_partial_suffix_max_;
  std::vector<Rational> q1_suffix_min_, q1_suffix_max_;
  std::vector<Rational> obj_suffix_max_;
  std::vector<std::vector<Rational>> agg_suffix_min_, agg_suffix_max_;
  std::vector<std::vector<BigInt>> eq_suffix_min_, eq_suffix_max_;

  Rational w_dot_, q1_dot_, obj_;
  std::vector<Rational> agg_sum_;
  std::vector<BigInt> eq_sum_;

  bool found_ = false;
  Rational best_obj_;
  std::vector<BigInt> best_x_;
  std::uint64_t nodes_ = 0;
  bool budget_hit_ = false;
  SearchLimits limits_{};
};

SolveResult GenericSolver::run(const SolverBudget& budget) {
  const auto start = Clock::now();
  limits_.max_nodes = budget.max_nodes;
  limits_.deadline = start + budget.max_time;
  const long n = p_.num_vars;

  x_.assign(n, 0);
  agg_sum_.assign(p_.quad_aggregates.size(), Rational(0));
  eq_sum_.assign(p_.equalities.size(), BigInt(0));

  // Suffix interval tables over variables v..n-1.
  auto span = [&](const Rational& coef, long v) {
    const Rational lo = coef * Rational(p_.lower[v]);
    const Rational hi = coef * Rational(p_.upper[v]);
    return lo <= hi ? std::make_pair(lo, hi) : std::make_pair(hi, lo);
  };
  w_partial_suffix_min_.assign(n + 1, Rational(0));
  w_partial_suffix_max_.assign(n + 1, Rational(0));
  q1_suffix_min_.assign(n + 1, Rational(0));
  q1_suffix_max_.assign(n + 1, Rational(0));
  obj_suffix_max_.assign(n + 1, Rational(0));
  agg_suffix_min_.assign(p_.quad_aggregates.size(), std::vector<Rational>(n + 1, Rational(0)));
  agg_suffix_max_.assign(p_.quad_aggregates.size(), std::vector<Rational>(n + 1, Rational(0)));
  eq_suffix_min_.assign(p_.equalities.size(), std::vector<BigInt>(n + 1, BigInt(0)));
  eq_suffix_max_.assign(p_.equalities.size(), std::vector<BigInt>(n + 1, BigInt(0)));
  for (long v = n - 1; v >= 0; --v) {
    auto [wl, wh] = span(p_.quad_rank1[v], v);
    w_partial_suffix_min_[v] = w_partial_suffix_min_[v + 1] + wl;
    w_partial_suffix_max_[v] = w_partial_suffix_max_[v + 1] + wh;
    auto [ql, qh] = span(p_.quad_linear[v], v);
    q1_suffix_min_[v] = q1_suffix_min_[v + 1] + ql;
    q1_suffix_max_[v] = q1_suffix_max_[v + 1] + qh;
    auto [ol, oh] = span(p_.objective[v], v);
    obj_suffix_max_[v] = obj_suffix_max_[v + 1] + oh;
    (void)ol;
    for (std::size_t a = 0; a < p_.quad_aggregates.size(); ++a) {
      bool in = false;
      for (long av : p_.quad_aggregates[a].vars) in |= av == v;
      agg_suffix_min_[a][v] = agg_suffix_min_[a][v + 1] + (in ? Rational(p_.lower[v]) : 0);
      agg_suffix_max_[a][v] = agg_suffix_max_[a][v + 1] + (in ? Rational(p_.upper[v]) : 0);
    }
    for (std::size_t e = 0; e < p_.equalities.size(); ++e) {
      bool in = false;
      for (long ev : p_.equalities[e].vars) in |= ev == v;
      eq_suffix_min_[e][v] = eq_suffix_min_[e][v + 1] + (in ? p_.lower[v] : BigInt(0));
      eq_suffix_max_[e][v] = eq_suffix_max_[e][v + 1] + (in ? p_.upper[v] : BigInt(0));
    }
  }

  dfs(0);

  SolveResult res;
  res.nodes_explored = nodes_;
  res.wall_time = Clock::now() - start;
  if (budget_hit_) {
    res.status = SolveStatus::BudgetExceeded;
    res.bound_only = true;
    if (found_) {
      res.assignment = best_x_;
      res.objective = best_obj_;
    }
    return res;
  }
  if (!found_) {
    res.status = SolveStatus::Infeasible;
    return res;
  }
  res.status = SolveStatus::Optimal;
  res.assignment = best_x_;
  res.objective = best_obj_;
  return res;
}

void GenericSolver::dfs(long v) {
  if (++nodes_ >= limits_.max_nodes ||
      ((nodes_ & 255) == 0 && Clock::now() >= limits_.deadline)) {
    budget_hit_ = true;
    return;
  }
  const long n = p_.num_vars;
  if (found_ && obj_ + p_.objective_const + obj_suffix_max_[v] <= best_obj_) return;

  // Equality feasibility over remaining variables.
  for (std::size_t e = 0; e < p_.equalities.size(); ++e) {
    const BigInt need = p_.equalities[e].rhs - eq_sum_[e];
    if (need < eq_suffix_min_[e][v] || need > eq_suffix_max_[e][v]) return;
  }

  if (v == n) {
    Rational vt = q1_dot_;
    for (std::size_t a = 0; a < p_.quad_aggregates.size(); ++a)
      vt += p_.quad_aggregates[a].beta * agg_sum_[a] * agg_sum_[a];
    const Rational g = w_dot_ * w_dot_ + vt;
    // Degenerate points (zero variance term) decide Accept.
    const bool feasible =
        p_.quad_sense == QuadSense::LeqZero ? (g <= 0 || vt == 0) : (g > 0 && vt != 0);
    if (!feasible) return;
    const Rational obj = obj_ + p_.objective_const;
    if (!found_ || obj > best_obj_) {
      found_ = true;
      best_obj_ = obj;
      best_x_ = x_;
    }
    return;
  }

  // Interval bound on g over the remaining box.
  {
    auto interval_square = [](const Rational& lo, const Rational& hi) {
      Rational sq_lo = 0;
      if (lo > 0 || hi < 0) sq_lo = std::min(lo * lo, hi * hi);
      return std::make_pair(sq_lo, std::max(lo * lo, hi * hi));
    };
    const Rational wl = w_dot_ + w_partial_suffix_min_[v];
    const Rational wh = w_dot_ + w_partial_suffix_max_[v];
    const auto [sq_lo, sq_hi] = interval_square(wl, wh);
    Rational vt_lo = q1_dot_ + q1_suffix_min_[v];
    Rational vt_hi = q1_dot_ + q1_suffix_max_[v];
    for (std::size_t a = 0; a < p_.quad_aggregates.size(); ++a) {
      const Rational sl = agg_sum_[a] + agg_suffix_min_[a][v];
      const Rational sh = agg_sum_[a] + agg_suffix_max_[a][v];
      const auto [lo2, hi2] = interval_square(sl, sh);
      const Rational& beta = p_.quad_aggregates[a].beta;
      if (beta >= 0) {
        vt_lo += beta * lo2;
        vt_hi += beta * hi2;
      } else {
        vt_lo += beta * hi2;
        vt_hi += beta * lo2;
      }
    }
    const Rational g_lo = sq_lo + vt_lo;
    const Rational g_hi = sq_hi + vt_hi;
    const bool vt_can_vanish = vt_lo <= 0 && vt_hi >= 0;
    if (p_.quad_sense == QuadSense::LeqZero && g_lo > 0 && !vt_can_vanish) return;
    if (p_.quad_sense == QuadSense::GtZero && g_hi <= 0) return;
  }

  const bool descend = p_.objective[v] >= 0;
  const BigInt lo = p_.lower[v], hi = p_.upper[v];
  for (BigInt step = 0; step <= hi - lo; ++step) {
    const BigInt val = descend ? BigInt(hi - step) : BigInt(lo + step);
    x_[v] = val;
    const Rational rv(val);
    w_dot_ += p_.quad_rank1[v] * rv;
    q1_dot_ += p_.quad_linear[v] * rv;
    obj_ += p_.objective[v] * rv;
    for (std::size_t a = 0; a < p_.quad_aggregates.size(); ++a)
      for (long av : p_.quad_aggregates[a].vars)
        if (av == v) agg_sum_[a] += rv;
    for (std::size_t e = 0; e < p_.equalities.size(); ++e)
      for (long ev : p_.equalities[e].vars)
        if (ev == v) eq_sum_[e] += val;

    dfs(v + 1);

    w_dot_ -= p_.quad_rank1[v] * rv;
    q1_dot_ -= p_.quad_linear[v] * rv;
    obj_ -= p_.objective[v] * rv;
    for (std::size_t a = 0; a < p_.quad_aggregates.size(); ++a)
      for (long av : p_.quad_aggregates[a].vars)
        if (av == v) agg_sum_[a] -= rv;
    for (std::size_t e = 0; e < p_.equalities.size(); ++e)
      for (long ev : p_.equalities[e].vars)
        if (ev == v) eq_sum_[e] -= val;
    if (budget_hit_) return;
  }
  x_[v] = lo;
}

}  // namespace

SolveResult solve(const IqclpProblem& problem, const SolverBudget& budget,
                  std::ostream* search_log) {
  if (problem.num_vars <= 0) throw std::invalid_argument("problem has no variables");
  if (static_cast<long>(problem.lower.size()) != problem.num_vars ||
      static_cast<long>(problem.upper.size()) != problem.num_vars ||
      static_cast<long>(problem.objective.size()) != problem.num_vars ||
      static_cast<long>(problem.quad_rank1.size()) != problem.num_vars ||
      static_cast<long>(problem.quad_linear.size()) != problem.num_vars)
    throw std::invalid_argument("problem arrays have inconsistent sizes");
  for (long v = 0; v < problem.num_vars; ++v)
    if (problem.lower[v] > problem.upper[v])
      throw std::invalid_argument("variable " + std::to_string(v) + " has empty bounds");

  {
    AggregateSolver agg(problem, search_log);
    if (agg.prepare()) return agg.run(budget);
  }
  GenericSolver gen(problem, search_log);
  SolveResult res = gen.run(budget);
  if (res.status == SolveStatus::Optimal && !problem.flip_achieved(res.assignment))
    throw std::logic_error("solver returned an assignment violating the constraint");
  return res;
}

}  // namespace sensaudit
