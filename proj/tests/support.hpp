#pragma once

#include "sensaudit/formulation.hpp"

#include <algorithm>
#include <random>
#include <sstream>
#include <vector>

namespace sensaudit::test {

// Builds an experiment from per-stratum (Z, Y*) initializer lists.
inline StratifiedExperiment make_experiment(
    const std::vector<std::pair<std::vector<int>, std::vector<int>>>& strata) {
  std::vector<Stratum> out;
  int idx = 0;
  for (const auto& [z, y] : strata) {
    Stratum s;
    s.label = "s" + std::to_string(++idx);
    for (int v : z) s.treated.push_back(static_cast<std::uint8_t>(v));
    for (int v : y) s.outcome.push_back(static_cast<std::uint8_t>(v));
    out.push_back(std::move(s));
  }
  return StratifiedExperiment(std::move(out));
}

// Study pair used across the suites: two small stratified designs with known
// exact p-values and warning accuracies.
inline StratifiedExperiment study1() {
  return make_experiment({{{1, 0, 1}, {1, 0, 1}},
                          {{0, 0, 1, 0, 0, 0}, {0, 0, 1, 0, 0, 0}},
                          {{0, 0, 0, 1, 0, 0, 0, 0}, {0, 0, 0, 1, 0, 0, 0, 0}}});
}

inline StratifiedExperiment study2() {
  return make_experiment({{{1, 0, 0, 0, 0, 0, 0}, {0, 0, 0, 0, 0, 0, 0}},
                          {{1, 1, 0, 1, 0}, {1, 1, 0, 1, 0}},
                          {{0, 0, 1, 1, 0}, {0, 0, 1, 1, 0}}});
}

// One treated subject, `controls` controls; first subject treated & positive.
inline StratifiedExperiment single_treated(int controls) {
  std::vector<int> z(controls + 1, 0), y(controls + 1, 0);
  z[0] = 1;
  y[0] = 1;
  return make_experiment({{z, y}});
}

inline StratifiedExperiment random_experiment(std::mt19937_64& rng, int max_strata = 4,
                                              int min_n = 2, int max_n = 6,
                                              int subject_cap = 14) {
  while (true) {
    const int strata = 1 + static_cast<int>(rng() % max_strata);
    std::vector<std::pair<std::vector<int>, std::vector<int>>> spec;
    int total = 0;
    for (int i = 0; i < strata; ++i) {
      const int n = min_n + static_cast<int>(rng() % (max_n - min_n + 1));
      total += n;
      const int m = 1 + static_cast<int>(rng() % (n - 1));
      std::vector<int> z(n, 0), y(n);
      for (int j = 0; j < m; ++j) z[j] = 1;
      for (int j = n - 1; j > 0; --j) std::swap(z[j], z[rng() % (j + 1)]);
      for (int j = 0; j < n; ++j) y[j] = rng() % 2;
      spec.emplace_back(z, y);
    }
    if (total > subject_cap) continue;
    return make_experiment(spec);
  }
}

// Variant with both arms of every stratum >= 2 subjects (weak-null designs).
inline StratifiedExperiment random_weak_experiment(std::mt19937_64& rng, int subject_cap = 14) {
  while (true) {
    const int strata = 1 + static_cast<int>(rng() % 3);
    std::vector<std::pair<std::vector<int>, std::vector<int>>> spec;
    int total = 0;
    for (int i = 0; i < strata; ++i) {
      const int n = 4 + static_cast<int>(rng() % 3);
      total += n;
      const int m = 2 + static_cast<int>(rng() % (n - 3));
      std::vector<int> z(n, 0), y(n);
      for (int j = 0; j < m; ++j) z[j] = 1;
      for (int j = n - 1; j > 0; --j) std::swap(z[j], z[rng() % (j + 1)]);
      for (int j = 0; j < n; ++j) y[j] = rng() % 2;
      spec.emplace_back(z, y);
    }
    if (total > subject_cap) continue;
    return make_experiment(spec);
  }
}

inline OutcomeVector vec(const std::vector<int>& y) {
  OutcomeVector out;
  for (int v : y) out.push_back(static_cast<std::uint8_t>(v));
  return out;
}

// Enumerates every stratified assignment of the design and appends the MH
// statistic value of each one; an independent oracle for moments and exact
// p-values.
inline void enumerate_assignments(const StratifiedExperiment& exp, const OutcomeVector& y,
                                  std::vector<long>& out) {
  const long I = exp.num_strata();
  std::vector<std::vector<std::vector<std::uint8_t>>> per_stratum(I);
  for (long i = 0; i < I; ++i) {
    const long n = exp.stratum(i).n();
    const long m = exp.stratum(i).m();
    std::vector<std::uint8_t> mask(n, 0);
    std::fill(mask.begin(), mask.begin() + m, 1);
    std::sort(mask.begin(), mask.end());
    do {
      per_stratum[i].push_back(mask);
    } while (std::next_permutation(mask.begin(), mask.end()));
  }
  std::vector<std::size_t> pick(I, 0);
  while (true) {
    long t = 0;
    for (long i = 0; i < I; ++i) {
      const auto& z = per_stratum[i][pick[i]];
      const long off = exp.offset(i);
      for (long j = 0; j < exp.stratum(i).n(); ++j)
        if (z[j] && y[off + j]) ++t;
    }
    out.push_back(t);
    long i = 0;
    for (; i < I; ++i) {
      if (++pick[i] < per_stratum[i].size()) break;
      pick[i] = 0;
    }
    if (i == I) break;
  }
}

// Writes a true-outcome vector realizing per-stratum (Y00,Y01,Y10,Y11)
// counts, setting positives on the lowest-index subjects of each cell.
inline OutcomeVector realize_cells(const StratifiedExperiment& exp,
                                   const std::vector<std::array<long, 4>>& cells) {
  OutcomeVector y(exp.total_subjects(), 0);
  for (long i = 0; i < exp.num_strata(); ++i) {
    const Stratum& s = exp.stratum(i);
    long pos_left[2][2] = {{cells[i][0], cells[i][1]}, {cells[i][2], cells[i][3]}};
    for (long j = 0; j < s.n(); ++j) {
      long& left = pos_left[s.treated[j]][s.outcome[j]];
      if (left > 0) {
        y[exp.offset(i) + j] = 1;
        --left;
      }
    }
  }
  return y;
}

inline std::vector<std::array<long, 4>> random_upsilon_cells(const StratifiedExperiment& exp,
                                                             std::mt19937_64& rng) {
  std::vector<std::array<long, 4>> cells;
  for (const StratumTable& t : stratum_tables(exp)) {
    cells.push_back({static_cast<long>(rng() % (t.l00 + 1)),
                     static_cast<long>(rng() % (t.l01 + 1)),
                     static_cast<long>(rng() % (t.l10 + 1)),
                     static_cast<long>(rng() % (t.l11 + 1))});
  }
  return cells;
}

// Random delta-variable point satisfying every class equality.
inline std::vector<BigInt> random_delta_point(const IqclpProblem& p, std::mt19937_64& rng) {
  std::vector<BigInt> x(p.num_vars, 0);
  for (const LinearEquality& eq : p.equalities) {
    long left = static_cast<long>(eq.rhs);
    while (left > 0) {
      x[eq.vars[rng() % eq.vars.size()]] += 1;
      --left;
    }
  }
  return x;
}

// Expands a delta assignment into per-stratum cells (ascending delta order
// onto the class's strata in input order).
inline std::vector<std::array<long, 4>> delta_point_cells(const StratifiedExperiment& exp,
                                                          const IqclpProblem& p,
                                                          const UniqueTableIndex& idx,
                                                          const std::vector<BigInt>& x) {
  std::vector<std::array<long, 4>> cells(exp.num_strata());
  std::vector<std::vector<std::array<long, 4>>> per_class(idx.unique_tables.size());
  for (long v = 0; v < p.num_vars; ++v) {
    const VarMeta& meta = p.var_meta[v];
    for (BigInt k = 0; k < x[v]; ++k)
      per_class[meta.group].push_back(
          {meta.delta.d00, meta.delta.d01, meta.delta.d10, meta.delta.d11});
  }
  std::vector<std::size_t> next(idx.unique_tables.size(), 0);
  for (long i = 0; i < exp.num_strata(); ++i) {
    const long cls = idx.stratum_to_class[i];
    cells[i] = per_class[cls].at(next[cls]++);
  }
  return cells;
}

}  // namespace sensaudit::test
