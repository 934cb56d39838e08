#include "sensaudit/solver.hpp"

#include <map>
#include <unordered_map>

namespace sensaudit {

namespace {

// Fast level-alpha decisions over bitmask outcome vectors. Chi-square tests
// compare pre-scaled integers; exact tests convolve per-stratum
// hypergeometric counts, cached per vector of stratum totals.
class DecisionEngine {
 public:
  DecisionEngine(const StratifiedExperiment& exp, const NullSpec& spec)
      : exp_(exp), spec_(spec), I_(exp.num_strata()) {
    spec_.validate();
    chi2_ = chisq_quantile(spec_.alpha);
    for (long i = 0; i < I_; ++i) {
      ns_.push_back(exp.stratum(i).n());
      ms_.push_back(exp.stratum(i).m());
    }
    if (spec_.method == DecisionMethod::ChiSquare && spec_.null_kind == NullKind::Sharp)
      prepare_sharp_chisq();
    if (spec_.method == DecisionMethod::ChiSquare && spec_.null_kind == NullKind::Weak)
      prepare_weak_chisq();
    if (spec_.method == DecisionMethod::ExactEnumeration) prepare_exact();
  }

  // a[i] = treated positives, c[i] = control positives per stratum.
  bool reject(const std::vector<long>& a, const std::vector<long>& c) const {
    switch (spec_.method) {
      case DecisionMethod::ChiSquare:
        return spec_.null_kind == NullKind::Sharp ? sharp_chisq(a, c) : weak_chisq(a, c);
      case DecisionMethod::ExactEnumeration:
        return exact(a, c);
    }
    return false;
  }

 private:
  void prepare_sharp_chisq() {
    de_ = 1;
    dv_ = 1;
    for (long i = 0; i < I_; ++i) {
      de_ = de_ / gcd(de_, BigInt(ns_[i])) * ns_[i];
      const BigInt den = BigInt(ns_[i]) * ns_[i] * (ns_[i] - 1);
      dv_ = dv_ / gcd(dv_, den) * den;
    }
    e_tab_.resize(I_);
    v_tab_.resize(I_);
    for (long i = 0; i < I_; ++i) {
      e_tab_[i].resize(ns_[i] + 1);
      v_tab_[i].resize(ns_[i] + 1);
      for (long t = 0; t <= ns_[i]; ++t) {
        e_tab_[i][t] = de_ / ns_[i] * ms_[i] * t;
        v_tab_[i][t] = dv_ / (BigInt(ns_[i]) * ns_[i] * (ns_[i] - 1)) * ms_[i] * t *
                       (ns_[i] - t) * (ns_[i] - ms_[i]);
      }
    }
    // Reject iff (T - E)^2 > chi2 * V, cross-multiplied to integers:
    // (T*de - E_s)^2 * dv * chi_den > chi_num * V_s * de^2.
    lhs_scale_ = dv_ * rat_den(chi2_);
    rhs_scale_ = rat_num(chi2_) * de_ * de_;
  }

  bool sharp_chisq(const std::vector<long>& a, const std::vector<long>& c) const {
    long t_total = 0;
    BigInt e_s = 0, v_s = 0;
    for (long i = 0; i < I_; ++i) {
      const long t = a[i] + c[i];
      t_total += a[i];
      e_s += e_tab_[i][t];
      v_s += v_tab_[i][t];
    }
    if (v_s == 0) return false;  // degenerate: accept
    const BigInt dev = t_total * de_ - e_s;
    return dev * dev * lhs_scale_ > rhs_scale_ * v_s;
  }

  void prepare_weak_chisq() {
    const long N = exp_.total_subjects();
    dt_ = 1;
    dvh_ = 1;
    for (long i = 0; i < I_; ++i) {
      const long k = ns_[i] - ms_[i];
      if (ms_[i] < 2 || k < 2)
        throw std::invalid_argument("stratum '" + exp_.stratum(i).label +
                                    "': weak-null decisions need at least 2 subjects per arm");
      const BigInt den_t = BigInt(N) * ms_[i] * k;
      dt_ = dt_ / gcd(dt_, den_t) * den_t;
      const BigInt den_v =
          BigInt(N) * N * ms_[i] * ms_[i] * (ms_[i] - 1) * k * k * (k - 1);
      dvh_ = dvh_ / gcd(dvh_, den_v) * den_v;
    }
    t_tab_.resize(I_);
    vh_tab_.resize(I_);
    for (long i = 0; i < I_; ++i) {
      const long k = ns_[i] - ms_[i];
      t_tab_[i].assign(ms_[i] + 1, std::vector<BigInt>(k + 1));
      vh_tab_[i].assign(ms_[i] + 1, std::vector<BigInt>(k + 1));
      for (long av = 0; av <= ms_[i]; ++av)
        for (long cv = 0; cv <= k; ++cv) {
          // n_i/N * (a/m - c/k), scaled by dt_
          t_tab_[i][av][cv] =
              dt_ / (BigInt(N) * ms_[i] * k) * ns_[i] * (BigInt(av) * k - BigInt(cv) * ms_[i]);
          // (n_i/N)^2 * (a(m-a)/(m^2(m-1)) + c(k-c)/(k^2(k-1))), scaled by dvh_
          const BigInt den_i =
              BigInt(N) * N * ms_[i] * ms_[i] * (ms_[i] - 1) * k * k * (k - 1);
          const BigInt part = BigInt(ns_[i]) * ns_[i] *
                              (BigInt(av) * (ms_[i] - av) * k * k * (k - 1) +
                               BigInt(cv) * (k - cv) * ms_[i] * ms_[i] * (ms_[i] - 1));
          vh_tab_[i][av][cv] = dvh_ / den_i * part;
        }
    }
    lhs_scale_w_ = dvh_ * rat_den(chi2_);
    rhs_scale_w_ = rat_num(chi2_) * dt_ * dt_;
  }

  bool weak_chisq(const std::vector<long>& a, const std::vector<long>& c) const {
    BigInt t_s = 0, v_s = 0;
    for (long i = 0; i < I_; ++i) {
      t_s += t_tab_[i][a[i]][c[i]];
      v_s += vh_tab_[i][a[i]][c[i]];
    }
    if (v_s == 0) return false;
    return t_s * t_s * lhs_scale_w_ > rhs_scale_w_ * v_s;
  }

  void prepare_exact() {
    total_assignments_ = 1;
    for (long i = 0; i < I_; ++i) {
      total_assignments_ *= binomial(ns_[i], ms_[i]);
      if (total_assignments_ > spec_.enumeration_cap)
        throw std::invalid_argument("assignment space exceeds the enumeration cap (" +
                                    spec_.enumeration_cap.str() + ")");
    }
    hyper_.resize(I_);
    for (long i = 0; i < I_; ++i) {
      hyper_[i].resize(ns_[i] + 1);
      for (long t = 0; t <= ns_[i]; ++t)
        for (long av = std::max(0L, ms_[i] - (ns_[i] - t)); av <= std::min(ms_[i], t); ++av)
          hyper_[i][t].emplace_back(av, binomial(t, av) * binomial(ns_[i] - t, ms_[i] - av));
    }
    de_ = 1;
    for (long i = 0; i < I_; ++i) de_ = de_ / gcd(de_, BigInt(ns_[i])) * ns_[i];
  }

  const std::vector<BigInt>& distribution(const std::vector<long>& t) const {
    // Key the cache by mixed-radix stratum totals.
    std::size_t key = 0;
    for (long i = 0; i < I_; ++i) key = key * (ns_[i] + 1) + t[i];
    auto it = dist_cache_.find(key);
    if (it != dist_cache_.end()) return it->second;
    long m_sum = 0;
    for (long i = 0; i < I_; ++i) m_sum += ms_[i];
    std::vector<BigInt> dist(m_sum + 1, 0), next(m_sum + 1);
    dist[0] = 1;
    long reach = 0;
    for (long i = 0; i < I_; ++i) {
      std::fill(next.begin(), next.end(), BigInt(0));
      for (const auto& [av, w] : hyper_[i][t[i]])
        for (long s = 0; s <= reach; ++s)
          if (dist[s] != 0) next[s + av] += dist[s] * w;
      reach += ms_[i];
      dist.swap(next);
    }
    return dist_cache_.emplace(key, std::move(dist)).first->second;
  }

  bool exact(const std::vector<long>& a, const std::vector<long>& c) const {
    std::vector<long> t(I_);
    long t_obs = 0;
    for (long i = 0; i < I_; ++i) {
      t[i] = a[i] + c[i];
      t_obs += a[i];
    }
    const std::vector<BigInt>& dist = distribution(t);
    BigInt tail = 0;
    if (spec_.sidedness == Sidedness::OneSidedUpper) {
      for (long s = t_obs; s < static_cast<long>(dist.size()); ++s) tail += dist[s];
    } else {
      BigInt e_s = 0;
      for (long i = 0; i < I_; ++i) e_s += de_ / ns_[i] * ms_[i] * t[i];
      const BigInt obs_dev = abs(BigInt(t_obs) * de_ - e_s);
      for (long s = 0; s < static_cast<long>(dist.size()); ++s)
        if (dist[s] != 0 && abs(BigInt(s) * de_ - e_s) >= obs_dev) tail += dist[s];
    }
    // p <= alpha, cross-multiplied.
    return tail * rat_den(spec_.alpha) <= rat_num(spec_.alpha) * total_assignments_;
  }

  const StratifiedExperiment& exp_;
  NullSpec spec_;
  long I_;
  Rational chi2_;
  std::vector<long> ns_, ms_;
  // sharp chi-square
  BigInt de_ = 1, dv_ = 1, lhs_scale_ = 1, rhs_scale_ = 1;
  std::vector<std::vector<BigInt>> e_tab_, v_tab_;
  // weak chi-square
  BigInt dt_ = 1, dvh_ = 1, lhs_scale_w_ = 1, rhs_scale_w_ = 1;
  std::vector<std::vector<std::vector<BigInt>>> t_tab_, vh_tab_;
  // exact
  BigInt total_assignments_ = 1;
  std::vector<std::vector<std::vector<std::pair<long, BigInt>>>> hyper_;
  mutable std::unordered_map<std::size_t, std::vector<BigInt>> dist_cache_;
};

}  // namespace

OracleResult brute_force_wa(const StratifiedExperiment& exp, const NullSpec& spec,
                            int subject_cap, bool collect_all) {
  const long N = exp.total_subjects();
  if (N > subject_cap)
    throw std::invalid_argument("brute force supports at most " + std::to_string(subject_cap) +
                                " subjects, got " + std::to_string(N));
  const DecisionEngine engine(exp, spec);
  const long I = exp.num_strata();
  const auto z = exp.treatment_indicators();
  const auto y_star = exp.measured_outcomes();

  std::vector<long> a(I), c(I);
  auto fill_counts = [&](std::uint64_t mask) {
    std::fill(a.begin(), a.end(), 0L);
    std::fill(c.begin(), c.end(), 0L);
    for (long i = 0; i < I; ++i) {
      const long off = exp.offset(i);
      const long n = exp.stratum(i).n();
      for (long j = 0; j < n; ++j) {
        // Subject 0 is the most significant bit so masks enumerate vectors
        // in lexicographic order.
        if (mask >> (N - 1 - (off + j)) & 1) z[off + j] ? ++a[i] : ++c[i];
      }
    }
  };

  std::uint64_t star_mask = 0;
  for (long j = 0; j < N; ++j)
    if (y_star[j]) star_mask |= std::uint64_t(1) << (N - 1 - j);

  fill_counts(star_mask);
  const bool base_reject = engine.reject(a, c);

  OracleResult res;
  res.candidates_checked = BigInt(1) << N;
  long best_agree = -1;
  std::uint64_t best_mask = 0;

  const std::uint64_t end = std::uint64_t(1) << N;
  for (std::uint64_t mask = 0; mask < end; ++mask) {
    const long agree = N - __builtin_popcountll(mask ^ star_mask);
    if (agree <= best_agree) continue;  // cannot strictly improve
    fill_counts(mask);
    if (engine.reject(a, c) == base_reject) continue;
    best_agree = agree;
    best_mask = mask;
  }

  if (best_agree < 0) {
    res.overturnable = false;
    return res;
  }
  res.overturnable = true;
  res.warning_accuracy = Rational(best_agree, N);
  auto to_vector = [&](std::uint64_t mask) {
    OutcomeVector y(N);
    for (long j = 0; j < N; ++j) y[j] = mask >> (N - 1 - j) & 1;
    return y;
  };
  res.witness = to_vector(best_mask);

  if (collect_all) {
    for (std::uint64_t mask = 0; mask < end; ++mask) {
      const long agree = N - __builtin_popcountll(mask ^ star_mask);
      if (agree != best_agree) continue;
      fill_counts(mask);
      if (engine.reject(a, c) == base_reject) continue;
      res.all_witnesses.push_back(to_vector(mask));
    }
  }
  return res;
}

}  // namespace sensaudit
