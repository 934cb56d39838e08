#include "sensaudit/symmetry.hpp"

#include <cmath>

namespace sensaudit {

UniqueTableIndex build_unique_table_index(const StratifiedExperiment& exp) {
  UniqueTableIndex idx;
  const auto tables = stratum_tables(exp);
  idx.stratum_to_class.reserve(tables.size());
  for (const StratumTable& t : tables) {
    long cls = -1;
    for (std::size_t s = 0; s < idx.unique_tables.size(); ++s)
      if (idx.unique_tables[s] == t) {
        cls = static_cast<long>(s);
        break;
      }
    if (cls < 0) {
      cls = static_cast<long>(idx.unique_tables.size());
      idx.unique_tables.push_back(t);
      idx.multiplicity.push_back(0);
    }
    ++idx.multiplicity[cls];
    idx.stratum_to_class.push_back(cls);
  }
  return idx;
}

std::vector<DeltaTable> enumerate_delta_tables(const StratumTable& cls) {
  std::vector<DeltaTable> out;
  out.reserve((cls.l00 + 1) * (cls.l01 + 1) * (cls.l10 + 1) * (cls.l11 + 1));
  for (long d00 = 0; d00 <= cls.l00; ++d00)
    for (long d01 = 0; d01 <= cls.l01; ++d01)
      for (long d10 = 0; d10 <= cls.l10; ++d10)
        for (long d11 = 0; d11 <= cls.l11; ++d11) out.push_back({d00, d01, d10, d11});
  return out;
}

std::pair<double, double> log_group_sizes(const StratifiedExperiment& exp) {
  double log_within = 0;
  for (const StratumTable& t : stratum_tables(exp))
    log_within += std::lgamma(t.l00 + 1.0) + std::lgamma(t.l01 + 1.0) +
                  std::lgamma(t.l10 + 1.0) + std::lgamma(t.l11 + 1.0);
  double log_between = 0;
  for (long p : build_unique_table_index(exp).multiplicity) log_between += std::lgamma(p + 1.0);
  return {log_within, log_between};
}

SymmetryDiagnostics symmetry_diagnostics(const StratifiedExperiment& exp) {
  SymmetryDiagnostics d;
  std::tie(d.log_within, d.log_between) = log_group_sizes(exp);
  d.p1_variables = BigInt(4) * exp.num_strata();
  d.p2_variables = 0;
  for (const StratumTable& t : build_unique_table_index(exp).unique_tables)
    d.p2_variables +=
        BigInt(t.l00 + 1) * (t.l01 + 1) * (t.l10 + 1) * (t.l11 + 1);
  // Adaptive rule: pick the formulation family with fewer decision variables,
  // ties toward Type I.
  d.type = d.p1_variables <= d.p2_variables ? DesignType::TypeI : DesignType::TypeII;
  const bool within_dominates = d.log_within >= d.log_between;
  d.criteria_agree = within_dominates == (d.type == DesignType::TypeI);
  return d;
}

DesignType classify_design(const StratifiedExperiment& exp) {
  return symmetry_diagnostics(exp).type;
}

}  // namespace sensaudit
