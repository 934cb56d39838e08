#pragma once

#include "sensaudit/experiment.hpp"

#include <vector>

namespace sensaudit {

// Deduplicated measured 2x2 tables, first-appearance order.
struct UniqueTableIndex {
  std::vector<StratumTable> unique_tables;
  std::vector<long> multiplicity;       // P_s per unique table
  std::vector<long> stratum_to_class;   // stratum index -> class s
};

UniqueTableIndex build_unique_table_index(const StratifiedExperiment& exp);

// Counts of true-positive outcomes by (arm, measured value) within one class.
struct DeltaTable {
  long d00 = 0;
  long d01 = 0;
  long d10 = 0;
  long d11 = 0;
  friend bool operator==(const DeltaTable&, const DeltaTable&) = default;
  friend auto operator<=>(const DeltaTable&, const DeltaTable&) = default;
};

// All (l00+1)(l01+1)(l10+1)(l11+1) tables in lexicographic (d00,d01,d10,d11) order.
std::vector<DeltaTable> enumerate_delta_tables(const StratumTable& cls);

enum class DesignType { TypeI, TypeII };

struct SymmetryDiagnostics {
  double log_within = 0;   // log |G_within| = sum of log factorials of table cells
  double log_between = 0;  // log |G_between| = sum of log P_s!
  BigInt p1_variables;     // 4I
  BigInt p2_variables;     // sum of the per-class delta-table counts
  DesignType type = DesignType::TypeI;
  bool criteria_agree = true;  // group-size comparison agrees with the variable-count rule
};

std::pair<double, double> log_group_sizes(const StratifiedExperiment& exp);

SymmetryDiagnostics symmetry_diagnostics(const StratifiedExperiment& exp);
DesignType classify_design(const StratifiedExperiment& exp);

}  // namespace sensaudit
