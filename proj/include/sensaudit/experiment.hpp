#pragma once

#include "sensaudit/rational.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace sensaudit {

// Flat binary vector aligned with the experiment's subject ordering
// (strata in input order, subjects in row order within each stratum).
using OutcomeVector = std::vector<std::uint8_t>;

struct SubjectRecord {
  std::string stratum_id;
  int subject_index = 0;  // 0-based within the stratum
  std::uint8_t treated = 0;
  std::uint8_t measured_outcome = 0;
};

// Measured 2x2 table of one stratum: counts by (treated, measured outcome).
struct StratumTable {
  long l00 = 0;  // control, negative
  long l01 = 0;  // control, positive
  long l10 = 0;  // treated, negative
  long l11 = 0;  // treated, positive

  long n() const { return l00 + l01 + l10 + l11; }
  long m() const { return l10 + l11; }
  friend bool operator==(const StratumTable&, const StratumTable&) = default;
  friend auto operator<=>(const StratumTable&, const StratumTable&) = default;
};

struct Stratum {
  std::string label;
  std::vector<std::uint8_t> treated;
  std::vector<std::uint8_t> outcome;
  std::vector<long> source_row;  // 1-based input rows; synthesized when absent

  long n() const { return static_cast<long>(treated.size()); }
  long m() const;
};

// Immutable after construction; the constructor validates every invariant.
class StratifiedExperiment {
 public:
  explicit StratifiedExperiment(std::vector<Stratum> strata);

  long num_strata() const { return static_cast<long>(strata_.size()); }
  long total_subjects() const { return total_; }
  const Stratum& stratum(long i) const { return strata_.at(i); }
  const std::vector<Stratum>& strata() const { return strata_; }
  long offset(long i) const { return offsets_.at(i); }

  // Flat copy of Y* in canonical subject order.
  OutcomeVector measured_outcomes() const;
  // Flat copy of Z in canonical subject order.
  std::vector<std::uint8_t> treatment_indicators() const;

 private:
  std::vector<Stratum> strata_;
  std::vector<long> offsets_;
  long total_ = 0;
};

// CSV with header exactly `stratum,treated,outcome`; blank lines ignored.
StratifiedExperiment load_experiment(std::istream& in);
StratifiedExperiment load_experiment_file(const std::string& path);

std::vector<StratumTable> stratum_tables(const StratifiedExperiment& exp);

Rational accuracy(const OutcomeVector& y_star, const OutcomeVector& y);
long alteration_count(const OutcomeVector& y_star, const OutcomeVector& y);

}  // namespace sensaudit
