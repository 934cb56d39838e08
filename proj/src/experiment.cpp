#include "sensaudit/experiment.hpp"

#include <fstream>
#include <istream>
#include <numeric>
#include <sstream>

namespace sensaudit {

long Stratum::m() const {
  return std::accumulate(treated.begin(), treated.end(), 0L,
                         [](long acc, std::uint8_t z) { return acc + z; });
}

StratifiedExperiment::StratifiedExperiment(std::vector<Stratum> strata)
    : strata_(std::move(strata)) {
  if (strata_.empty()) throw std::invalid_argument("experiment has no strata");
  offsets_.reserve(strata_.size());
  for (const Stratum& s : strata_) {
    if (s.treated.size() != s.outcome.size())
      throw std::invalid_argument("stratum '" + s.label + "': treated/outcome size mismatch");
    const long n = s.n();
    const long m = s.m();
    if (n < 2 || m < 1 || m > n - 1)
      throw std::invalid_argument("degenerate stratum '" + s.label +
                                  "': needs both a treated and a control arm");
    for (std::uint8_t v : s.treated)
      if (v > 1) throw std::invalid_argument("stratum '" + s.label + "': treated not in {0,1}");
    for (std::uint8_t v : s.outcome)
      if (v > 1) throw std::invalid_argument("stratum '" + s.label + "': outcome not in {0,1}");
    offsets_.push_back(total_);
    total_ += n;
  }
  for (Stratum& s : strata_) {
    if (s.source_row.empty()) continue;
    if (s.source_row.size() != s.treated.size())
      throw std::invalid_argument("stratum '" + s.label + "': source_row size mismatch");
  }
  // Synthesized experiments get canonical row numbers (header + flat order).
  for (long i = 0; i < static_cast<long>(strata_.size()); ++i) {
    Stratum& s = strata_[i];
    if (s.source_row.empty()) {
      s.source_row.resize(s.treated.size());
      for (std::size_t j = 0; j < s.source_row.size(); ++j)
        s.source_row[j] = offsets_[i] + static_cast<long>(j) + 2;
    }
  }
}

OutcomeVector StratifiedExperiment::measured_outcomes() const {
  OutcomeVector y;
  y.reserve(total_);
  for (const Stratum& s : strata_) y.insert(y.end(), s.outcome.begin(), s.outcome.end());
  return y;
}

std::vector<std::uint8_t> StratifiedExperiment::treatment_indicators() const {
  std::vector<std::uint8_t> z;
  z.reserve(total_);
  for (const Stratum& s : strata_) z.insert(z.end(), s.treated.begin(), s.treated.end());
  return z;
}

namespace {

std::uint8_t parse_binary(const std::string& field, long row, const char* what) {
  if (field == "0") return 0;
  if (field == "1") return 1;
  throw std::invalid_argument("row " + std::to_string(row) + ": " + what + " must be 0 or 1, got '" +
                              field + "'");
}

}  // namespace

StratifiedExperiment load_experiment(std::istream& in) {
  std::string line;
  long row = 0;
  bool header_seen = false;
  std::vector<Stratum> strata;
  std::vector<std::string> order;  // first-appearance order of labels

  auto find_stratum = [&](const std::string& label) -> Stratum& {
    for (std::size_t i = 0; i < order.size(); ++i)
      if (order[i] == label) return strata[i];
    order.push_back(label);
    strata.push_back(Stratum{label, {}, {}, {}});
    return strata.back();
  };

  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "stratum,treated,outcome")
        throw std::invalid_argument("row " + std::to_string(row) +
                                    ": expected header 'stratum,treated,outcome'");
      header_seen = true;
      continue;
    }
    std::string f0, f1, f2, extra;
    std::stringstream ss(line);
    if (!std::getline(ss, f0, ',') || !std::getline(ss, f1, ',') || !std::getline(ss, f2, ','))
      throw std::invalid_argument("row " + std::to_string(row) + ": expected 3 comma-separated fields");
    if (std::getline(ss, extra, ','))
      throw std::invalid_argument("row " + std::to_string(row) + ": too many fields");
    if (f0.empty())
      throw std::invalid_argument("row " + std::to_string(row) + ": empty stratum label");
    Stratum& s = find_stratum(f0);
    s.treated.push_back(parse_binary(f1, row, "treated"));
    s.outcome.push_back(parse_binary(f2, row, "outcome"));
    s.source_row.push_back(row);
  }
  if (!header_seen) throw std::invalid_argument("empty input");
  if (strata.empty()) throw std::invalid_argument("no subject rows");
  return StratifiedExperiment(std::move(strata));
}

StratifiedExperiment load_experiment_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  return load_experiment(in);
}

std::vector<StratumTable> stratum_tables(const StratifiedExperiment& exp) {
  std::vector<StratumTable> tables;
  tables.reserve(exp.num_strata());
  for (const Stratum& s : exp.strata()) {
    StratumTable t;
    for (std::size_t j = 0; j < s.treated.size(); ++j) {
      if (s.treated[j]) {
        s.outcome[j] ? ++t.l11 : ++t.l10;
      } else {
        s.outcome[j] ? ++t.l01 : ++t.l00;
      }
    }
    tables.push_back(t);
  }
  return tables;
}

Rational accuracy(const OutcomeVector& y_star, const OutcomeVector& y) {
  if (y_star.size() != y.size()) throw std::invalid_argument("outcome vector length mismatch");
  long agree = 0;
  for (std::size_t j = 0; j < y.size(); ++j)
    if (y_star[j] == y[j]) ++agree;
  return Rational(BigInt(agree), BigInt(static_cast<long>(y.size())));
}

long alteration_count(const OutcomeVector& y_star, const OutcomeVector& y) {
  if (y_star.size() != y.size()) throw std::invalid_argument("outcome vector length mismatch");
  long diff = 0;
  for (std::size_t j = 0; j < y.size(); ++j)
    if (y_star[j] != y[j]) ++diff;
  return diff;
}

}  // namespace sensaudit
