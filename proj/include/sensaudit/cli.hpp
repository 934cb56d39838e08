#pragma once

#include "sensaudit/audit.hpp"

#include <string>

namespace sensaudit {

// Exit codes: 0 success, 2 validation error, 3 solver budget exceeded.
struct RunConfig {
  std::string command;  // analyze | design | pvalue | oracle
  std::string input;
  std::string output;  // empty = stdout
  Rational alpha = Rational(1, 20);
  std::string null_kind = "sharp";  // sharp | weak
  std::string method = "chisq";     // chisq | exact
  std::string sided = "one";        // one | two
  long replications = 1000;
  Rational p0, p1;
  bool p0_set = false, p1_set = false;
  std::uint64_t seed = 0;
  std::uint64_t budget_nodes = SolverBudget{}.max_nodes;
  double budget_seconds = 3600;
  BigInt enum_cap = 1000000;
  int oracle_cap = 20;
};

int run(const RunConfig& config);

}  // namespace sensaudit
