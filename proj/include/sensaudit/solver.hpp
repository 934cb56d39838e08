#pragma once

#include "sensaudit/formulation.hpp"

#include <chrono>
#include <cstdint>
#include <iosfwd>

namespace sensaudit {

struct SolverBudget {
  std::uint64_t max_nodes = 200'000'000;
  std::chrono::milliseconds max_time = std::chrono::milliseconds(3'600'000);
};

enum class SolveStatus { Optimal, Infeasible, BudgetExceeded };

struct SolveResult {
  SolveStatus status = SolveStatus::Infeasible;
  Rational objective;               // optimum, or the incumbent bound
  std::vector<BigInt> assignment;   // witness point (empty if none found)
  bool bound_only = false;          // BudgetExceeded: objective is a lower bound only
  std::uint64_t nodes_explored = 0;
  std::chrono::duration<double> wall_time{0};
};

// Exact depth-first branch and bound. Problems carrying aggregate metadata
// (the builders' output) are solved over the reduced per-group state space;
// anything else falls back to a plain per-variable search.
SolveResult solve(const IqclpProblem& problem, const SolverBudget& budget = {},
                  std::ostream* search_log = nullptr);

struct OracleResult {
  bool overturnable = false;
  Rational warning_accuracy;                 // when overturnable
  OutcomeVector witness;                     // lowest lexicographic optimal witness
  std::vector<OutcomeVector> all_witnesses;  // populated when collect_all
  BigInt candidates_checked = 0;
};

// Exhaustive enumeration of all 2^N true-outcome vectors.
OracleResult brute_force_wa(const StratifiedExperiment& exp, const NullSpec& spec,
                            int subject_cap = 20, bool collect_all = false);

}  // namespace sensaudit
