#include "sensaudit/solver.hpp"

#include "support.hpp"

#include <doctest.h>

#include <sstream>

using namespace sensaudit;
using sensaudit::test::make_experiment;

namespace {

const Rational kAlpha(1, 20);

NullSpec sharp_chisq(const Rational& alpha = kAlpha) {
  NullSpec spec;
  spec.null_kind = NullKind::Sharp;
  spec.method = DecisionMethod::ChiSquare;
  spec.alpha = alpha;
  return spec;
}

NullSpec sharp_exact(const Rational& alpha = kAlpha) {
  NullSpec spec = sharp_chisq(alpha);
  spec.method = DecisionMethod::ExactEnumeration;
  spec.sidedness = Sidedness::OneSidedUpper;
  return spec;
}

NullSpec weak_chisq(const Rational& alpha = kAlpha) {
  NullSpec spec = sharp_chisq(alpha);
  spec.null_kind = NullKind::Weak;
  return spec;
}

// Reference brute force written directly against the decision functions;
// independent of the production oracle's incremental machinery.
std::pair<bool, Rational> reference_wa(const StratifiedExperiment& exp, const NullSpec& spec) {
  const long n = exp.total_subjects();
  const OutcomeVector star = exp.measured_outcomes();
  const bool base = decide(exp, star, spec);
  bool found = false;
  Rational best;
  for (std::uint64_t mask = 0; mask < (std::uint64_t(1) << n); ++mask) {
    OutcomeVector y(n);
    for (long j = 0; j < n; ++j) y[j] = mask >> (n - 1 - j) & 1;
    if (decide(exp, y, spec) == base) continue;
    const Rational acc = accuracy(star, y);
    if (!found || acc > best) {
      found = true;
      best = acc;
    }
  }
  return {found, best};
}

}  // namespace

TEST_CASE("single treated subject: reject case solves to 1000/1001") {
  const auto exp = sensaudit::test::single_treated(1000);
  const IqclpProblem p = build_p1(exp, kAlpha);
  REQUIRE(p.quad_sense == QuadSense::LeqZero);
  const SolveResult res = solve(p);
  REQUIRE(res.status == SolveStatus::Optimal);
  CHECK(res.objective == Rational(1000, 1001));
  // The unique optimum flips the treated positive.
  CHECK(res.assignment == std::vector<BigInt>{0, 0, 0, 0});
}

TEST_CASE("accept case with no rejection region is infeasible") {
  // n=3, m=1: no outcome vector can reject at alpha = 0.05.
  const auto exp = make_experiment({{{1, 0, 0}, {0, 0, 0}}});
  const IqclpProblem p = build_p1(exp, kAlpha);
  REQUIRE(p.quad_sense == QuadSense::GtZero);
  const SolveResult res = solve(p);
  CHECK(res.status == SolveStatus::Infeasible);
}

TEST_CASE("all-zero quadratic data maximizes the linear objective over the box") {
  IqclpProblem p;
  p.num_vars = 3;
  p.lower = {0, 0, 0};
  p.upper = {3, 2, 5};
  p.objective = {Rational(1, 7), Rational(2, 7), Rational(0)};
  p.objective_const = Rational(1, 7);
  p.quad_rank1.assign(3, Rational(0));
  p.quad_linear.assign(3, Rational(0));
  p.quad_sense = QuadSense::LeqZero;
  const SolveResult res = solve(p);
  REQUIRE(res.status == SolveStatus::Optimal);
  CHECK(res.objective == Rational(1 + 3 + 4, 7));
  CHECK(res.assignment[0] == 3);
  CHECK(res.assignment[1] == 2);
}

TEST_CASE("oracle matches the pinned study values") {
  const OracleResult s1 = brute_force_wa(sensaudit::test::study1(), sharp_exact());
  REQUIRE(s1.overturnable);
  CHECK(s1.warning_accuracy == Rational(16, 17));
  const OracleResult s2 = brute_force_wa(sensaudit::test::study2(), sharp_exact());
  REQUIRE(s2.overturnable);
  CHECK(s2.warning_accuracy == Rational(15, 17));

  // Chi-square decision variants of the same two studies (derived fixtures).
  const OracleResult c1 = brute_force_wa(sensaudit::test::study1(), sharp_chisq());
  REQUIRE(c1.overturnable);
  CHECK(c1.warning_accuracy == Rational(15, 17));
  const OracleResult c2 = brute_force_wa(sensaudit::test::study2(), sharp_chisq());
  REQUIRE(c2.overturnable);
  CHECK(c2.warning_accuracy == Rational(15, 17));
}

TEST_CASE("oracle reports not-overturnable when no flip exists") {
  const auto exp = make_experiment({{{1, 0, 0}, {0, 0, 0}}});
  const OracleResult res = brute_force_wa(exp, sharp_exact());
  CHECK_FALSE(res.overturnable);
}

TEST_CASE("oracle enforces the subject cap") {
  const auto exp = sensaudit::test::study1();
  CHECK_THROWS_AS(brute_force_wa(exp, sharp_exact(), 10), std::invalid_argument);
}

TEST_CASE("oracle witness is the lowest lexicographic optimum") {
  std::mt19937_64 rng(401);
  for (int trial = 0; trial < 20; ++trial) {
    const auto exp = sensaudit::test::random_experiment(rng, 3, 2, 5, 10);
    const OracleResult res = brute_force_wa(exp, sharp_chisq(), 20, /*collect_all=*/true);
    if (!res.overturnable) continue;
    REQUIRE_FALSE(res.all_witnesses.empty());
    CHECK(res.witness == res.all_witnesses.front());
    for (const OutcomeVector& w : res.all_witnesses) {
      CHECK(accuracy(exp.measured_outcomes(), w) == res.warning_accuracy);
      CHECK(w >= res.witness);
    }
  }
}

TEST_CASE("oracle agrees with a direct reference implementation") {
  std::mt19937_64 rng(403);
  int done = 0;
  while (done < 25) {
    const auto exp = sensaudit::test::random_experiment(rng, 3, 2, 5, 10);
    for (const NullSpec& spec : {sharp_chisq(), sharp_exact()}) {
      const auto [found, best] = reference_wa(exp, spec);
      const OracleResult res = brute_force_wa(exp, spec);
      CHECK(res.overturnable == found);
      if (found) CHECK(res.warning_accuracy == best);
    }
    ++done;
  }
}

TEST_CASE("solver equals the oracle on random sharp-null instances") {
  std::mt19937_64 rng(405);
  int done = 0;
  while (done < 60) {
    const auto exp = sensaudit::test::random_experiment(rng);
    const Rational alpha = (rng() % 2) ? Rational(1, 20) : Rational(1, 10);
    NullSpec spec = sharp_chisq(alpha);
    const OracleResult oracle = brute_force_wa(exp, spec);

    const IqclpProblem p1 = build_p1(exp, alpha);
    const IqclpProblem p2 = build_p2(exp, alpha, build_unique_table_index(exp));
    const SolveResult r1 = solve(p1);
    const SolveResult r2 = solve(p2);

    if (!oracle.overturnable) {
      CHECK(r1.status == SolveStatus::Infeasible);
      CHECK(r2.status == SolveStatus::Infeasible);
    } else {
      REQUIRE(r1.status == SolveStatus::Optimal);
      REQUIRE(r2.status == SolveStatus::Optimal);
      CHECK(r1.objective == oracle.warning_accuracy);
      CHECK(r2.objective == oracle.warning_accuracy);
      CHECK(p1.sense_satisfied(constraint_value(p1, r1.assignment)));
    }
    ++done;
  }
}

TEST_CASE("solver equals the oracle on random weak-null instances") {
  std::mt19937_64 rng(407);
  int done = 0;
  while (done < 30) {
    const auto exp = sensaudit::test::random_weak_experiment(rng);
    NullSpec spec = weak_chisq();
    const OracleResult oracle = brute_force_wa(exp, spec);

    const IqclpProblem p3 = build_p3(exp, kAlpha);
    const IqclpProblem p4 = build_p4(exp, kAlpha, build_unique_table_index(exp));
    const SolveResult r3 = solve(p3);
    const SolveResult r4 = solve(p4);

    if (!oracle.overturnable) {
      CHECK(r3.status == SolveStatus::Infeasible);
      CHECK(r4.status == SolveStatus::Infeasible);
    } else {
      REQUIRE(r3.status == SolveStatus::Optimal);
      REQUIRE(r4.status == SolveStatus::Optimal);
      CHECK(r3.objective == oracle.warning_accuracy);
      CHECK(r4.objective == oracle.warning_accuracy);
    }
    ++done;
  }
}

TEST_CASE("returned assignments satisfy the stated sense exactly") {
  std::mt19937_64 rng(409);
  int done = 0;
  while (done < 30) {
    const auto exp = sensaudit::test::random_experiment(rng);
    const IqclpProblem p = build_p1(exp, kAlpha);
    const SolveResult res = solve(p);
    if (res.status != SolveStatus::Optimal) continue;
    const Rational g = constraint_value(p, res.assignment);
    CHECK(p.sense_satisfied(g));
    CHECK(res.objective == p.objective_value(res.assignment));
    ++done;
  }
}

TEST_CASE("solver runs are deterministic") {
  std::mt19937_64 rng(411);
  for (int trial = 0; trial < 10; ++trial) {
    const auto exp = sensaudit::test::random_experiment(rng);
    const IqclpProblem p = build_p1(exp, kAlpha);
    const SolveResult a = solve(p);
    const SolveResult b = solve(p);
    CHECK(a.status == b.status);
    CHECK(a.nodes_explored == b.nodes_explored);
    if (a.status == SolveStatus::Optimal) {
      CHECK(a.objective == b.objective);
      CHECK(a.assignment == b.assignment);
    }
  }
}

TEST_CASE("node budget produces an honest bound-only result") {
  const auto exp = sensaudit::test::single_treated(1000);
  const IqclpProblem p = build_p1(exp, kAlpha);
  SolverBudget budget;
  budget.max_nodes = 1;
  const SolveResult res = solve(p, budget);
  CHECK(res.status == SolveStatus::BudgetExceeded);
  CHECK(res.bound_only);
}

TEST_CASE("replayed problem dumps solve identically") {
  std::mt19937_64 rng(413);
  for (int trial = 0; trial < 10; ++trial) {
    const auto exp = sensaudit::test::random_experiment(rng);
    const IqclpProblem p = build_p1(exp, kAlpha);
    const IqclpProblem q = parse_problem(dump_problem(p));
    const SolveResult a = solve(p);
    const SolveResult b = solve(q);
    CHECK(a.status == b.status);
    if (a.status == SolveStatus::Optimal) {
      CHECK(a.objective == b.objective);
      CHECK(a.assignment == b.assignment);
    }
  }
}

TEST_CASE("search log emits progress lines when requested") {
  const auto exp = sensaudit::test::single_treated(20);
  const IqclpProblem p = build_p1(exp, kAlpha);
  std::ostringstream log;
  const SolveResult res = solve(p, SolverBudget{}, &log);
  CHECK(res.status == SolveStatus::Optimal);
  CHECK(log.str().find("incumbent") != std::string::npos);
}
