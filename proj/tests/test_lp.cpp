#include <gtest/gtest.h>

#include "rwacert/error.hpp"
#include "rwacert/lp.hpp"
#include "rwacert/rng.hpp"
#include "support/oracles.hpp"

using namespace rwacert;
using namespace rwacert::lp;

TEST(Lp, ContradictoryBoundsInfeasible) {
  LpProblem p;
  p.lower = {-10};
  p.upper = {10};
  p.add({1.0}, Relation::Ge, 1.0);
  p.add({1.0}, Relation::Le, 0.0);
  EXPECT_FALSE(lp_feasible(p).feasible);

  LpProblem q;
  q.lower = {1};
  q.upper = {0};
  EXPECT_FALSE(lp_feasible(q).feasible);
}

TEST(Lp, EmptyConstraintSetIsFeasibleInBox) {
  LpProblem p;
  p.lower = {0, 0};
  p.upper = {1, 1};
  auto r = lp_feasible(p);
  ASSERT_TRUE(r.feasible);
  for (double x : r.point) {
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 1.0);
  }
}

TEST(Lp, OptimizesSmallProgram) {
  // max x + y  s.t. x + 2y <= 4, 3x + y <= 6, box [0, 10]
  LpProblem p;
  p.lower = {0, 0};
  p.upper = {10, 10};
  p.add({1, 2}, Relation::Le, 4);
  p.add({3, 1}, Relation::Le, 6);
  p.objective = {-1, -1};
  auto r = lp_solve(p);
  ASSERT_TRUE(r.feasible);
  EXPECT_NEAR(r.point[0], 1.6, 1e-9);
  EXPECT_NEAR(r.point[1], 1.2, 1e-9);
  EXPECT_NEAR(r.objective, -2.8, 1e-9);
}

TEST(Lp, EqualityAndFixedVariables) {
  LpProblem p;
  p.lower = {0.25, -1, -1};
  p.upper = {0.25, 1, 1};
  p.add({1, 1, 1}, Relation::Eq, 0.5);
  p.add({0, 1, -1}, Relation::Ge, 0.5);
  auto r = lp_feasible(p);
  ASSERT_TRUE(r.feasible);
  EXPECT_LT(max_violation(p, r.point), 1e-9);
  EXPECT_EQ(r.point[0], 0.25);
}

TEST(Lp, DegenerateCyclingExampleTerminates) {
  // Beale's classic cycling instance, bounded by a box.
  LpProblem p;
  p.lower = {0, 0, 0, 0};
  p.upper = {100, 100, 1, 100};
  p.add({0.25, -8, -1, 9}, Relation::Le, 0);
  p.add({0.5, -12, -0.5, 3}, Relation::Le, 0);
  p.add({0, 0, 1, 0}, Relation::Le, 1);
  p.objective = {-0.75, 20, -0.5, 6};
  auto r = lp_solve(p);
  ASSERT_TRUE(r.feasible);
  EXPECT_NEAR(r.objective, -1.25, 1e-9);
}

TEST(Lp, IterationCapRaisesStall) {
  LpProblem p;
  p.lower = {0, 0};
  p.upper = {1, 1};
  p.add({1, 1}, Relation::Ge, 1.5);
  LpOptions opt;
  opt.max_iterations = 1;
  try {
    lp_feasible(p, opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SolverStall);
  }
}

TEST(Lp, MatchesVertexEnumerationOracle) {
  Rng rng(31337);
  int feasible = 0, infeasible = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t n = 1 + rng.index(6);
    const std::size_t m = rng.index(11);
    LpProblem p;
    for (std::size_t j = 0; j < n; ++j) {
      double lo = rng.uniform(-2, 1);
      p.lower.push_back(lo);
      p.upper.push_back(lo + rng.uniform(0, 3));
    }
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<double> a(n);
      for (double& v : a) v = rng.index(4) == 0 ? 0.0 : rng.uniform(-2, 2);
      double u = rng.uniform01();
      Relation rel = u < 0.45 ? Relation::Le : (u < 0.9 ? Relation::Ge : Relation::Eq);
      p.add(a, rel, rng.uniform(-2, 2));
    }
    auto r = lp_feasible(p);
    bool want = oracle::vertex_enumeration_feasible(p);
    ASSERT_EQ(r.feasible, want) << "trial " << trial;
    if (r.feasible) {
      ++feasible;
      EXPECT_LT(max_violation(p, r.point), 1e-8);
    } else {
      ++infeasible;
    }
  }
  EXPECT_GT(feasible, 40);
  EXPECT_GT(infeasible, 40);
}
