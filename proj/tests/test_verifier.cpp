#include <gtest/gtest.h>

#include "rwacert/error.hpp"
#include "rwacert/rng.hpp"
#include "rwacert/verifier.hpp"
#include "support/oracles.hpp"

using namespace rwacert;
using namespace rwacert::verifier;
using rwacert::mlp::MlpModel;

namespace {

InputRegion random_box(std::size_t M, Rng& rng, double max_width = 0.6) {
  InputRegion r;
  for (std::size_t i = 0; i < M; ++i) {
    double w = rng.uniform(0.0, max_width);
    double lo = rng.uniform(-0.5, 1.0);
    r.lower.push_back(lo);
    r.upper.push_back(lo + w);
  }
  return r;
}

void expect_valid_witness(const MlpModel& m, const InputRegion& r, const Verdict& v) {
  ASSERT_TRUE(v.sat);
  EXPECT_TRUE(r.contains(v.witness, 1e-9));
  EXPECT_EQ(oracle::brute_class(m, v.witness), v.witness_class);
  EXPECT_EQ(v.witness_class, v.target);
}

}  // namespace

TEST(IntervalBounds, ZeroWidthBoxIsExact) {
  Rng rng(1);
  auto m = oracle::random_model(5, 10, rng);
  std::vector<double> h{0.1, 0.2, 0.3, 0.15, 0.25};
  auto b = interval_bounds(m, InputRegion::point(h));
  auto z = mlp::hidden_preactivations(m, h);
  for (std::size_t j = 0; j < 10; ++j) {
    EXPECT_NEAR(b.hidden_lo[j], z[j], 1e-12);
    EXPECT_NEAR(b.hidden_hi[j], z[j], 1e-12);
  }
}

TEST(IntervalBounds, ContainSampledPreactivations) {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    auto m = oracle::random_model(1 + rng.index(6), 10, rng);
    auto r = random_box(m.input_dim, rng);
    auto b = interval_bounds(m, r);
    for (int s = 0; s < 10000; ++s) {
      std::vector<double> x(m.input_dim);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(r.lower[i], r.upper[i]);
      auto z = mlp::hidden_preactivations(m, x);
      for (std::size_t j = 0; j < z.size(); ++j) {
        ASSERT_GE(z[j], b.hidden_lo[j] - 1e-12);
        ASSERT_LE(z[j], b.hidden_hi[j] + 1e-12);
      }
      auto y = mlp::forward(m, x);
      for (std::size_t c = 0; c < 4; ++c) {
        ASSERT_GE(y[c], b.logit_lo[c] - 1e-12);
        ASSERT_LE(y[c], b.logit_hi[c] + 1e-12);
      }
    }
  }
}

TEST(IntervalBounds, WideningNeverTightens) {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    auto m = oracle::random_model(4, 10, rng);
    auto r = random_box(4, rng);
    auto wide = r;
    for (std::size_t i = 0; i < 4; ++i) {
      wide.lower[i] -= rng.uniform01() * 0.2;
      wide.upper[i] += rng.uniform01() * 0.2;
    }
    auto a = interval_bounds(m, r), b = interval_bounds(m, wide);
    for (std::size_t j = 0; j < 10; ++j) {
      EXPECT_LE(b.hidden_lo[j], a.hidden_lo[j]);
      EXPECT_GE(b.hidden_hi[j], a.hidden_hi[j]);
    }
  }
}

TEST(Verifier, PointRegion) {
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    auto m = oracle::random_model(5, 10, rng);
    std::vector<double> h(5);
    for (double& x : h) x = rng.uniform01();
    auto region = InputRegion::point(h);
    auto cls = mlp::classify(m, h);
    for (std::size_t target = 0; target < 4; ++target) {
      auto v = verify_query(m, region, target);
      EXPECT_EQ(v.sat, target == cls);
      if (v.sat) {
        expect_valid_witness(m, region, v);
        EXPECT_EQ(v.witness, h);
      }
    }
    EXPECT_TRUE(verify_local_robustness(m, region, cls).robust);
  }
}

TEST(Verifier, AgreesWithPatternOracle) {
  Rng rng(5);
  int sat = 0, unsat = 0;
  for (int t = 0; t < 150; ++t) {
    const std::size_t M = 1 + rng.index(6);
    auto m = oracle::random_model(M, 10, rng);
    auto r = random_box(M, rng);
    std::size_t target = rng.index(4);
    auto v = verify_query(m, r, target);
    auto ref = oracle::pattern_oracle(m, r, target);
    ASSERT_EQ(v.sat, ref.sat) << "instance " << t;
    if (v.sat) {
      expect_valid_witness(m, r, v);
      ++sat;
    } else {
      ++unsat;
    }
  }
  EXPECT_GT(sat, 20);
  EXPECT_GT(unsat, 20);
}

TEST(Verifier, GridHitsImplySat) {
  Rng rng(6);
  for (int t = 0; t < 40; ++t) {
    const std::size_t M = 1 + rng.index(3);
    auto m = oracle::random_model(M, 10, rng);
    auto r = random_box(M, rng);
    auto hit = oracle::grid_classes(m, r, 40);
    for (std::size_t c = 0; c < 4; ++c) {
      if (hit[c]) EXPECT_TRUE(verify_query(m, r, c).sat) << "instance " << t << " class " << c;
    }
  }
}

TEST(Verifier, PruningDoesNotChangeVerdicts) {
  Rng rng(7);
  VerifierOptions none;
  none.ibp_pruning = false;
  none.relaxation_pruning = false;
  VerifierOptions ibp_only;
  ibp_only.relaxation_pruning = false;
  for (int t = 0; t < 100; ++t) {
    const std::size_t M = 1 + rng.index(5);
    auto m = oracle::random_model(M, 8, rng);
    auto r = random_box(M, rng);
    std::size_t target = rng.index(4);
    auto full = verify_query(m, r, target);
    auto a = verify_query(m, r, target, none);
    auto b = verify_query(m, r, target, ibp_only);
    EXPECT_EQ(full.sat, a.sat);
    EXPECT_EQ(full.sat, b.sat);
    EXPECT_LE(b.stats.nodes, a.stats.nodes);
  }
}

TEST(Verifier, Deterministic) {
  Rng rng(8);
  auto m = oracle::random_model(4, 10, rng);
  auto r = random_box(4, rng, 1.0);
  for (std::size_t target = 0; target < 4; ++target) {
    auto a = verify_query(m, r, target), b = verify_query(m, r, target);
    EXPECT_EQ(a.sat, b.sat);
    EXPECT_EQ(a.witness, b.witness);
    EXPECT_EQ(a.stats.nodes, b.stats.nodes);
  }
}

TEST(Verifier, LinearConstraintsRestrictRegion) {
  // logits: class 1 wins iff x0 > x1. The box reaches both classes, but the
  // constraint x0 - x1 <= -0.1 removes every class-1 point.
  MlpModel m = MlpModel::zeros(2, 2);
  m.weight1(0, 0) = 1;
  m.weight1(0, 1) = -1;
  m.weight1(1, 0) = -1;
  m.weight1(1, 1) = 1;
  m.weight2(1, 0) = 1;
  m.weight2(0, 1) = 1;
  m.b2 = {0, 0, -1, -1};
  auto box = InputRegion::box({0, 0}, {1, 1});
  EXPECT_TRUE(verify_query(m, box, 1).sat);
  auto cut = box;
  cut.linear.push_back({{1, -1}, lp::Relation::Le, -0.1});
  EXPECT_FALSE(verify_query(m, cut, 1).sat);
  auto v = verify_query(m, cut, 0);
  expect_valid_witness(m, cut, v);
}

TEST(Verifier, TieBreakSemantics) {
  // All logits equal everywhere: class 0 reachable, others not.
  MlpModel m = MlpModel::zeros(2, 3);
  auto box = InputRegion::box({0, 0}, {1, 1});
  EXPECT_TRUE(verify_query(m, box, 0).sat);
  for (std::size_t t = 1; t < 4; ++t) {
    auto v = verify_query(m, box, t);
    EXPECT_FALSE(v.sat);
  }
}

TEST(Verifier, FindsGridCounterexampleAroundEnvelope) {
  // Search random models for a box around a class-1 point that a grid scan
  // shows also contains class 2, then require the verifier to report it.
  Rng rng(9);
  int found = 0;
  for (int t = 0; t < 2000 && found < 10; ++t) {
    auto m = oracle::random_model(3, 10, rng);
    std::vector<double> h(3);
    for (double& x : h) x = rng.uniform01();
    if (mlp::classify(m, h) != 1) continue;
    InputRegion r;
    for (double x : h) {
      r.lower.push_back(std::max(0.0, x - 0.15));
      r.upper.push_back(x + 0.15);
    }
    auto hit = oracle::grid_classes(m, r, 25);
    if (!hit[2]) continue;
    ++found;
    auto rv = verify_local_robustness(m, r, 1, {}, true);
    ASSERT_FALSE(rv.robust);
    bool has2 = false;
    for (const auto& cx : rv.counterexamples) {
      expect_valid_witness(m, r, cx);
      has2 |= cx.witness_class == 2;
    }
    EXPECT_TRUE(has2);
    // first-Sat mode reports the lowest counterexample class
    auto first = verify_local_robustness(m, r, 1);
    ASSERT_NE(first.first(), nullptr);
    EXPECT_EQ(first.first()->target, rv.counterexamples.front().target);
  }
  EXPECT_GT(found, 0);
}

TEST(Verifier, NestedRegionsAreMonotone) {
  Rng rng(10);
  for (int t = 0; t < 150; ++t) {
    auto m = oracle::random_model(3, 10, rng);
    std::vector<double> h(3);
    for (double& x : h) x = rng.uniform01();
    auto cls = mlp::classify(m, h);
    bool was_robust = true;
    for (double eps : {0.0, 0.02, 0.05, 0.1, 0.2, 0.4}) {
      InputRegion r;
      for (double x : h) {
        r.lower.push_back(x - eps);
        r.upper.push_back(x + eps);
      }
      bool robust = verify_local_robustness(m, r, cls).robust;
      if (!was_robust) EXPECT_FALSE(robust) << "instance " << t << " eps " << eps;
      was_robust = robust;
    }
  }
}

TEST(Verifier, RejectsBadInput) {
  auto m = MlpModel::zeros(2, 2);
  EXPECT_THROW(verify_query(m, InputRegion::box({0}, {1}), 0), Error);
  EXPECT_THROW(verify_query(m, InputRegion::box({0, 1}, {1, 0}), 0), Error);
  EXPECT_THROW(verify_query(m, InputRegion::box({0, 0}, {1, 1}), 4), Error);
}
