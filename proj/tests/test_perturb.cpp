#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "rwacert/error.hpp"
#include "rwacert/perturb.hpp"
#include "rwacert/rng.hpp"
#include "rwacert/telemetry.hpp"

using namespace rwacert;
using namespace rwacert::perturb;

namespace {

TimeSeries nominal_series(std::uint64_t seed, std::size_t n = 4000) {
  telemetry::GenConfig cfg;
  cfg.seed = seed;
  cfg.n_samples = n;
  return telemetry::generate_series(telemetry::AnomalyProfile::for_status(Status::nominal()), cfg).series;
}

TimeSeries c_series(std::uint64_t seed) {
  telemetry::GenConfig cfg;
  cfg.seed = seed;
  return telemetry::generate_series(telemetry::AnomalyProfile::for_status(Status::make(AnomalyKind::C, 2)), cfg)
      .series;
}

double range(const std::vector<double>& x) {
  auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  return *hi - *lo;
}

}  // namespace

TEST(Perturb, ZeroStrengthIsIdentity) {
  auto s = nominal_series(3);
  for (Kind k : kAllKinds) {
    EXPECT_EQ(apply(s, {k, 0.0, 99}), s) << to_string(k);
  }
}

TEST(Perturb, AmplitudeScalingExample) {
  TimeSeries s{{1.0, 2.0, -3.0}, {2.0, 0.5, -1.0}};
  auto p = apply(s, {Kind::AmplitudeScaling, 0.02, 0}, 0);
  EXPECT_DOUBLE_EQ(p.friction[0], 2.04);
  EXPECT_DOUBLE_EQ(p.omega[1], 2.04);
  EXPECT_DOUBLE_EQ(p.omega[2], -3.06);
}

TEST(Perturb, LinearTrendRampsToFullAmplitude) {
  auto s = nominal_series(4);
  const double a = range(s.friction);
  auto p = apply(s, {Kind::LinearTrend, 0.05, 0});
  EXPECT_EQ(p.omega, s.omega);
  EXPECT_DOUBLE_EQ(p.friction[0], s.friction[0]);
  EXPECT_NEAR(p.friction.back() - s.friction.back(), 0.05 * a, 1e-12);
  const std::size_t mid = 1999;
  EXPECT_NEAR(p.friction[mid] - s.friction[mid], 0.05 * a * mid / 3999.0, 1e-12);
}

TEST(Perturb, MissingDataKeepsOrderedSubsequence) {
  auto s = nominal_series(5, 1000);
  auto p = apply(s, {Kind::MissingData, 0.1, 17});
  ASSERT_EQ(p.size(), 900u);
  EXPECT_EQ(missing_count(0.1, 1000), 100u);
  // Subsequence check: every kept frame appears in order.
  std::size_t j = 0;
  for (std::size_t k = 0; k < s.size() && j < p.size(); ++k) {
    if (s.omega[k] == p.omega[j] && s.friction[k] == p.friction[j]) ++j;
  }
  EXPECT_EQ(j, p.size());
}

TEST(Perturb, MissingDataBelowMinimumLengthThrows) {
  auto s = nominal_series(5, 200);
  try {
    apply(s, {Kind::MissingData, 0.9, 1}, 80);
    FAIL() << "expected InvalidArgument";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
  }
  EXPECT_THROW(apply(s, {Kind::Gaussian, -0.1, 1}), Error);
}

TEST(Perturb, GaussianNoiseScale) {
  auto s = nominal_series(6, 100000);
  const double eps = 0.01;
  auto p = apply(s, {Kind::Gaussian, eps, 8});
  for (int ch = 0; ch < 2; ++ch) {
    const auto& a = ch ? s.friction : s.omega;
    const auto& b = ch ? p.friction : p.omega;
    double sum = 0, sq = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      double d = b[i] - a[i];
      sum += d;
      sq += d * d;
    }
    const double n = static_cast<double>(a.size());
    const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
    EXPECT_NEAR(sd / (eps * range(a)), 1.0, 0.02) << "channel " << ch;
  }
}

TEST(Perturb, UniformAndPoissonNoiseMoments) {
  auto s = nominal_series(7, 100000);
  const double eps = 0.01, a = range(s.friction);
  for (Kind k : {Kind::Uniform, Kind::Poisson}) {
    auto p = apply(s, {k, eps, 9});
    double sum = 0, sq = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      double d = (p.friction[i] - s.friction[i]) / (eps * a);
      sum += d;
      sq += d * d;
    }
    const double n = static_cast<double>(s.size());
    const double var_expected = k == Kind::Uniform ? 1.0 / 3.0 : 1.0;
    EXPECT_NEAR(sum / n, 0.0, 0.02) << to_string(k);
    EXPECT_NEAR(sq / n, var_expected, 0.02 * var_expected) << to_string(k);
  }
}

TEST(Perturb, DeterministicPerSeed) {
  auto s = nominal_series(8);
  for (Kind k : kAllKinds) {
    EXPECT_EQ(apply(s, {k, 0.02, 5}), apply(s, {k, 0.02, 5})) << to_string(k);
  }
  EXPECT_NE(apply(s, {Kind::Gaussian, 0.02, 5}), apply(s, {Kind::Gaussian, 0.02, 6}));
}

TEST(Snr, InfiniteWithoutNoise) {
  auto s = nominal_series(9);
  auto v = snr(s, s);
  EXPECT_TRUE(std::isinf(v.friction_db) && v.friction_db > 0);
  EXPECT_TRUE(std::isinf(v.omega_db));
}

TEST(Snr, ClosedForms) {
  TimeSeries s{{1.0, 2.0, 3.0, 4.0}, {1.0, -2.0, 3.0, -4.0}};
  TimeSeries half = s;
  for (double& f : half.friction) f *= 0.5;
  EXPECT_NEAR(snr(s, half).friction_db, 10.0 * std::log10(4.0), 1e-12);
  EXPECT_NEAR(snr(s, half).friction_db, 6.0206, 1e-4);
  // Scaling by (1 + eps) gives noise power eps^2 P(s).
  auto p = apply(s, {Kind::AmplitudeScaling, 0.01, 0}, 0);
  EXPECT_NEAR(snr(s, p).friction_db, 40.0, 1e-9);
  EXPECT_NEAR(snr(s, p).omega_db, 40.0, 1e-9);
  TimeSeries shorter{{1.0}, {1.0}};
  EXPECT_THROW(snr(s, shorter), Error);
}

TEST(Snr, DecreasesWithStrength) {
  auto s = nominal_series(10);
  double prev = INFINITY;
  for (double eps : {0.001, 0.002, 0.005, 0.01, 0.02, 0.05}) {
    double v = snr(s, apply(s, {Kind::Gaussian, eps, 11})).friction_db;
    EXPECT_LT(v, prev) << eps;
    prev = v;
  }
}

TEST(Envelope, SingleIterationIsThePerturbedHistogram) {
  auto s = c_series(12);
  pipeline::PipelineConfig cfg;
  Perturbation p{Kind::Gaussian, 0.002, 33};
  auto env = build_envelope(s, p, Channel::C, cfg, {1, 0.5});
  auto h = pipeline::run_pipeline(apply(s, {p.kind, p.epsilon, derive_seed(p.seed, streams::kEnvelope, 0)}), cfg);
  EXPECT_EQ(env.sample_count, 1u);
  EXPECT_EQ(env.lower, h.hist_c.bins);
  EXPECT_EQ(env.upper, h.hist_c.bins);
  EXPECT_EQ(env.width(), 0.0);
}

TEST(Envelope, ContainsMembersAndNestsWithMoreIterations) {
  auto s = c_series(13);
  pipeline::PipelineConfig cfg;
  Perturbation p{Kind::Uniform, 0.005, 44};
  auto small = build_envelope(s, p, Channel::C, cfg, {10, 0.5});
  auto big = build_envelope(s, p, Channel::C, cfg, {100, 0.5});
  for (const auto& m : small.members) EXPECT_TRUE(small.contains(m));
  for (const auto& m : big.members) EXPECT_TRUE(big.contains(m));
  for (std::size_t i = 0; i < small.members.size(); ++i) EXPECT_EQ(small.members[i], big.members[i]);
  for (std::size_t b = 0; b < small.lower.size(); ++b) {
    EXPECT_LE(big.lower[b], small.lower[b]);
    EXPECT_GE(big.upper[b], small.upper[b]);
  }
  EXPECT_GE(big.width(), small.width());
  for (std::size_t b = 0; b < small.lower.size(); ++b) EXPECT_LE(small.lower[b], small.upper[b]);
}

TEST(Envelope, DeterministicKindsSweepStrength) {
  auto strengths = sweep_strengths(0.02, 5, 0.5);
  ASSERT_EQ(strengths.size(), 5u);
  EXPECT_DOUBLE_EQ(strengths.front(), 0.01);
  EXPECT_DOUBLE_EQ(strengths.back(), 0.02);
  auto s = c_series(14);
  pipeline::PipelineConfig cfg;
  auto env = build_envelope(s, {Kind::AmplitudeScaling, 0.02, 0}, Channel::D, cfg, {5, 0.5});
  for (std::size_t i = 0; i < 5; ++i) {
    auto h = pipeline::run_pipeline(apply(s, {Kind::AmplitudeScaling, strengths[i], 0}), cfg);
    EXPECT_EQ(env.members[i], h.hist_d.bins);
  }
}

TEST(Perturb, KindNamesRoundTrip) {
  for (Kind k : kAllKinds) EXPECT_EQ(kind_from_string(to_string(k)), k);
  EXPECT_THROW(kind_from_string("salt"), Error);
}
