#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "rwacert/error.hpp"
#include "rwacert/pipeline.hpp"
#include "rwacert/rng.hpp"
#include "rwacert/telemetry.hpp"
#include "support/oracles.hpp"

using namespace rwacert;
using namespace rwacert::pipeline;

namespace {

// Sinusoidal spin, dry level `dry(k)`, f^v = 0.001, optional noise.
template <class DryFn>
TimeSeries make_series(std::size_t n, DryFn dry, double sigma = 0.0, std::uint64_t seed = 1) {
  TimeSeries s;
  Rng rng(seed);
  const double pi = std::acos(-1.0);
  for (std::size_t k = 0; k < n; ++k) {
    double w = 150.0 + 100.0 * std::sin(2.0 * pi * static_cast<double>(k) / 200.0);
    s.omega.push_back(w);
    s.friction.push_back(dry(k) * (w > 0 ? 1.0 : -1.0) + 0.001 * w + sigma * rng.normal());
  }
  return s;
}

double rel_err(double a, long double b) {
  return static_cast<double>(std::fabs(a - b) / std::max(1e-300L, std::fabs(b)));
}

}  // namespace

TEST(FitWindow, RecoversNoiseFreeCoefficients) {
  auto s = make_series(400, [](std::size_t) { return 1.0; });
  auto fit = fit_window(s, 17, 60);
  EXPECT_NEAR(fit.dry, 1.0, 1e-9);
  EXPECT_NEAR(fit.visc, 0.001, 1e-9);
  EXPECT_NEAR(fit.residual_rms, 0.0, 1e-9);
}

TEST(FitWindow, MatchesCramerOracle) {
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    TimeSeries s;
    std::size_t n = 8 + rng.index(200);
    for (std::size_t k = 0; k < n; ++k) {
      double w = rng.uniform(-300.0, 300.0);
      s.omega.push_back(w);
      s.friction.push_back(rng.uniform(-3.0, 3.0));
    }
    std::size_t len = 4 + rng.index(n - 3);
    std::size_t start = rng.index(n - len + 1);
    auto ref = oracle::cramer_fit(s, start, len);
    if (ref.singular) continue;
    auto fit = fit_window(s, start, len);
    EXPECT_LT(rel_err(fit.dry, ref.dry), 1e-9);
    EXPECT_LT(rel_err(fit.visc, ref.visc), 1e-9);
    EXPECT_LT(std::fabs(fit.residual_rms - static_cast<double>(ref.rms)), 1e-9 * std::max(1.0, (double)ref.rms));
  }
}

TEST(FitWindow, ConstantSpinIsDegenerate) {
  TimeSeries s;
  for (int k = 0; k < 50; ++k) {
    s.omega.push_back(80.0);
    s.friction.push_back(1.08);
  }
  try {
    fit_window(s, 0, 50);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateDesign);
  }
}

TEST(Changepoints, SingleCleanJump) {
  auto s = make_series(1000, [](std::size_t k) { return k < 500 ? 1.0 : 1.5; });
  PipelineConfig cfg;
  cfg.residual_threshold = 0.01;
  auto iv = detect_changepoints(s, cfg);
  ASSERT_EQ(iv.size(), 2u);
  EXPECT_LE(std::abs(static_cast<long>(iv[0].end) - 500), static_cast<long>(cfg.window_size));
  EXPECT_EQ(iv[0].start, 0u);
  EXPECT_EQ(iv[1].end, 1000u);
}

TEST(Changepoints, NoChangeGivesOneInterval) {
  auto s = make_series(800, [](std::size_t) { return 1.0; });
  auto iv = detect_changepoints(s, PipelineConfig{});
  ASSERT_EQ(iv.size(), 1u);
  EXPECT_EQ(iv[0], (Interval{0, 800}));
}

TEST(Changepoints, RejectsShortSeries) {
  auto s = make_series(79, [](std::size_t) { return 1.0; });
  EXPECT_THROW(detect_changepoints(s, PipelineConfig{}), Error);
}

TEST(Changepoints, IntervalsPartitionSeriesAndRespectMinLength) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    telemetry::GenConfig g;
    g.seed = seed;
    auto out = telemetry::generate_series(
        telemetry::AnomalyProfile::for_status(Status::make(AnomalyKind::D, 1 + static_cast<int>(seed % 3))), g);
    PipelineConfig cfg;
    auto iv = detect_changepoints(out.series, cfg);
    ASSERT_FALSE(iv.empty());
    EXPECT_EQ(iv.front().start, 0u);
    EXPECT_EQ(iv.back().end, out.series.size());
    for (std::size_t i = 0; i < iv.size(); ++i) {
      EXPECT_GE(iv[i].length(), cfg.min_interval);
      if (i) EXPECT_EQ(iv[i].start, iv[i - 1].end);
    }
  }
}

TEST(Estimate, TwoIntervalsExact) {
  auto s = make_series(600, [](std::size_t k) { return k < 250 ? 1.0 : 1.5; });
  std::vector<Interval> iv{{0, 250}, {250, 600}};
  auto est = estimate_coefficients(s, iv);
  ASSERT_EQ(est.size(), 2u);
  EXPECT_NEAR(est[0].dry_hat, 1.0, 1e-9);
  EXPECT_NEAR(est[1].dry_hat, 1.5, 1e-9);
  for (std::size_t i = 0; i < 2; ++i) {
    auto ref = oracle::cramer_fit(s, iv[i].start, iv[i].length());
    EXPECT_LT(rel_err(est[i].dry_hat, ref.dry), 1e-9);
    EXPECT_LT(rel_err(est[i].visc_hat, ref.visc), 1e-9);
  }
}

TEST(Estimate, RejectsNonPartition) {
  auto s = make_series(600, [](std::size_t) { return 1.0; });
  std::vector<Interval> gap{{0, 250}, {260, 600}};
  EXPECT_THROW(estimate_coefficients(s, gap), Error);
  std::vector<Interval> short_cover{{0, 250}};
  EXPECT_THROW(estimate_coefficients(s, short_cover), Error);
}

TEST(Estimate, MonteCarloDryBound) {
  const double sigma = 0.01;
  const std::size_t len = 1000;
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto s = make_series(len, [](std::size_t) { return 1.0; }, sigma, seed + 1000);
    std::vector<Interval> iv{{0, len}};
    auto est = estimate_coefficients(s, iv);
    if (std::fabs(est[0].dry_hat - 1.0) < 5.0 * sigma / std::sqrt(double(len))) ++ok;
  }
  EXPECT_GE(ok, 95);
}

TEST(Histograms, OnePerfectPair) {
  PipelineConfig cfg;
  std::vector<CoefficientEstimate> est(3);
  est[0].dry_hat = 1.0;
  est[1].dry_hat = 1.3;
  est[2].dry_hat = 1.0;
  auto [hc, hd] = build_histograms(est, cfg);
  EXPECT_EQ(hc.count, 1u);
  EXPECT_EQ(hd.count, 0u);
  std::size_t bin = static_cast<std::size_t>(0.3 / 1.2 * 20);
  for (std::size_t i = 0; i < hc.size(); ++i) EXPECT_DOUBLE_EQ(hc.bins[i], i == bin ? 1.0 : 0.0);
  for (double b : hd.bins) EXPECT_EQ(b, 0.0);
}

TEST(Histograms, NothingMatches) {
  PipelineConfig cfg;
  std::vector<CoefficientEstimate> est(3);
  est[0].dry_hat = 1.0;
  est[1].dry_hat = 1.2;
  est[2].dry_hat = 1.6;
  auto [hc, hd] = build_histograms(est, cfg);
  EXPECT_EQ(hc.count, 0u);
  for (double b : hc.bins) EXPECT_EQ(b, 0.0);
  EXPECT_NEAR(std::accumulate(hd.bins.begin(), hd.bins.end(), 0.0), 1.0, 1e-12);
  auto bin_of = [](double x) { return static_cast<std::size_t>(std::floor(x / 1.2 * 20)); };
  EXPECT_DOUBLE_EQ(hd.bins[bin_of(0.2)], 0.5);
  EXPECT_DOUBLE_EQ(hd.bins[bin_of(0.4)], 0.5);
}

TEST(Histograms, ClampsOutOfRange) {
  auto h = make_histogram(std::vector<double>{-5.0, 100.0, 0.6}, 4, {0.0, 1.2});
  EXPECT_DOUBLE_EQ(h.bins[0], 1.0 / 3);
  EXPECT_DOUBLE_EQ(h.bins[3], 1.0 / 3);
  EXPECT_DOUBLE_EQ(h.bins[2], 1.0 / 3);
  for (std::size_t i = 1; i < h.edges.size(); ++i) EXPECT_GT(h.edges[i], h.edges[i - 1]);
}

TEST(Histograms, GreedyMatcherAgreesWithExhaustiveOracle) {
  Rng rng(2024);
  PipelineConfig cfg;
  for (int trial = 0; trial < 3000; ++trial) {
    std::size_t n = rng.index(9);
    std::vector<double> d(n);
    // few distinct magnitudes so that near-matches are common
    for (double& x : d) {
      double mag = 0.1 * static_cast<double>(1 + rng.index(4)) * (1.0 + 0.2 * (rng.uniform01() - 0.5));
      x = rng.uniform01() < 0.5 ? mag : -mag;
    }
    auto got = match_pairs(d, cfg);
    auto want = oracle::exhaustive_matcher(d, cfg.pair_match_tolerance, cfg.pair_match_max_gap);
    auto pairs = got.pairs;
    std::sort(pairs.begin(), pairs.end());
    ASSERT_EQ(pairs, want);
    // conservation: 2 * pairs + leftovers = deltas
    EXPECT_EQ(2 * got.pairs.size() + got.unmatched_magnitudes.size(), d.size());
    auto hd = make_histogram(got.unmatched_magnitudes, cfg.bins, cfg.range_d);
    EXPECT_EQ(2 * got.pairs.size() + hd.count, d.size());
  }
}

TEST(Pipeline, NominalNoiseFree) {
  telemetry::GenConfig g;
  g.noise_sigma = 0.0;
  g.nominal_jump_rate = 0.0;
  g.seed = 3;
  auto out = telemetry::generate_series(telemetry::AnomalyProfile::for_status(Status::nominal()), g);
  auto sum = run_pipeline(out.series, PipelineConfig{});
  EXPECT_NEAR(sum.mean_dry, g.dry_base, 1e-9);
  EXPECT_NEAR(sum.mean_visc, g.visc_base, 1e-9);
  EXPECT_TRUE(sum.deltas.empty());
  for (double b : sum.hist_c.bins) EXPECT_EQ(b, 0.0);
  for (double b : sum.hist_d.bins) EXPECT_EQ(b, 0.0);
}

TEST(Pipeline, AnomalyCConcentratesInOneBin) {
  telemetry::GenConfig g;
  g.noise_sigma = 0.0;
  g.nominal_jump_rate = 0.0;
  PipelineConfig cfg;
  cfg.range_c = {0.0, 1.1};
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    g.seed = seed;
    auto prof = telemetry::AnomalyProfile::for_status(Status::make(AnomalyKind::C, 1));
    prof.pair_jump_magnitude = 0.3;
    prof.pair_magnitude_jitter = 0.0;
    prof.pair_rate = 5.0;
    auto out = telemetry::generate_series(prof, g);
    std::size_t pairs = 0;
    for (const auto& e : out.truth.events) pairs += e.type == telemetry::EventType::PairUp;
    auto sum = run_pipeline(out.series, cfg);
    EXPECT_EQ(sum.hist_c.count, pairs) << "seed " << seed;
    std::size_t bin = static_cast<std::size_t>(0.3 / 1.1 * 20);
    EXPECT_NEAR(sum.hist_c.bins[bin], 1.0, 1e-12);
    EXPECT_EQ(sum.hist_d.count, 0u);
    if (pairs == 5) ++checked;
  }
  EXPECT_GT(checked, 0);
}

TEST(Pipeline, Idempotent) {
  telemetry::GenConfig g;
  g.seed = 8;
  auto out = telemetry::generate_series(
      telemetry::AnomalyProfile::for_status(Status::make(AnomalyKind::C, 2)), g);
  auto a = run_pipeline(out.series, PipelineConfig{});
  auto b = run_pipeline(out.series, PipelineConfig{});
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(Pipeline, CalibratedThresholdSeparatesNoiseFromJumps) {
  std::vector<TimeSeries> nominal;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    nominal.push_back(make_series(1000, [](std::size_t) { return 1.0; }, 0.005, seed));
  }
  double thr = calibrate_residual_threshold(nominal, 40);
  EXPECT_GT(thr, 0.005 * 3.0);
  EXPECT_LT(thr, 0.005 * 5.0);
  PipelineConfig cfg;
  cfg.residual_threshold = thr;
  for (const auto& s : nominal) EXPECT_EQ(detect_changepoints(s, cfg).size(), 1u);
}

TEST(Pipeline, QuantileInterpolates) {
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4, 5}, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(quantile({1, 2}, 0.25), 1.25);
  auto r = quantile_range({0.5}, 0.01, 0.99, {0.0, 1.0});
  EXPECT_EQ(r, (BinRange{0.0, 1.0}));
}

TEST(Pipeline, ConfigValidation) {
  PipelineConfig c;
  c.window_size = 3;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.pair_match_tolerance = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.bins = 1;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  EXPECT_EQ(pipeline_config_from_json(to_json(c)), c);
}
