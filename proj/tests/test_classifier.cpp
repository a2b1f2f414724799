#include <gtest/gtest.h>

#include <filesystem>
#include <unistd.h>

#include "rwacert/classifier.hpp"
#include "rwacert/error.hpp"
#include "rwacert/rng.hpp"
#include "support/oracles.hpp"

using namespace rwacert;
using namespace rwacert::classifier;

namespace {

ClassifierBundle random_bundle(Rng& rng, std::size_t bins = 20) {
  ClassifierBundle b;
  b.pipeline.bins = bins;
  b.nn_c = oracle::random_model(bins, 10, rng);
  b.nn_d = oracle::random_model(bins, 10, rng);
  return b;
}

pipeline::PipelineSummary random_summary(Rng& rng, std::size_t bins = 20) {
  pipeline::PipelineSummary s;
  s.mean_dry = rng.uniform(0.8, 2.2);
  s.mean_visc = rng.uniform(0.0008, 0.0026);
  for (std::size_t i = 0; i < bins; ++i) {
    s.hist_c.bins.push_back(rng.uniform01() < 0.6 ? 0.0 : rng.uniform01());
    s.hist_d.bins.push_back(rng.uniform01() < 0.6 ? 0.0 : rng.uniform01());
  }
  return s;
}

// Independent restatement of the precedence rules.
Status precedence_oracle(const pipeline::PipelineSummary& s, const ClassifierBundle& b) {
  const auto& t = b.thresholds;
  if (!(s.mean_dry < t.dry_a3)) return Status::make(AnomalyKind::A, 3);
  if (!(s.mean_visc < t.visc_b1)) {
    if (!(s.mean_visc < t.visc_b3)) return Status::make(AnomalyKind::B, 3);
    if (!(s.mean_visc < t.visc_b2)) return Status::make(AnomalyKind::B, 2);
    return Status::make(AnomalyKind::B, 1);
  }
  int c = oracle::brute_class(b.nn_c, s.hist_c.bins);
  if (c != 0) return Status::make(AnomalyKind::C, c);
  int d = oracle::brute_class(b.nn_d, s.hist_d.bins);
  if (d != 0) return Status::make(AnomalyKind::D, d);
  if (!(s.mean_dry < t.dry_a2)) return Status::make(AnomalyKind::A, 2);
  if (!(s.mean_dry < t.dry_a1)) return Status::make(AnomalyKind::A, 1);
  return Status::nominal();
}

}  // namespace

TEST(Classifier, MatchesPrecedenceOracle) {
  Rng rng(101);
  std::array<int, 5> stages{};
  for (int trial = 0; trial < 500; ++trial) {
    if (trial % 50 == 0) rng.next_u64();
    auto b = random_bundle(rng);
    auto s = random_summary(rng);
    auto d = decide(s, b);
    EXPECT_EQ(d.status, precedence_oracle(s, b)) << "trial " << trial;
    ++stages[d.stage];
    EXPECT_EQ(d.nn_c_evaluated, d.stage >= 2);
    EXPECT_EQ(d.nn_d_evaluated, d.stage >= 3);
  }
  for (int st = 1; st <= 4; ++st) EXPECT_GT(stages[st], 0) << "stage " << st << " never reached";
}

TEST(Classifier, CutsAreInclusiveOnTheUpperSide) {
  Rng rng(5);
  auto b = random_bundle(rng);
  pipeline::PipelineSummary s;
  s.hist_c.bins.assign(20, 0.0);
  s.hist_d.bins.assign(20, 0.0);
  s.mean_dry = b.thresholds.dry_a3;
  EXPECT_EQ(decide(s, b).status, Status::make(AnomalyKind::A, 3));
  s.mean_dry = 1.0;
  s.mean_visc = b.thresholds.visc_b2;
  EXPECT_EQ(decide(s, b).status, Status::make(AnomalyKind::B, 2));
  s.mean_visc = std::nextafter(b.thresholds.visc_b1, 0.0);
  EXPECT_NE(decide(s, b).status.kind, AnomalyKind::B);
}

TEST(Classifier, A3TakesPrecedenceOverB) {
  Rng rng(6);
  auto b = random_bundle(rng);
  pipeline::PipelineSummary s;
  s.hist_c.bins.assign(20, 0.0);
  s.hist_d.bins.assign(20, 0.0);
  s.mean_dry = 3.0;
  s.mean_visc = 0.01;
  EXPECT_EQ(decide(s, b).status, Status::make(AnomalyKind::A, 3));
}

TEST(Calibration, SeparableClassesUseRangeMidpoints) {
  std::vector<LabeledSummary> data;
  auto add = [&](double dry, double visc, const char* st) { data.push_back({dry, visc, Status::parse(st)}); };
  add(1.00, 0.0010, "N");
  add(1.05, 0.0010, "N");
  add(1.30, 0.0010, "A1");
  add(1.35, 0.0010, "A1");
  add(1.60, 0.0010, "A2");
  add(1.90, 0.0010, "A3");
  add(1.00, 0.0015, "B1");
  add(1.00, 0.0020, "B2");
  add(1.00, 0.0025, "B3");
  add(1.02, 0.0010, "C2");
  add(1.03, 0.0010, "D1");
  auto cal = calibrate_thresholds(data);
  EXPECT_TRUE(cal.overlap_fallbacks.empty());
  EXPECT_DOUBLE_EQ(cal.thresholds.dry_a1, 0.5 * (1.05 + 1.30));
  EXPECT_DOUBLE_EQ(cal.thresholds.dry_a2, 0.5 * (1.35 + 1.60));
  EXPECT_DOUBLE_EQ(cal.thresholds.dry_a3, 0.5 * (1.60 + 1.90));
  EXPECT_DOUBLE_EQ(cal.thresholds.visc_b1, 0.5 * (0.0010 + 0.0015));
  EXPECT_DOUBLE_EQ(cal.thresholds.visc_b2, 0.5 * (0.0015 + 0.0020));
  EXPECT_DOUBLE_EQ(cal.thresholds.visc_b3, 0.5 * (0.0020 + 0.0025));
}

TEST(Calibration, OverlapFallsBackToMedians) {
  bool overlapped = false;
  EXPECT_DOUBLE_EQ(cut_between({1.0, 2.0, 5.0}, {3.0, 4.0, 6.0}, &overlapped), 0.5 * (2.0 + 4.0));
  EXPECT_TRUE(overlapped);
  EXPECT_DOUBLE_EQ(cut_between({1.0, 2.0}, {3.0}, &overlapped), 2.5);
  EXPECT_FALSE(overlapped);
  EXPECT_THROW(cut_between({}, {1.0}), Error);
}

TEST(Evaluate, GroupMetricsMatchDirectRecount) {
  Rng rng(77);
  std::vector<std::pair<Status, Status>> pa;
  for (int i = 0; i < 2000; ++i) {
    Status a = Status::from_index(rng.index(kStatusCount));
    Status p = rng.uniform01() < 0.7 ? a : Status::from_index(rng.index(kStatusCount));
    pa.emplace_back(p, a);
  }
  auto r = evaluate(pa);
  EXPECT_EQ(r.total, pa.size());
  for (const auto& g : standard_groupings()) {
    auto in = [&](Status s) { return std::find(g.members.begin(), g.members.end(), s) != g.members.end(); };
    std::size_t n = 0, n_all = 0, n_c = 0;
    for (auto [p, a] : pa) {
      n += in(a);
      n_all += in(p);
      n_c += in(p) && in(a);
    }
    auto it = std::find_if(r.groups.begin(), r.groups.end(), [&](const GroupMetric& m) { return m.name == g.name; });
    ASSERT_NE(it, r.groups.end());
    EXPECT_EQ(it->n, n) << g.name;
    EXPECT_EQ(it->n_all, n_all) << g.name;
    EXPECT_EQ(it->n_correct, n_c) << g.name;
    EXPECT_DOUBLE_EQ(*it->sensitivity, double(n_c) / double(n));
    EXPECT_DOUBLE_EQ(*it->ppv, double(n_c) / double(n_all));
  }
  std::size_t correct = 0;
  for (auto [p, a] : pa) correct += p == a;
  EXPECT_EQ(r.correct, correct);
}

TEST(Evaluate, UndefinedMetricsAreNull) {
  auto r = evaluate({{Status::nominal(), Status::nominal()}});
  auto j = to_json(r);
  for (const auto& g : j["groups"]) {
    EXPECT_TRUE(g["sensitivity"].is_null());
    EXPECT_TRUE(g["ppv"].is_null());
  }
  EXPECT_NE(confusion_csv(r).find("N,1,0"), std::string::npos);
  EXPECT_NE(confusion_svg(r).find("<svg"), std::string::npos);
}

TEST(Bundle, SaveLoadRoundTrip) {
  Rng rng(9);
  auto b = random_bundle(rng);
  b.thresholds.dry_a1 = 1.1234567890123457;
  b.pipeline.residual_threshold = 0.0173;
  auto dir = std::filesystem::temp_directory_path() / ("rwacert_bundle_" + std::to_string(::getpid()));
  save_bundle(b, dir);
  auto c = load_bundle(dir);
  EXPECT_EQ(c.thresholds.dry_a1, b.thresholds.dry_a1);
  EXPECT_EQ(c.pipeline, b.pipeline);
  EXPECT_EQ(c.nn_c.w1, b.nn_c.w1);
  EXPECT_EQ(c.nn_d.b2, b.nn_d.b2);
  std::filesystem::remove_all(dir);
}

TEST(Bundle, RejectsMismatchedNetworks) {
  Rng rng(10);
  auto b = random_bundle(rng, 20);
  b.pipeline.bins = 16;
  EXPECT_THROW(b.validate(), Error);
}
