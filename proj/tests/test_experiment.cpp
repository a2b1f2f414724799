#include <gtest/gtest.h>

#include <map>
#include <set>

#include "rwacert/error.hpp"
#include "rwacert/experiment.hpp"
#include "support/tempdir.hpp"

using namespace rwacert;
using namespace rwacert::experiment;

namespace {

CorpusSpec small_spec(std::uint64_t seed, std::size_t per_status = 3) {
  CorpusSpec spec;
  for (std::size_t i = 0; i < kStatusCount; ++i) spec.counts.emplace_back(Status::from_index(i), per_status);
  spec.gen.n_samples = 1200;
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST(DeskCounts, MatchesClassMix) {
  std::map<AnomalyKind, std::size_t> per_kind;
  std::size_t total = 0;
  for (const auto& [s, n] : desk_class_counts()) {
    per_kind[s.kind] += n;
    total += n;
  }
  EXPECT_EQ(per_kind[AnomalyKind::Nominal], 1000u);
  EXPECT_EQ(per_kind[AnomalyKind::A], 342u);
  EXPECT_EQ(per_kind[AnomalyKind::B], 436u);
  EXPECT_EQ(per_kind[AnomalyKind::C], 396u);
  EXPECT_EQ(per_kind[AnomalyKind::D], 438u);
  EXPECT_EQ(total, 2612u);
  // 342 = 114 * 3; 436 = 146 + 145 + 145
  for (const auto& [s, n] : desk_class_counts()) {
    if (s == Status::make(AnomalyKind::B, 1)) EXPECT_EQ(n, 146u);
    if (s == Status::make(AnomalyKind::B, 3)) EXPECT_EQ(n, 145u);
  }
}

TEST(Corpus, DeterministicAcrossThreadCounts) {
  const auto spec = small_spec(11, 2);
  const auto a = generate_corpus(spec, 1);
  const auto b = generate_corpus(spec, 3);
  ASSERT_EQ(a.size(), 26u);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].id, b[i].id);
    EXPECT_EQ(a[i].series, b[i].series);
    EXPECT_EQ(a[i].truth_dry, b[i].truth_dry);
  }
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end(), [](auto& x, auto& y) { return x.id < y.id; }));
  EXPECT_EQ(a.front().id.substr(0, 2), "A1");
}

TEST(Corpus, WriteReadRoundTrip) {
  TempDir dir("corpus");
  const auto spec = small_spec(5, 1);
  const auto corpus = generate_corpus(spec);
  write_corpus(dir.path, corpus, spec);
  const auto back = read_corpus(dir.path, true);
  ASSERT_EQ(back.size(), corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    EXPECT_EQ(back[i].id, corpus[i].id);
    EXPECT_EQ(back[i].status, corpus[i].status);
    EXPECT_EQ(back[i].series, corpus[i].series);
    EXPECT_EQ(back[i].truth_dry, corpus[i].truth_dry);
  }
  EXPECT_TRUE(read_corpus(dir.path, false).front().truth_dry.empty());
}

TEST(Corpus, MissingManifestIsIoError) {
  TempDir dir("nocorpus");
  try {
    read_corpus(dir.path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
  }
}

TEST(Split, StratifiedAndDeterministic) {
  const auto corpus = generate_corpus(small_spec(2, 5));
  const auto a = stratified_split(corpus, 0.4, 9);
  EXPECT_EQ(a, stratified_split(corpus, 0.4, 9));
  EXPECT_NE(a, stratified_split(corpus, 0.4, 10));
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  std::map<std::size_t, std::size_t> per_status;
  for (auto i : a) ++per_status[corpus[i].status.index()];
  ASSERT_EQ(per_status.size(), kStatusCount);
  for (const auto& [s, n] : per_status) EXPECT_EQ(n, 2u) << s;
  EXPECT_THROW(stratified_split(corpus, 0.0, 1), Error);
}

TEST(Populations, NetworkMembership) {
  const auto C = perturb::Channel::C;
  const auto D = perturb::Channel::D;
  EXPECT_TRUE(in_network_population(C, Status::nominal()));
  EXPECT_TRUE(in_network_population(C, Status::make(AnomalyKind::D, 2)));
  EXPECT_TRUE(in_network_population(C, Status::make(AnomalyKind::A, 2)));
  EXPECT_FALSE(in_network_population(C, Status::make(AnomalyKind::A, 3)));
  EXPECT_FALSE(in_network_population(C, Status::make(AnomalyKind::B, 1)));
  EXPECT_FALSE(in_network_population(D, Status::make(AnomalyKind::C, 1)));
  EXPECT_TRUE(in_population({C, 0}, Status::make(AnomalyKind::D, 3)));
  EXPECT_TRUE(in_population({C, 2}, Status::make(AnomalyKind::C, 2)));
  EXPECT_FALSE(in_population({C, 2}, Status::make(AnomalyKind::C, 3)));
  EXPECT_TRUE(in_population({D, 0}, Status::make(AnomalyKind::A, 1)));
  EXPECT_FALSE(in_population({D, 0}, Status::make(AnomalyKind::C, 1)));
}

TEST(Train, BundleRecordsSplitAndEvaluates) {
  const auto corpus = generate_corpus(small_spec(4, 5));
  TrainOptions o;
  o.seed = 4;
  o.mlp.epochs = 40;
  const auto t = train_classifier(corpus, o);
  EXPECT_NO_THROW(t.bundle.validate());
  EXPECT_EQ(t.nn_c_loss.size(), 41u);
  EXPECT_LT(t.bundle.pipeline.range_c.lo, t.bundle.pipeline.range_c.hi);
  EXPECT_EQ(t.bundle.nn_c.bin_edges.size(), t.bundle.pipeline.bins + 1);

  const auto ids = training_ids(t.bundle);
  ASSERT_EQ(ids.size(), t.train_indices.size());
  for (std::size_t k = 0; k < ids.size(); ++k) EXPECT_EQ(ids[k], corpus[t.train_indices[k]].id);

  const auto ev = evaluate_corpus(corpus, t.bundle);
  EXPECT_EQ(ev.predicted.size(), corpus.size());
  EXPECT_EQ(ev.all.total, corpus.size());
  EXPECT_EQ(ev.held_out.total, corpus.size() - ids.size());

  // Same seed, same bundle.
  const auto t2 = train_classifier(corpus, o);
  EXPECT_EQ(mlp::serialize(t.bundle.nn_c), mlp::serialize(t2.bundle.nn_c));
  EXPECT_EQ(mlp::serialize(t.bundle.nn_d), mlp::serialize(t2.bundle.nn_d));
}

TEST(Reports, CertifyJsonListsEveryGroup) {
  const auto corpus = generate_corpus(small_spec(6, 4));
  TrainOptions o;
  o.seed = 6;
  o.mlp.epochs = 20;
  const auto t = train_classifier(corpus, o);
  const auto sums = summarize(corpus, t.bundle.pipeline);
  CertifyPlan plan;
  plan.samples = 200;
  plan.max_attempts = 200000;
  plan.seed = 6;
  const auto res = run_certification(corpus, sums, t.bundle, plan);
  ASSERT_EQ(res.size(), 8u);
  const auto j = certify_json(res);
  EXPECT_EQ(j.at("format"), "rwacert-certify");
  EXPECT_EQ(j.at("groups").size(), 8u);
  for (const auto& r : res) {
    EXPECT_EQ(r.verdict.certified, r.verdict.counterexamples.empty());
    EXPECT_EQ(r.counterexamples_confirmed, r.verdict.counterexamples.size()) << r.group.name();
    EXPECT_EQ(r.sampling.has_value(), r.verdict.certified);
    if (r.sampling) EXPECT_EQ(r.sampling->misclassified, 0u);
  }
}
