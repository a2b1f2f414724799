#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rwacert/classifier.hpp"
#include "rwacert/robustness.hpp"
#include "rwacert/telemetry.hpp"

// End-to-end workflow on a labelled synthetic corpus: generation and storage,
// training of the classifier bundle, evaluation, local-robustness sweeps and
// global certification, plus the report files for each step.
namespace rwacert::experiment {

// ---------------------------------------------------------------------------
// Corpus

struct CorpusEntry {
  std::string id;  // "<status>-<nnnnn>", e.g. "C2-00007"
  Status status;
  TimeSeries series;
  std::vector<double> truth_dry;  // may be empty when loaded without truth files
};

using ClassCounts = std::vector<std::pair<Status, std::size_t>>;

// 1000 N, 342 A, 436 B, 396 C, 438 D (times `scale`), each anomaly kind split
// evenly across urgencies with the remainder going to the lowest urgencies.
ClassCounts desk_class_counts(double scale = 1.0);

struct CorpusSpec {
  ClassCounts counts;
  telemetry::GenConfig gen;  // gen.seed is ignored; per-series seeds come from `seed`
  telemetry::SeverityScale severity;
  std::uint64_t seed = 0;
};

// Series i of status s uses derive_seed(seed, streams::kSeries, s.index() * 1e6 + i).
std::vector<CorpusEntry> generate_corpus(const CorpusSpec& spec, unsigned threads = 0);

// dir/manifest.json, dir/series/<id>.csv, dir/truth/<id>.csv
void write_corpus(const std::filesystem::path& dir, const std::vector<CorpusEntry>& corpus, const CorpusSpec& spec);
std::vector<CorpusEntry> read_corpus(const std::filesystem::path& dir, bool with_truth = false);

// Pipeline summaries in corpus order; failures are rethrown with the series id.
std::vector<pipeline::PipelineSummary> summarize(const std::vector<CorpusEntry>& corpus,
                                                 const pipeline::PipelineConfig& cfg, unsigned threads = 0);

// ---------------------------------------------------------------------------
// Training

struct TrainOptions {
  double train_fraction = 0.4;
  double residual_factor = 4.0;  // threshold = factor * median rolling residual of nominal series
  double bin_quantile_lo = 0.01;
  double bin_quantile_hi = 0.99;
  pipeline::PipelineConfig pipeline;
  mlp::TrainConfig mlp;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

// Per status: ids sorted, shuffled with derive_seed(seed, kSplit, status index),
// first round(fraction * n) go to training. Returned indices are ascending.
std::vector<std::size_t> stratified_split(const std::vector<CorpusEntry>& corpus, double fraction, std::uint64_t seed);

struct TrainOutcome {
  classifier::ClassifierBundle bundle;
  std::vector<std::size_t> train_indices;
  classifier::Calibration calibration;
  std::vector<double> nn_c_loss;  // per epoch
  std::vector<double> nn_d_loss;
};

// nn_c learns C urgency (0 otherwise) on training series that are neither A3
// nor B; nn_d learns D urgency on those that are also not C.
TrainOutcome train_classifier(const std::vector<CorpusEntry>& corpus, const TrainOptions& options);

// ---------------------------------------------------------------------------
// Evaluation

struct EvalOutcome {
  std::vector<Status> predicted;             // corpus order
  classifier::EvalReport held_out;           // series not used for training
  classifier::EvalReport all;
};

EvalOutcome evaluate_corpus(const std::vector<CorpusEntry>& corpus, const classifier::ClassifierBundle& bundle,
                            unsigned threads = 0);

// Training ids recorded in the bundle metadata (empty if absent).
std::vector<std::string> training_ids(const classifier::ClassifierBundle& bundle);

// ---------------------------------------------------------------------------
// Local robustness sweep

struct SweepPlan {
  robustness::SamplingProtocol protocol;
  std::vector<perturb::Kind> kinds{std::begin(perturb::kAllKinds), std::end(perturb::kAllKinds)};
  std::size_t n_iters = 10;
  double sweep_lower_fraction = 0.5;
  robustness::LadderOptions ladder;
  std::size_t calibration_size = 20;  // nominal series used for SNR ladders
  std::uint64_t seed = 0;
  unsigned threads = 0;
  verifier::VerifierOptions verifier;
};

struct SweepOutcome {
  robustness::RobustnessReport report;
  std::vector<robustness::EvalMember> members;
  std::vector<std::string> calibration_ids;
};

// `predicted` are the bundle's outputs for every corpus entry.
SweepOutcome run_sweep(const std::vector<CorpusEntry>& corpus, const std::vector<Status>& predicted,
                       const classifier::ClassifierBundle& bundle, const SweepPlan& plan);

// ---------------------------------------------------------------------------
// Global certification

struct CertifyPlan {
  robustness::SynthesisOptions synthesis;
  std::vector<robustness::Group> groups = robustness::all_groups();
  std::size_t samples = 100000;
  std::size_t max_attempts = 50'000'000;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  verifier::VerifierOptions verifier;
};

struct GroupCertification {
  robustness::Group group;
  robustness::Synthesis synthesis;
  robustness::GlobalVerdict verdict;
  std::optional<robustness::SamplingCheck> sampling;  // certified sets only
  std::size_t counterexamples_confirmed = 0;          // forward pass agrees with the reported class
};

// Group populations by true status: C1..C3 / D1..D3 are the matching class;
// noC is every status nn_c is trained on apart from C (N, A1, A2, D*); noD is
// N, A1, A2. The other members of the same network population are passed as
// `others` for the overlap count.
std::vector<GroupCertification> run_certification(const std::vector<CorpusEntry>& corpus,
                                                  const std::vector<pipeline::PipelineSummary>& summaries,
                                                  const classifier::ClassifierBundle& bundle, const CertifyPlan& plan);

bool in_population(robustness::Group group, Status status);
bool in_network_population(perturb::Channel net, Status status);

// ---------------------------------------------------------------------------
// Reports: JSON + CSV + SVG written atomically under `dir`.

void write_eval_report(const std::filesystem::path& dir, const std::vector<CorpusEntry>& corpus,
                       const EvalOutcome& eval);
void write_sweep_report(const std::filesystem::path& dir, const std::vector<CorpusEntry>& corpus,
                        const SweepOutcome& sweep);
void write_certify_report(const std::filesystem::path& dir, const std::vector<GroupCertification>& results);

nlohmann::json sweep_json(const std::vector<CorpusEntry>& corpus, const SweepOutcome& sweep);
nlohmann::json certify_json(const std::vector<GroupCertification>& results);

// Rate-vs-epsilon charts from a sweep report (one chart per kind and net).
void write_sweep_charts(const std::filesystem::path& dir, const robustness::RobustnessReport& report);

}  // namespace rwacert::experiment
