#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rwacert/classifier.hpp"
#include "rwacert/perturb.hpp"
#include "rwacert/verifier.hpp"

// Local robustness sweeps (envelope -> verifier per series, kind and strength)
// and global constraint synthesis / certification for the histogram networks.
namespace rwacert::robustness {

using perturb::Channel;
using perturb::Kind;

// ---------------------------------------------------------------------------
// Evaluation set

// A group is a network (C or D) plus the class that network should output:
// "noC", "C1".."C3", "noD", "D1".."D3".
struct Group {
  Channel net = Channel::C;
  std::size_t cls = 0;

  std::string name() const;
  static Group parse(const std::string& name);
  bool operator==(const Group&) const = default;
  auto operator<=>(const Group& o) const = default;
};

std::vector<Group> all_groups();

struct Candidate {
  std::string id;
  Status actual;
  Status predicted;  // full classifier output on the unperturbed series
};

// Strata: each C and D class draws `per_anomaly_class` series of that status;
// "noC" draws `no_c_per_class` from each of D1, D2, D3, A1, A2, N; "noD"
// draws `no_d_per_class` from each of A1, A2, N. Only correctly classified
// series are eligible. A series may appear in several groups.
struct SamplingProtocol {
  std::size_t per_anomaly_class = 60;
  std::size_t no_c_per_class = 10;
  std::size_t no_d_per_class = 20;
  // Take every eligible series when a stratum is short instead of throwing.
  bool clamp_to_available = false;
};

struct EvalMember {
  std::size_t candidate = 0;  // index into the candidate list
  Group group;
};

// Members sorted by group then candidate id. Throws InsufficientData naming the
// stratum when fewer eligible series exist than requested.
std::vector<EvalMember> sample_evaluation_set(const std::vector<Candidate>& candidates,
                                              const SamplingProtocol& protocol, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Strength ladders

struct LadderOptions {
  double start = 0.001;
  std::size_t rungs_per_decade = 4;
  std::size_t max_rungs = 40;
  double snr_floor_db = 35.0;
  double snr_floor_amplitude_db = 20.0;
  std::uint64_t seed = 0;
};

inline const std::vector<double> kMissingDataLadder = {0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5};

// Median friction-channel SNR over `calibration` for one strength.
double median_snr(std::span<const TimeSeries> calibration, Kind kind, double epsilon, std::uint64_t seed);

// Log-spaced rungs from `start` while the median SNR stays >= the kind's
// floor (within kSnrFloorTolerance, so amplitude scaling keeps eps = 0.1 at
// 20 dB despite round-off); MissingData returns kMissingDataLadder.
inline constexpr double kSnrFloorTolerance = 1e-9;  // dB
std::vector<double> strength_ladder(Kind kind, std::span<const TimeSeries> calibration, const LadderOptions& options);

// ---------------------------------------------------------------------------
// Local robustness sweep

struct SweepItem {
  std::string id;
  const TimeSeries* series = nullptr;
  Group group;
};

struct SweepOptions {
  std::vector<Kind> kinds;
  std::map<Kind, std::vector<double>> ladders;
  std::size_t n_iters = 10;
  double sweep_lower_fraction = 0.5;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0 = hardware concurrency
  verifier::VerifierOptions verifier{};
};

struct SeriesOutcome {
  std::string id;
  bool failed = false;
  std::string error;
  bool robust = false;
  bool binary_robust = false;
  std::vector<std::size_t> counterexample_classes;
  verifier::QueryStats stats;
};

struct Cell {
  Group group;
  Kind kind = Kind::Gaussian;
  double epsilon = 0.0;
  std::size_t n_correct = 0;  // N_c, failures excluded
  std::size_t n_robust = 0;   // N_lr
  std::size_t n_binary_robust = 0;
  std::size_t n_failed = 0;
  std::array<std::size_t, mlp::kNumClasses> counterexample_counts{};
  std::vector<SeriesOutcome> outcomes;  // sorted by series id

  std::optional<double> rate() const;
  std::optional<double> binary_rate() const;
};

struct RobustnessReport {
  std::size_t n_iters = 0;
  std::map<Kind, std::vector<double>> ladders;
  std::vector<Cell> cells;  // sorted by group, kind, epsilon
  verifier::QueryStats stats;

  const Cell* find(Group g, Kind k, double eps) const;
};

// The series' expected class is the relevant network's output on the
// unperturbed histogram. A series is binary-robust when every counterexample
// class lies on the same side of 0 as the expected class.
RobustnessReport local_robustness_sweep(const std::vector<SweepItem>& items, const classifier::ClassifierBundle& bundle,
                                        const SweepOptions& options);

// Single (series, perturbation) evaluation used by the sweep.
SeriesOutcome evaluate_series(const TimeSeries& series, const mlp::MlpModel& model, Channel channel,
                              const pipeline::PipelineConfig& cfg, const perturb::Perturbation& p,
                              std::size_t n_iters, double sweep_lower_fraction,
                              const verifier::VerifierOptions& vopts);

nlohmann::json to_json(const RobustnessReport& report, bool include_outcomes = true);
// Inverse of to_json without per-series outcomes.
RobustnessReport report_from_json(const nlohmann::json& j);
std::string cells_csv(const RobustnessReport& report);

// Per (group, kind) curve over the ladder, rungs with an undefined rate skipped.
struct CurveCheck {
  Group group;
  Kind kind = Kind::Gaussian;
  std::optional<double> first_rate;  // smallest rung
  double max_rise = 0.0;             // max over rungs i < j of rate_j - rate_i, >= 0
  double rise_from = 0.0;            // epsilons of the pair attaining max_rise
  double rise_to = 0.0;
  std::size_t binary_below_class = 0;  // cells with binary rate < class rate
};

std::vector<CurveCheck> check_curves(const RobustnessReport& report);

// ---------------------------------------------------------------------------
// Global constraints

// sum_{i=1..M} h_i * i
double weighted_sum(std::span<const double> h);

// m_i = (1/k) sum_{j=i}^{i+k-1} h_j, length M-k+1.
std::vector<double> window_means(std::span<const double> h, std::size_t k);

struct WindowBounds {
  std::size_t k = 0;
  std::vector<double> lower;
  std::vector<double> upper;
};

struct GlobalConstraintSet {
  Group group;
  std::vector<double> envelope_upper;  // box lower is 0
  double ws_lo = 0.0;
  double ws_hi = 0.0;
  std::vector<WindowBounds> windows;

  void validate() const;
  verifier::InputRegion region() const;
  bool satisfied(std::span<const double> h, double slack = 0.0) const;
};

struct SynthesisOptions {
  double trim_quantile = 0.01;  // per tail of the weighted-sum distribution
  std::vector<std::size_t> window_sizes{3, 4};
};

struct ExclusionReport {
  std::size_t total = 0;
  std::vector<std::size_t> excluded;  // corpus indices violating the final set
  std::size_t others_total = 0;
  std::size_t others_inside = 0;  // other-class histograms satisfying the set

  double percent() const { return total ? 100.0 * static_cast<double>(excluded.size()) / static_cast<double>(total) : 0.0; }
};

struct Synthesis {
  GlobalConstraintSet set;
  ExclusionReport exclusions;
};

// envelope_upper is the componentwise max over `members`; the weighted-sum
// interval spans the trimmed quantiles; window bounds are min/max over the
// members inside the weighted-sum interval.
Synthesis synthesize_constraints(const std::vector<std::vector<double>>& members, Group group,
                                 const SynthesisOptions& options = {},
                                 const std::vector<std::vector<double>>& others = {});

struct GlobalVerdict {
  bool certified = false;
  std::vector<verifier::Verdict> counterexamples;  // one per violating class
  verifier::QueryStats stats;
};

GlobalVerdict certify_global(const mlp::MlpModel& model, const GlobalConstraintSet& set,
                             const verifier::VerifierOptions& options = {});

struct SamplingCheck {
  std::size_t requested = 0;
  std::size_t accepted = 0;
  std::size_t attempts = 0;
  std::size_t misclassified = 0;
  std::vector<double> box_lower;  // LP-tightened sampling box
  std::vector<double> box_upper;
  bool exhausted = false;  // attempt cap hit before `requested` acceptances
};

// Uniform rejection sampling inside the LP-tightened bounding box of the
// region, keeping points that satisfy every constraint.
SamplingCheck sample_region(const mlp::MlpModel& model, const GlobalConstraintSet& set, std::size_t requested,
                            std::uint64_t seed, std::size_t max_attempts);

nlohmann::json to_json(const GlobalConstraintSet& set);
nlohmann::json to_json(const ExclusionReport& r);
nlohmann::json to_json(const GlobalVerdict& v);
nlohmann::json to_json(const SamplingCheck& s);

}  // namespace rwacert::robustness
