#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rwacert/mlp.hpp"
#include "rwacert/pipeline.hpp"
#include "rwacert/types.hpp"

// Four-stage hybrid classifier:
//   1. mean dry >= dry_a3 -> A3; else mean visc >= visc_b1 -> B{1,2,3}
//   2. nn_c(hist_c) > 0   -> C{class}
//   3. nn_d(hist_d) > 0   -> D{class}
//   4. mean dry cuts      -> A2 / A1 / nominal
// Every cut is inclusive on its upper side.
namespace rwacert::classifier {

struct Thresholds {
  double dry_a3 = 1.75;
  double visc_b1 = 0.00125;
  double visc_b2 = 0.00175;
  double visc_b3 = 0.00225;
  double dry_a1 = 1.15;
  double dry_a2 = 1.45;

  void validate() const;
};

struct ClassifierBundle {
  Thresholds thresholds;
  mlp::MlpModel nn_c;
  mlp::MlpModel nn_d;
  pipeline::PipelineConfig pipeline;
  nlohmann::json metadata = nlohmann::json::object();

  // Both networks must take pipeline.bins inputs.
  void validate() const;
};

struct Decision {
  Status status;
  int stage = 0;  // 1..4
  std::size_t nn_c_class = 0;
  std::size_t nn_d_class = 0;
  bool nn_c_evaluated = false;
  bool nn_d_evaluated = false;
};

Decision decide(const pipeline::PipelineSummary& summary, const ClassifierBundle& bundle);
Status classify_summary(const pipeline::PipelineSummary& summary, const ClassifierBundle& bundle);
Status classify_series(const TimeSeries& series, const ClassifierBundle& bundle);

struct LabeledSummary {
  double mean_dry = 0.0;
  double mean_visc = 0.0;
  Status status;
};

struct Calibration {
  Thresholds thresholds;
  // Names of cuts where the two class ranges overlapped and the median
  // midpoint was used instead of the range midpoint.
  std::vector<std::string> overlap_fallbacks;
};

// Each cut sits midway between the largest value of the class below and the
// smallest value of the class above; on overlap, midway between the medians.
//   dry_a3:  every class except A3 and B*   vs  A3
//   visc_b1: every non-B class              vs  B1
//   visc_b2: B1 vs B2      visc_b3: B2 vs B3
//   dry_a1:  N vs A1       dry_a2:  A1 vs A2
Calibration calibrate_thresholds(const std::vector<LabeledSummary>& data);

double cut_between(std::vector<double> lower, std::vector<double> upper, bool* overlapped = nullptr);

// Rows predicted, columns actual, both in Status::index() order.
using Confusion = std::array<std::array<std::size_t, kStatusCount>, kStatusCount>;

struct GroupMetric {
  std::string name;
  std::size_t n = 0;          // actual members
  std::size_t n_all = 0;      // predicted members
  std::size_t n_correct = 0;  // predicted in the group and actually in the group
  std::optional<double> sensitivity;
  std::optional<double> ppv;
};

struct EvalReport {
  Confusion confusion{};
  std::size_t total = 0;
  std::size_t correct = 0;
  std::vector<GroupMetric> groups;
};

// Named groupings: anomaly (A+B+C+D), urgency 1/2/3, kind A/B/C/D.
struct Grouping {
  std::string name;
  std::vector<Status> members;
};
std::vector<Grouping> standard_groupings();

EvalReport evaluate(const std::vector<std::pair<Status, Status>>& predicted_actual);

nlohmann::json to_json(const Thresholds& t);
Thresholds thresholds_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EvalReport& r);
std::string confusion_csv(const EvalReport& r);
std::string confusion_svg(const EvalReport& r);

// bundle.json + nn_c.json + nn_d.json inside `dir`.
void save_bundle(const ClassifierBundle& bundle, const std::filesystem::path& dir);
ClassifierBundle load_bundle(const std::filesystem::path& dir);

}  // namespace rwacert::classifier
