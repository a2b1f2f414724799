#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rwacert/types.hpp"

// Data processing from raw telemetry to the two anomaly histograms:
// rolling-window regression of the friction model, changepoint detection,
// per-interval coefficient estimation, then pairing of dry-friction deltas
// into the anomaly C (matched increases) and anomaly D (leftovers) histograms.
namespace rwacert::pipeline {

struct BinRange {
  double lo = 0.0;
  double hi = 1.2;
  bool operator==(const BinRange&) const = default;
};

struct PipelineConfig {
  std::size_t window_size = 40;     // samples
  double residual_threshold = 0.02; // mNm, RMS residual that flags a change
  std::size_t min_interval = 40;    // samples
  double pair_match_tolerance = 0.15;  // relative
  std::size_t pair_match_max_gap = 2;  // delta-index distance
  std::size_t bins = 20;               // M
  BinRange range_c{};                  // anomaly C histogram geometry
  BinRange range_d{};                  // anomaly D histogram geometry

  void validate() const;
  std::size_t min_series_length() const { return 2 * window_size; }
  bool operator==(const PipelineConfig&) const = default;
};

struct WindowFit {
  double dry = 0.0;           // coefficient of sign(omega)
  double visc = 0.0;          // coefficient of omega
  double residual_rms = 0.0;
};

// Half-open sample range [start, end).
struct Interval {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t length() const { return end - start; }
  bool operator==(const Interval&) const = default;
};

struct CoefficientEstimate {
  Interval interval;
  double dry_hat = 0.0;
  double visc_hat = 0.0;
  double residual_rms = 0.0;
};

struct Pairing {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (increase, decrease) delta indices
  std::vector<double> matched_increases;
  std::vector<double> unmatched_magnitudes;
};

struct PipelineSummary {
  std::vector<CoefficientEstimate> estimates;
  double mean_dry = 0.0;
  double mean_visc = 0.0;
  std::vector<double> deltas;
  Histogram hist_c;
  Histogram hist_d;
};

// Ordinary least squares of f_k on [sign(omega_k), omega_k] over
// [start, start+len). Throws DegenerateDesign when the normal matrix G has
// det(G) <= 1e-12 * max|G_ij|^2.
WindowFit fit_window(const TimeSeries& series, std::size_t start, std::size_t len);

// RMS residual of the rolling fit for every window start.
std::vector<double> rolling_residuals(const TimeSeries& series, std::size_t window);

std::vector<Interval> detect_changepoints(const TimeSeries& series, const PipelineConfig& cfg);

std::vector<CoefficientEstimate> estimate_coefficients(const TimeSeries& series,
                                                       std::span<const Interval> intervals);

std::vector<double> dry_deltas(std::span<const CoefficientEstimate> estimates);

// Greedy left-to-right: each increase takes the first later unmatched decrease
// within `pair_match_max_gap` whose magnitude matches within the tolerance.
Pairing match_pairs(std::span<const double> deltas, const PipelineConfig& cfg);

// Bins values into `bins` equal-width bins over `range`; out-of-range values
// clamp to the end bins. Nonempty histograms are normalized to sum 1.
Histogram make_histogram(std::span<const double> values, std::size_t bins, BinRange range);

std::vector<double> bin_edges(std::size_t bins, BinRange range);

std::pair<Histogram, Histogram> build_histograms(std::span<const CoefficientEstimate> estimates,
                                                 const PipelineConfig& cfg);

PipelineSummary run_pipeline(const TimeSeries& series, const PipelineConfig& cfg);

// Default trigger calibration: factor x median rolling RMS residual over the
// given (nominal, noisy) series.
double calibrate_residual_threshold(std::span<const TimeSeries> nominal, std::size_t window,
                                    double factor = 4.0);

// [q_lo, q_hi] empirical quantiles of `values`; `fallback` when fewer than two
// distinct values are available.
BinRange quantile_range(std::vector<double> values, double q_lo, double q_hi, BinRange fallback);

double quantile(std::vector<double> values, double q);

nlohmann::json to_json(const PipelineConfig& cfg);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Histogram& h);
Histogram histogram_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PipelineSummary& summary);

}  // namespace rwacert::pipeline
