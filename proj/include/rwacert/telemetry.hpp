#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "rwacert/types.hpp"

// Synthetic reaction-wheel telemetry following the friction model
//
//   f_k = f_k^d * sign(omega_k) + f^v * omega_k + v_k,   v_k ~ N(0, sigma^2)
//
// with a piece-wise constant dry coefficient f_k^d. Anomalies act on it as:
//   A  scales the dry coefficient,
//   B  scales the viscous coefficient,
//   C  inserts matched +delta / -delta jump pairs,
//   D  inserts unmatched jumps.
// Every series may also carry small spontaneous (nominal) dry jumps.
namespace rwacert::telemetry {

struct SpinProfile {
  enum class Shape { Constant, Ramp, Sinusoid };

  Shape shape = Shape::Sinusoid;
  double omega0 = 150.0;     // rad/s
  double slope = 0.0;        // rad/s per sample (Ramp)
  double amplitude = 100.0;  // rad/s (Sinusoid)
  double period = 200.0;     // samples (Sinusoid)

  static SpinProfile constant(double omega);
  static SpinProfile ramp(double omega0, double slope);
  static SpinProfile sinusoid(double omega0, double amplitude, double period);

  double at(std::size_t k) const;
};

struct GenConfig {
  std::size_t n_samples = 4000;
  double dry_base = 1.0;     // mNm
  double visc_base = 0.001;  // mNm s/rad
  double noise_sigma = 0.005;  // mNm
  SpinProfile spin{};
  double nominal_jump_rate = 1.0;       // expected spontaneous jumps per series
  double nominal_jump_magnitude = 0.2;  // mNm
  std::size_t min_event_spacing = 200;  // samples between consecutive jumps
  std::size_t edge_margin = 100;        // no jumps this close to either end
  // Window length for the degenerate-design check; also fixes the shortest
  // accepted series (2 windows).
  std::size_t check_window = 40;
  std::uint64_t seed = 0;

  void validate() const;
};

// Severity scaling: urgency u multiplies the base effect by (1 + u * step).
struct SeverityScale {
  double dry_step = 0.3;          // A: f^d factor 1 + 0.3u
  double visc_step = 0.5;         // B: f^v factor 1 + 0.5u
  double pair_base = 0.2;         // C: pair magnitude 0.2 (1 + u) mNm
  double pair_step = 1.0;
  double pair_rate = 2.0;
  double jump_base = 0.2;         // D: mean magnitude 0.2 (1 + 1.25u) mNm
  double jump_step = 1.25;
  double jump_spread = 0.05;
  double jump_rate = 4.0;
};

struct AnomalyProfile {
  Status status{};
  double dry_increase_factor = 1.0;
  double visc_increase_factor = 1.0;
  // C
  double pair_jump_magnitude = 0.0;
  double pair_magnitude_jitter = 0.1;  // relative, uniform
  double pair_rate = 0.0;              // expected pair events (at least one)
  // D
  double random_jump_mean = 0.0;
  double random_jump_spread = 0.0;
  double jump_rate = 0.0;              // expected jumps (at least one)
  // D jumps are redrawn while an earlier opposite-signed jump within the last
  // few events has a magnitude within this relative margin of them.
  double unmatched_margin = 0.3;

  static AnomalyProfile for_status(Status status, const SeverityScale& scale = {});
  void validate() const;
};

enum class EventType { Nominal, PairUp, PairDown, Unmatched };

struct JumpEvent {
  std::size_t index = 0;  // first sample carrying the new level
  double delta = 0.0;     // mNm
  EventType type = EventType::Nominal;
};

// Ground-truth channel, never seen by the classifier.
struct GroundTruth {
  std::vector<double> dry;  // latent f_k^d
  double visc = 0.0;        // latent f^v
  std::vector<JumpEvent> events;
};

struct GeneratedSeries {
  TimeSeries series;
  Status status;
  GroundTruth truth;
};

// Pure function of (profile, config): identical inputs give identical output.
GeneratedSeries generate_series(const AnomalyProfile& profile, const GenConfig& config);

// Throws DegenerateDesign when sign(omega) and omega are collinear in every
// window of `window` samples.
void check_spin_design(const std::vector<double>& omega, std::size_t window);

const char* to_string(EventType type) noexcept;

nlohmann::json to_json(const GenConfig& config);
GenConfig gen_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AnomalyProfile& profile);
AnomalyProfile anomaly_profile_from_json(const nlohmann::json& j);

}  // namespace rwacert::telemetry
