#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rwacert/pipeline.hpp"
#include "rwacert/types.hpp"

// Series perturbations of strength epsilon, SNR, and histogram envelopes.
//
//   Gaussian / Uniform / Poisson   x_k += eps * A * n_k per channel, with A the
//                                  channel's max - min and n_k ~ N(0,1),
//                                  U(-1,1) or Poisson(1) - 1.
//   LinearTrend                    friction_k += eps * A_f * k / (N - 1)
//   AmplitudeScaling               both channels *= (1 + eps)
//   MissingData                    drop ceil(eps * N) random frames
namespace rwacert::perturb {

enum class Kind { Gaussian, Uniform, Poisson, LinearTrend, AmplitudeScaling, MissingData };

inline constexpr Kind kAllKinds[] = {Kind::Gaussian,    Kind::Uniform,          Kind::Poisson,
                                     Kind::LinearTrend, Kind::AmplitudeScaling, Kind::MissingData};

const char* to_string(Kind kind) noexcept;
Kind kind_from_string(std::string_view name);

// Random kinds consume the seed; LinearTrend and AmplitudeScaling ignore it.
bool is_random(Kind kind) noexcept;
// Kinds whose output keeps the sample count (SNR is defined).
bool preserves_length(Kind kind) noexcept;

struct Perturbation {
  Kind kind = Kind::Gaussian;
  double epsilon = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Throws InvalidArgument when MissingData would leave fewer than `min_length` samples.
TimeSeries apply(const TimeSeries& series, const Perturbation& p,
                 std::size_t min_length = pipeline::PipelineConfig{}.min_series_length());

// Number of frames MissingData removes from a series of length n.
std::size_t missing_count(double epsilon, std::size_t n);

struct Snr {
  double friction_db = 0.0;  // reported value
  double omega_db = 0.0;
};

// 10 log10(Power(s) / Power(s - p)) per channel; +infinity when s == p.
Snr snr(const TimeSeries& original, const TimeSeries& perturbed);

double snr_channel(const std::vector<double>& s, const std::vector<double>& p);

enum class Channel { C, D };

const char* to_string(Channel c) noexcept;

struct Envelope {
  std::vector<double> lower;  // u
  std::vector<double> upper;  // v
  std::size_t sample_count = 0;
  std::vector<std::vector<double>> members;  // generating histograms, in order

  double width() const;
  bool contains(const std::vector<double>& h) const;
};

struct EnvelopeOptions {
  std::size_t n_iters = 10;
  // Deterministic kinds sweep strengths linearly over [fraction * eps, eps].
  double sweep_lower_fraction = 0.5;
};

// Random kinds: instance i uses seed derive_seed(p.seed, streams::kEnvelope, i),
// so the instances used for n iterations are a prefix of those for any larger n.
Envelope build_envelope(const TimeSeries& series, const Perturbation& p, Channel channel,
                        const pipeline::PipelineConfig& cfg, const EnvelopeOptions& options = {});

// Strengths used for the deterministic sweep.
std::vector<double> sweep_strengths(double epsilon, std::size_t n_iters, double lower_fraction);

nlohmann::json to_json(const Envelope& e);
nlohmann::json to_json(const Perturbation& p);

}  // namespace rwacert::perturb
