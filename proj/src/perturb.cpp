#include "rwacert/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rwacert/error.hpp"
#include "rwacert/rng.hpp"

namespace rwacert::perturb {

const char* to_string(Kind kind) noexcept {
  switch (kind) {
    case Kind::Gaussian: return "gaussian";
    case Kind::Uniform: return "uniform";
    case Kind::Poisson: return "poisson";
    case Kind::LinearTrend: return "linear_trend";
    case Kind::AmplitudeScaling: return "amplitude_scaling";
    case Kind::MissingData: return "missing_data";
  }
  return "?";
}

Kind kind_from_string(std::string_view name) {
  for (Kind k : kAllKinds) {
    if (name == to_string(k)) return k;
  }
  fail(ErrorKind::InvalidArgument, "unknown perturbation kind '" + std::string(name) + "'");
}

bool is_random(Kind kind) noexcept { return kind != Kind::LinearTrend && kind != Kind::AmplitudeScaling; }

bool preserves_length(Kind kind) noexcept { return kind != Kind::MissingData; }

const char* to_string(Channel c) noexcept { return c == Channel::C ? "C" : "D"; }

void Perturbation::validate() const {
  require(std::isfinite(epsilon) && epsilon >= 0.0, ErrorKind::InvalidArgument, "epsilon must be >= 0");
  if (kind == Kind::MissingData) require(epsilon < 1.0, ErrorKind::InvalidArgument, "missing-data epsilon must be < 1");
}

std::size_t missing_count(double epsilon, std::size_t n) {
  // Guard against 0.1 * 1000 = 100.00000000000001 rounding up to 101.
  return static_cast<std::size_t>(std::ceil(epsilon * static_cast<double>(n) - 1e-9));
}

namespace {

double amplitude(const std::vector<double>& x) {
  auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  return *hi - *lo;
}

template <class Draw>
void add_noise(std::vector<double>& x, double scale, Draw&& draw) {
  for (double& v : x) v += scale * draw();
}

}  // namespace

TimeSeries apply(const TimeSeries& series, const Perturbation& p, std::size_t min_length) {
  p.validate();
  series.validate();
  require(!series.empty(), ErrorKind::InvalidArgument, "cannot perturb an empty series");
  TimeSeries out = series;
  const std::size_t n = series.size();
  Rng rng(p.seed);
  switch (p.kind) {
    case Kind::Gaussian:
    case Kind::Uniform:
    case Kind::Poisson: {
      if (p.epsilon == 0.0) return out;
      auto draw = [&]() -> double {
        if (p.kind == Kind::Gaussian) return rng.normal();
        if (p.kind == Kind::Uniform) return rng.uniform(-1.0, 1.0);
        return static_cast<double>(rng.poisson(1.0)) - 1.0;
      };
      // omega noise for every sample first, then friction noise.
      add_noise(out.omega, p.epsilon * amplitude(series.omega), draw);
      add_noise(out.friction, p.epsilon * amplitude(series.friction), draw);
      return out;
    }
    case Kind::LinearTrend: {
      if (p.epsilon == 0.0 || n < 2) return out;
      const double slope = p.epsilon * amplitude(series.friction) / static_cast<double>(n - 1);
      for (std::size_t k = 0; k < n; ++k) out.friction[k] += slope * static_cast<double>(k);
      return out;
    }
    case Kind::AmplitudeScaling: {
      const double f = 1.0 + p.epsilon;
      for (double& v : out.omega) v *= f;
      for (double& v : out.friction) v *= f;
      return out;
    }
    case Kind::MissingData: {
      const std::size_t drop = missing_count(p.epsilon, n);
      require(n - std::min(drop, n) >= min_length, ErrorKind::InvalidArgument,
              "missing data at eps=" + std::to_string(p.epsilon) + " leaves " + std::to_string(n - std::min(drop, n)) +
                  " samples, below the minimum " + std::to_string(min_length));
      if (drop == 0) return out;
      std::vector<std::size_t> idx(n);
      std::iota(idx.begin(), idx.end(), 0);
      for (std::size_t i = 0; i < drop; ++i) std::swap(idx[i], idx[i + rng.index(n - i)]);
      std::vector<bool> removed(n, false);
      for (std::size_t i = 0; i < drop; ++i) removed[idx[i]] = true;
      out.omega.clear();
      out.friction.clear();
      for (std::size_t k = 0; k < n; ++k) {
        if (removed[k]) continue;
        out.omega.push_back(series.omega[k]);
        out.friction.push_back(series.friction[k]);
      }
      return out;
    }
  }
  return out;
}

double snr_channel(const std::vector<double>& s, const std::vector<double>& p) {
  require(s.size() == p.size() && !s.empty(), ErrorKind::DimensionMismatch,
          "SNR needs equal-length, nonempty series");
  double ps = 0.0, pn = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    ps += s[i] * s[i];
    const double d = s[i] - p[i];
    pn += d * d;
  }
  if (pn == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(ps / pn);
}

Snr snr(const TimeSeries& original, const TimeSeries& perturbed) {
  require(original.size() == perturbed.size(), ErrorKind::DimensionMismatch,
          "SNR undefined: length " + std::to_string(original.size()) + " vs " + std::to_string(perturbed.size()));
  return {snr_channel(original.friction, perturbed.friction), snr_channel(original.omega, perturbed.omega)};
}

double Envelope::width() const {
  double w = 0.0;
  for (std::size_t i = 0; i < lower.size(); ++i) w += upper[i] - lower[i];
  return w;
}

bool Envelope::contains(const std::vector<double>& h) const {
  if (h.size() != lower.size()) return false;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (h[i] < lower[i] || h[i] > upper[i]) return false;
  }
  return true;
}

std::vector<double> sweep_strengths(double epsilon, std::size_t n_iters, double lower_fraction) {
  require(n_iters >= 1, ErrorKind::InvalidArgument, "n_iters must be >= 1");
  require(lower_fraction >= 0.0 && lower_fraction <= 1.0, ErrorKind::InvalidArgument,
          "sweep lower fraction must be in [0, 1]");
  if (n_iters == 1) return {epsilon};
  std::vector<double> out(n_iters);
  const double lo = lower_fraction * epsilon;
  for (std::size_t i = 0; i < n_iters; ++i) {
    out[i] = lo + (epsilon - lo) * static_cast<double>(i) / static_cast<double>(n_iters - 1);
  }
  out.back() = epsilon;
  return out;
}

Envelope build_envelope(const TimeSeries& series, const Perturbation& p, Channel channel,
                        const pipeline::PipelineConfig& cfg, const EnvelopeOptions& options) {
  p.validate();
  require(options.n_iters >= 1, ErrorKind::InvalidArgument, "n_iters must be >= 1");
  std::vector<Perturbation> instances;
  if (is_random(p.kind)) {
    for (std::size_t i = 0; i < options.n_iters; ++i) {
      instances.push_back({p.kind, p.epsilon, derive_seed(p.seed, streams::kEnvelope, i)});
    }
  } else {
    for (double e : sweep_strengths(p.epsilon, options.n_iters, options.sweep_lower_fraction)) {
      instances.push_back({p.kind, e, p.seed});
    }
  }

  Envelope env;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    std::vector<double> h;
    try {
      auto perturbed = apply(series, instances[i], cfg.min_series_length());
      auto summary = pipeline::run_pipeline(perturbed, cfg);
      h = channel == Channel::C ? summary.hist_c.bins : summary.hist_d.bins;
    } catch (const Error& e) {
      fail(e.kind(), std::string("perturbed instance ") + std::to_string(i) + " (" + to_string(p.kind) +
                         ", eps=" + std::to_string(instances[i].epsilon) + "): " + e.what());
    }
    if (i == 0) {
      env.lower = h;
      env.upper = h;
    } else {
      for (std::size_t b = 0; b < h.size(); ++b) {
        env.lower[b] = std::min(env.lower[b], h[b]);
        env.upper[b] = std::max(env.upper[b], h[b]);
      }
    }
    env.members.push_back(std::move(h));
  }
  env.sample_count = instances.size();
  return env;
}

nlohmann::json to_json(const Envelope& e) {
  return {{"lower", e.lower}, {"upper", e.upper}, {"sample_count", e.sample_count}};
}

nlohmann::json to_json(const Perturbation& p) {
  return {{"kind", to_string(p.kind)}, {"epsilon", p.epsilon}, {"seed", p.seed}};
}

}  // namespace rwacert::perturb
