#include "rwacert/telemetry.hpp"

#include <algorithm>
#include <cmath>

#include "rwacert/error.hpp"
#include "rwacert/rng.hpp"

namespace rwacert::telemetry {

namespace {

constexpr int kMaxRedraws = 64;
constexpr std::size_t kConflictLookback = 4;

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

int at_least_one(Rng& rng, double mean) {
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    int n = rng.poisson(mean);
    if (n >= 1) return n;
  }
  return 1;
}

// An increase followed by a decrease of close magnitude would be read back as
// a matched pair.
bool forms_pair(double earlier, double later, double margin) {
  return earlier > 0.0 && later < 0.0 && std::abs(earlier + later) <= margin * earlier;
}

}  // namespace

// ---------------------------------------------------------------------------

SpinProfile SpinProfile::constant(double omega) {
  SpinProfile p;
  p.shape = Shape::Constant;
  p.omega0 = omega;
  p.amplitude = 0.0;
  return p;
}

SpinProfile SpinProfile::ramp(double omega0, double slope) {
  SpinProfile p;
  p.shape = Shape::Ramp;
  p.omega0 = omega0;
  p.slope = slope;
  p.amplitude = 0.0;
  return p;
}

SpinProfile SpinProfile::sinusoid(double omega0, double amplitude, double period) {
  SpinProfile p;
  p.shape = Shape::Sinusoid;
  p.omega0 = omega0;
  p.amplitude = amplitude;
  p.period = period;
  return p;
}

double SpinProfile::at(std::size_t k) const {
  const double t = static_cast<double>(k);
  switch (shape) {
    case Shape::Constant: return omega0;
    case Shape::Ramp: return omega0 + slope * t;
    case Shape::Sinusoid: return omega0 + amplitude * std::sin(2.0 * M_PI * t / period);
  }
  return omega0;
}

void GenConfig::validate() const {
  require(n_samples > 0, ErrorKind::InvalidArgument, "n_samples must be positive");
  require(check_window >= 4, ErrorKind::InvalidArgument, "check_window must be >= 4");
  require(n_samples >= 2 * check_window, ErrorKind::InvalidArgument,
          "n_samples " + std::to_string(n_samples) + " below pipeline minimum " +
              std::to_string(2 * check_window));
  require(std::isfinite(dry_base) && dry_base > 0.0, ErrorKind::InvalidArgument, "dry_base must be > 0");
  require(std::isfinite(visc_base), ErrorKind::InvalidArgument, "visc_base must be finite");
  require(std::isfinite(noise_sigma) && noise_sigma >= 0.0, ErrorKind::InvalidArgument,
          "noise_sigma must be >= 0");
  require(nominal_jump_rate >= 0.0, ErrorKind::InvalidArgument, "nominal_jump_rate must be >= 0");
  require(nominal_jump_magnitude > 0.0, ErrorKind::InvalidArgument,
          "nominal_jump_magnitude must be > 0");
  require(min_event_spacing >= 1, ErrorKind::InvalidArgument, "min_event_spacing must be >= 1");
  if (spin.shape == SpinProfile::Shape::Sinusoid) {
    require(spin.period > 0.0, ErrorKind::InvalidArgument, "sinusoid period must be > 0");
  }
}

AnomalyProfile AnomalyProfile::for_status(Status status, const SeverityScale& scale) {
  AnomalyProfile p;
  p.status = Status::make(status.kind, status.urgency);
  const double u = status.urgency;
  switch (status.kind) {
    case AnomalyKind::Nominal: break;
    case AnomalyKind::A: p.dry_increase_factor = 1.0 + u * scale.dry_step; break;
    case AnomalyKind::B: p.visc_increase_factor = 1.0 + u * scale.visc_step; break;
    case AnomalyKind::C:
      p.pair_jump_magnitude = scale.pair_base * (1.0 + u * scale.pair_step);
      p.pair_rate = scale.pair_rate;
      break;
    case AnomalyKind::D:
      p.random_jump_mean = scale.jump_base * (1.0 + u * scale.jump_step);
      p.random_jump_spread = scale.jump_spread;
      p.jump_rate = scale.jump_rate;
      break;
  }
  return p;
}

void AnomalyProfile::validate() const {
  Status::make(status.kind, status.urgency);
  require(dry_increase_factor >= 1.0 && visc_increase_factor >= 1.0, ErrorKind::InvalidArgument,
          "increase factors must be >= 1");
  require(pair_rate >= 0.0 && jump_rate >= 0.0, ErrorKind::InvalidArgument, "rates must be >= 0");
  require(pair_magnitude_jitter >= 0.0 && pair_magnitude_jitter < 1.0, ErrorKind::InvalidArgument,
          "pair_magnitude_jitter must be in [0, 1)");
  if (status.kind == AnomalyKind::C) {
    require(pair_jump_magnitude > 0.0, ErrorKind::InvalidArgument, "anomaly C needs pair_jump_magnitude > 0");
  }
  if (status.kind == AnomalyKind::D) {
    require(random_jump_mean > 0.0 && random_jump_spread >= 0.0 &&
                random_jump_spread < random_jump_mean,
            ErrorKind::InvalidArgument, "anomaly D needs 0 <= spread < mean");
  }
}

const char* to_string(EventType type) noexcept {
  switch (type) {
    case EventType::Nominal: return "nominal";
    case EventType::PairUp: return "pair_up";
    case EventType::PairDown: return "pair_down";
    case EventType::Unmatched: return "unmatched";
  }
  return "?";
}

void check_spin_design(const std::vector<double>& omega, std::size_t window) {
  const std::size_t n = omega.size();
  if (n < window || window == 0) fail(ErrorKind::InvalidArgument, "series shorter than design window");
  for (std::size_t start = 0; start + window <= n; start += std::max<std::size_t>(1, window / 2)) {
    double ss = 0, sw = 0, ww = 0;
    for (std::size_t k = start; k < start + window; ++k) {
      double s = sign_of(omega[k]);
      ss += s * s;
      sw += s * omega[k];
      ww += omega[k] * omega[k];
    }
    double largest = std::max({std::abs(ss), std::abs(sw), std::abs(ww)});
    double det = ss * ww - sw * sw;
    if (largest > 0.0 && det > 1e-12 * largest * largest) return;
  }
  fail(ErrorKind::DegenerateDesign,
       "degenerate regression design: sign(omega) and omega are collinear in every window");
}

GeneratedSeries generate_series(const AnomalyProfile& profile, const GenConfig& config) {
  config.validate();
  profile.validate();

  const std::size_t n = config.n_samples;
  std::vector<double> omega(n);
  for (std::size_t k = 0; k < n; ++k) omega[k] = config.spin.at(k);
  check_spin_design(omega, config.check_window);

  Rng rng(config.seed);
  const AnomalyKind kind = profile.status.kind;

  // Event counts.
  int n_nominal = rng.poisson(config.nominal_jump_rate);
  int n_pairs = kind == AnomalyKind::C ? at_least_one(rng, profile.pair_rate) : 0;
  int n_unmatched = kind == AnomalyKind::D ? at_least_one(rng, profile.jump_rate) : 0;

  const std::size_t span = n > 2 * config.edge_margin ? n - 2 * config.edge_margin : 0;
  const int capacity = span == 0 ? 0 : static_cast<int>(span / config.min_event_spacing) + 1;
  auto slots = [&] { return n_nominal + 2 * n_pairs + n_unmatched; };
  while (slots() > capacity && n_nominal > 0) --n_nominal;
  while (slots() > capacity && n_unmatched > 1) --n_unmatched;
  while (slots() > capacity && n_pairs > 1) --n_pairs;
  require(slots() <= capacity, ErrorKind::InvalidArgument,
          "series too short to place the anomaly's jump events");

  // Random order of event units; a C pair occupies two consecutive slots.
  std::vector<EventType> units;
  units.insert(units.end(), static_cast<std::size_t>(n_nominal), EventType::Nominal);
  units.insert(units.end(), static_cast<std::size_t>(n_pairs), EventType::PairUp);
  units.insert(units.end(), static_cast<std::size_t>(n_unmatched), EventType::Unmatched);
  for (std::size_t i = units.size(); i > 1; --i) std::swap(units[i - 1], units[rng.index(i)]);

  std::vector<EventType> sequence;
  for (EventType unit : units) {
    sequence.push_back(unit);
    if (unit == EventType::PairUp) sequence.push_back(EventType::PairDown);
  }

  // Positions: sorted uniforms on the slack, then spread by the spacing.
  const std::size_t count = sequence.size();
  std::vector<std::size_t> positions(count);
  if (count > 0) {
    const double slack = static_cast<double>(span - (count - 1) * config.min_event_spacing);
    std::vector<double> offsets(count);
    for (double& o : offsets) o = rng.uniform(0.0, slack);
    std::sort(offsets.begin(), offsets.end());
    for (std::size_t i = 0; i < count; ++i) {
      positions[i] = config.edge_margin + static_cast<std::size_t>(offsets[i]) + i * config.min_event_spacing;
    }
  }

  // Magnitudes and signs in time order. Nominal and D jumps take the sign that
  // keeps the dry level closest to its baseline.
  std::vector<JumpEvent> events;
  events.reserve(count);
  double level = 0.0;
  double pending_pair = 0.0;
  auto pick_sign = [&](double magnitude) {
    double up = std::abs(level + magnitude);
    double down = std::abs(level - magnitude);
    if (up < down) return 1.0;
    if (down < up) return -1.0;
    return rng.uniform01() < 0.5 ? 1.0 : -1.0;
  };
  for (std::size_t i = 0; i < count; ++i) {
    JumpEvent event;
    event.index = positions[i];
    event.type = sequence[i];
    switch (sequence[i]) {
      case EventType::Nominal: {
        double magnitude = config.nominal_jump_magnitude * rng.uniform(0.9, 1.1);
        event.delta = pick_sign(magnitude) * magnitude;
        break;
      }
      case EventType::PairUp: {
        double jitter = profile.pair_magnitude_jitter;
        pending_pair = profile.pair_jump_magnitude * rng.uniform(1.0 - jitter, 1.0 + jitter);
        event.delta = pending_pair;
        break;
      }
      case EventType::PairDown:
        event.delta = -pending_pair;
        break;
      case EventType::Unmatched: {
        const double lo = profile.random_jump_mean - profile.random_jump_spread;
        const double hi = profile.random_jump_mean + profile.random_jump_spread;
        for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
          double magnitude = rng.uniform(lo, hi);
          event.delta = pick_sign(magnitude) * magnitude;
          bool conflict = false;
          std::size_t first = events.size() > kConflictLookback ? events.size() - kConflictLookback : 0;
          for (std::size_t j = first; j < events.size(); ++j) {
            if (forms_pair(events[j].delta, event.delta, profile.unmatched_margin)) conflict = true;
          }
          if (!conflict) break;
        }
        break;
      }
    }
    level += event.delta;
    events.push_back(event);
  }

  GeneratedSeries out;
  out.status = profile.status;
  out.truth.visc = config.visc_base * profile.visc_increase_factor;
  out.truth.dry.resize(n);
  const double base_dry = config.dry_base * profile.dry_increase_factor;
  {
    double offset = 0.0;
    std::size_t next = 0;
    for (std::size_t k = 0; k < n; ++k) {
      while (next < events.size() && events[next].index == k) offset += events[next++].delta;
      out.truth.dry[k] = base_dry + offset;
    }
  }
  out.truth.events = std::move(events);

  out.series.omega = std::move(omega);
  out.series.friction.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double w = out.series.omega[k];
    double noise = config.noise_sigma > 0.0 ? config.noise_sigma * rng.normal() : 0.0;
    out.series.friction[k] = out.truth.dry[k] * sign_of(w) + out.truth.visc * w + noise;
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

const char* shape_name(SpinProfile::Shape shape) {
  switch (shape) {
    case SpinProfile::Shape::Constant: return "constant";
    case SpinProfile::Shape::Ramp: return "ramp";
    case SpinProfile::Shape::Sinusoid: return "sinusoid";
  }
  return "?";
}

SpinProfile::Shape shape_from_name(const std::string& name) {
  if (name == "constant") return SpinProfile::Shape::Constant;
  if (name == "ramp") return SpinProfile::Shape::Ramp;
  if (name == "sinusoid") return SpinProfile::Shape::Sinusoid;
  fail(ErrorKind::Parse, "unknown spin profile '" + name + "'");
}

}  // namespace

nlohmann::json to_json(const GenConfig& c) {
  return {
      {"n_samples", c.n_samples},
      {"dry_base", c.dry_base},
      {"visc_base", c.visc_base},
      {"noise_sigma", c.noise_sigma},
      {"spin", {{"shape", shape_name(c.spin.shape)},
                {"omega0", c.spin.omega0},
                {"slope", c.spin.slope},
                {"amplitude", c.spin.amplitude},
                {"period", c.spin.period}}},
      {"nominal_jump_rate", c.nominal_jump_rate},
      {"nominal_jump_magnitude", c.nominal_jump_magnitude},
      {"min_event_spacing", c.min_event_spacing},
      {"edge_margin", c.edge_margin},
      {"check_window", c.check_window},
      {"seed", c.seed},
  };
}

GenConfig gen_config_from_json(const nlohmann::json& j) {
  GenConfig c;
  c.n_samples = j.value("n_samples", c.n_samples);
  c.dry_base = j.value("dry_base", c.dry_base);
  c.visc_base = j.value("visc_base", c.visc_base);
  c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
  if (j.contains("spin")) {
    const auto& s = j.at("spin");
    c.spin.shape = shape_from_name(s.value("shape", std::string("sinusoid")));
    c.spin.omega0 = s.value("omega0", c.spin.omega0);
    c.spin.slope = s.value("slope", c.spin.slope);
    c.spin.amplitude = s.value("amplitude", c.spin.amplitude);
    c.spin.period = s.value("period", c.spin.period);
  }
  c.nominal_jump_rate = j.value("nominal_jump_rate", c.nominal_jump_rate);
  c.nominal_jump_magnitude = j.value("nominal_jump_magnitude", c.nominal_jump_magnitude);
  c.min_event_spacing = j.value("min_event_spacing", c.min_event_spacing);
  c.edge_margin = j.value("edge_margin", c.edge_margin);
  c.check_window = j.value("check_window", c.check_window);
  c.seed = j.value("seed", c.seed);
  return c;
}

nlohmann::json to_json(const AnomalyProfile& p) {
  return {
      {"status", p.status.str()},
      {"dry_increase_factor", p.dry_increase_factor},
      {"visc_increase_factor", p.visc_increase_factor},
      {"pair_jump_magnitude", p.pair_jump_magnitude},
      {"pair_magnitude_jitter", p.pair_magnitude_jitter},
      {"pair_rate", p.pair_rate},
      {"random_jump_mean", p.random_jump_mean},
      {"random_jump_spread", p.random_jump_spread},
      {"jump_rate", p.jump_rate},
      {"unmatched_margin", p.unmatched_margin},
  };
}

AnomalyProfile anomaly_profile_from_json(const nlohmann::json& j) {
  AnomalyProfile p;
  p.status = Status::parse(j.at("status").get<std::string>());
  p.dry_increase_factor = j.value("dry_increase_factor", p.dry_increase_factor);
  p.visc_increase_factor = j.value("visc_increase_factor", p.visc_increase_factor);
  p.pair_jump_magnitude = j.value("pair_jump_magnitude", p.pair_jump_magnitude);
  p.pair_magnitude_jitter = j.value("pair_magnitude_jitter", p.pair_magnitude_jitter);
  p.pair_rate = j.value("pair_rate", p.pair_rate);
  p.random_jump_mean = j.value("random_jump_mean", p.random_jump_mean);
  p.random_jump_spread = j.value("random_jump_spread", p.random_jump_spread);
  p.jump_rate = j.value("jump_rate", p.jump_rate);
  p.unmatched_margin = j.value("unmatched_margin", p.unmatched_margin);
  return p;
}

}  // namespace rwacert::telemetry
