#include "rwacert/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "rwacert/error.hpp"

namespace rwacert::pipeline {

namespace {

constexpr double kSingularTolerance = 1e-12;
constexpr std::size_t kResumEvery = 256;

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

bool degenerate(double ss, double sw, double ww) {
  double largest = std::max({std::abs(ss), std::abs(sw), std::abs(ww)});
  double det = ss * ww - sw * sw;
  return !(largest > 0.0) || det <= kSingularTolerance * largest * largest;
}

[[noreturn]] void throw_degenerate(std::size_t start, std::size_t len) {
  fail(ErrorKind::DegenerateDesign, "degenerate design in window [" + std::to_string(start) + ", " +
                                        std::to_string(start + len) +
                                        "): sign(omega) and omega are collinear");
}

// Normal-equation sums of the 2-column design over a sliding window.
struct WindowSums {
  double ss = 0, sw = 0, ww = 0, sf = 0, wf = 0, ff = 0;

  void add(double s, double w, double f, double sign) {
    ss += sign * s * s;
    sw += sign * s * w;
    ww += sign * w * w;
    sf += sign * s * f;
    wf += sign * w * f;
    ff += sign * f * f;
  }
};

struct Screening {
  const std::vector<double>& sign;
  const TimeSeries& series;
  WindowSums sums;
  std::size_t start = 0;
  std::size_t window = 0;
  std::size_t since_resum = 0;

  void reset(std::size_t s) {
    start = s;
    sums = {};
    for (std::size_t k = s; k < s + window; ++k) sums.add(sign[k], series.omega[k], series.friction[k], 1.0);
    since_resum = 0;
  }

  void advance() {
    if (++since_resum >= kResumEvery) {
      reset(start + 1);
      return;
    }
    std::size_t out = start;
    std::size_t in = start + window;
    sums.add(sign[out], series.omega[out], series.friction[out], -1.0);
    sums.add(sign[in], series.omega[in], series.friction[in], 1.0);
    ++start;
  }

  double rms() const {
    const auto& m = sums;
    if (degenerate(m.ss, m.sw, m.ww)) throw_degenerate(start, window);
    double det = m.ss * m.ww - m.sw * m.sw;
    double d = (m.sf * m.ww - m.sw * m.wf) / det;
    double v = (m.ss * m.wf - m.sw * m.sf) / det;
    double sse = m.ff - d * m.sf - v * m.wf;
    return std::sqrt(std::max(sse, 0.0) / static_cast<double>(window));
  }
};

// Solves a symmetric 3x3 system by Gaussian elimination with partial pivoting.
bool solve3(std::array<std::array<double, 3>, 3> a, std::array<double, 3> b, std::array<double, 3>& x) {
  double scale = 0.0;
  for (auto& row : a) for (double v : row) scale = std::max(scale, std::abs(v));
  if (!(scale > 0.0)) return false;
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r) if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    if (std::abs(a[pivot][col]) <= 1e-12 * scale) return false;
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (int r = col + 1; r < 3; ++r) {
      double factor = a[r][col] / a[col][col];
      for (int c = col; c < 3; ++c) a[r][c] -= factor * a[col][c];
      b[r] -= factor * b[col];
    }
  }
  for (int r = 2; r >= 0; --r) {
    double acc = b[r];
    for (int c = r + 1; c < 3; ++c) acc -= a[r][c] * x[c];
    x[r] = acc / a[r][r];
  }
  return true;
}

// Locates a dry-coefficient step in [lo, hi): the split c minimizing the
// residual of f ~ d sign + v omega + delta sign 1[k >= c].
std::size_t locate_change(const TimeSeries& series, const std::vector<double>& sign, std::size_t lo,
                          std::size_t hi) {
  const std::size_t n = hi - lo;
  WindowSums total;
  for (std::size_t k = lo; k < hi; ++k) total.add(sign[k], series.omega[k], series.friction[k], 1.0);

  // Suffix sums of the step column's cross products.
  std::vector<double> t_ss(n + 1, 0.0), t_sw(n + 1, 0.0), t_sf(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    std::size_t k = lo + i;
    t_ss[i] = t_ss[i + 1] + sign[k] * sign[k];
    t_sw[i] = t_sw[i + 1] + sign[k] * series.omega[k];
    t_sf[i] = t_sf[i + 1] + sign[k] * series.friction[k];
  }

  std::size_t best = lo + n / 2;
  double best_sse = std::numeric_limits<double>::infinity();
  for (std::size_t i = 2; i + 2 <= n; ++i) {
    std::array<std::array<double, 3>, 3> g{{{total.ss, total.sw, t_ss[i]},
                                            {total.sw, total.ww, t_sw[i]},
                                            {t_ss[i], t_sw[i], t_ss[i]}}};
    std::array<double, 3> rhs{total.sf, total.wf, t_sf[i]};
    std::array<double, 3> beta{};
    if (!solve3(g, rhs, beta)) continue;
    double sse = total.ff - beta[0] * rhs[0] - beta[1] * rhs[1] - beta[2] * rhs[2];
    if (sse < best_sse) {
      best_sse = sse;
      best = lo + i;
    }
  }
  return best;
}

std::vector<double> signs(const TimeSeries& series) {
  std::vector<double> out(series.size());
  for (std::size_t k = 0; k < series.size(); ++k) out[k] = sign_of(series.omega[k]);
  return out;
}

}  // namespace

void PipelineConfig::validate() const {
  require(window_size >= 4, ErrorKind::InvalidArgument, "window_size must be >= 4");
  require(std::isfinite(residual_threshold) && residual_threshold > 0.0, ErrorKind::InvalidArgument,
          "residual_threshold must be > 0");
  require(min_interval >= 3, ErrorKind::InvalidArgument, "min_interval must be >= 3");
  require(pair_match_tolerance > 0.0 && pair_match_tolerance < 1.0, ErrorKind::InvalidArgument,
          "pair_match_tolerance must be in (0, 1)");
  require(pair_match_max_gap >= 1, ErrorKind::InvalidArgument, "pair_match_max_gap must be >= 1");
  require(bins >= 2, ErrorKind::InvalidArgument, "bin count M must be >= 2");
  require(range_c.hi > range_c.lo && range_d.hi > range_d.lo, ErrorKind::InvalidArgument,
          "bin ranges must have hi > lo");
}

WindowFit fit_window(const TimeSeries& series, std::size_t start, std::size_t len) {
  require(len >= 3, ErrorKind::InvalidArgument, "fit window needs at least 3 samples");
  require(start + len <= series.size(), ErrorKind::InvalidArgument, "fit window exceeds series");

  std::vector<double> q1(len), q2(len);
  double ss = 0, sw = 0, ww = 0;
  for (std::size_t i = 0; i < len; ++i) {
    double s = sign_of(series.omega[start + i]);
    double w = series.omega[start + i];
    q1[i] = s;
    q2[i] = w;
    ss += s * s;
    sw += s * w;
    ww += w * w;
  }
  if (degenerate(ss, sw, ww)) throw_degenerate(start, len);

  // Thin QR of the design by Gram-Schmidt with one reorthogonalization pass.
  auto dot = [len](const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < len; ++i) acc += a[i] * b[i];
    return acc;
  };
  const double r11 = std::sqrt(dot(q1, q1));
  for (double& v : q1) v /= r11;
  double r12 = 0.0;
  for (int pass = 0; pass < 2; ++pass) {
    double c = dot(q1, q2);
    for (std::size_t i = 0; i < len; ++i) q2[i] -= c * q1[i];
    r12 += c;
  }
  const double r22 = std::sqrt(dot(q2, q2));
  if (!(r22 > 0.0)) throw_degenerate(start, len);
  for (double& v : q2) v /= r22;

  double y1 = 0.0, y2 = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    y1 += q1[i] * series.friction[start + i];
    y2 += q2[i] * series.friction[start + i];
  }
  WindowFit fit;
  fit.visc = y2 / r22;
  fit.dry = (y1 - r12 * fit.visc) / r11;

  double sse = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    std::size_t k = start + i;
    double r = series.friction[k] - fit.dry * sign_of(series.omega[k]) - fit.visc * series.omega[k];
    sse += r * r;
  }
  fit.residual_rms = std::sqrt(sse / static_cast<double>(len));
  return fit;
}

std::vector<double> rolling_residuals(const TimeSeries& series, std::size_t window) {
  require(window >= 3 && series.size() >= window, ErrorKind::InvalidArgument,
          "series shorter than rolling window");
  auto sign = signs(series);
  Screening screen{sign, series, {}, 0, window};
  screen.reset(0);
  std::vector<double> out;
  out.reserve(series.size() - window + 1);
  for (;;) {
    out.push_back(screen.rms());
    if (screen.start + window >= series.size()) break;
    screen.advance();
  }
  return out;
}

std::vector<Interval> detect_changepoints(const TimeSeries& series, const PipelineConfig& cfg) {
  cfg.validate();
  const std::size_t n = series.size();
  const std::size_t w = cfg.window_size;
  require(n >= cfg.min_series_length(), ErrorKind::InvalidArgument,
          "series length " + std::to_string(n) + " below 2 x window_size");

  auto sign = signs(series);
  Screening screen{sign, series, {}, 0, w};
  screen.reset(0);

  std::vector<std::size_t> boundaries{0};
  std::size_t current = 0;
  for (;;) {
    if (screen.rms() > cfg.residual_threshold) {
      std::size_t s = screen.start;
      std::size_t c = locate_change(series, sign, s, std::min(n, s + 2 * w));
      if (c >= current + cfg.min_interval && n - c >= cfg.min_interval) {
        boundaries.push_back(c);
        current = c;
        if (c + w > n) break;
        screen.reset(c);
        continue;
      }
    }
    if (screen.start + w >= n) break;
    screen.advance();
  }
  boundaries.push_back(n);

  std::vector<Interval> intervals;
  for (std::size_t i = 0; i + 1 < boundaries.size(); ++i) intervals.push_back({boundaries[i], boundaries[i + 1]});
  return intervals;
}

std::vector<CoefficientEstimate> estimate_coefficients(const TimeSeries& series,
                                                       std::span<const Interval> intervals) {
  require(!intervals.empty(), ErrorKind::InvalidArgument, "no intervals to estimate");
  require(intervals.front().start == 0 && intervals.back().end == series.size(), ErrorKind::InvalidArgument,
          "intervals must cover the whole series");
  std::vector<CoefficientEstimate> out;
  out.reserve(intervals.size());
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    const Interval& iv = intervals[i];
    require(iv.start < iv.end, ErrorKind::InvalidArgument, "empty interval");
    if (i > 0) require(intervals[i - 1].end == iv.start, ErrorKind::InvalidArgument, "intervals must be contiguous");
    WindowFit fit = fit_window(series, iv.start, iv.length());
    out.push_back({iv, fit.dry, fit.visc, fit.residual_rms});
  }
  return out;
}

std::vector<double> dry_deltas(std::span<const CoefficientEstimate> estimates) {
  std::vector<double> deltas;
  for (std::size_t i = 0; i + 1 < estimates.size(); ++i) {
    deltas.push_back(estimates[i + 1].dry_hat - estimates[i].dry_hat);
  }
  return deltas;
}

Pairing match_pairs(std::span<const double> deltas, const PipelineConfig& cfg) {
  Pairing out;
  std::vector<bool> used(deltas.size(), false);
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (used[i] || !(deltas[i] > 0.0)) continue;
    const std::size_t last = std::min(deltas.size() - 1, i + cfg.pair_match_max_gap);
    for (std::size_t j = i + 1; j <= last; ++j) {
      if (used[j] || !(deltas[j] < 0.0)) continue;
      if (std::abs(deltas[i] + deltas[j]) <= cfg.pair_match_tolerance * std::abs(deltas[i])) {
        used[i] = used[j] = true;
        out.pairs.emplace_back(i, j);
        out.matched_increases.push_back(deltas[i]);
        break;
      }
    }
  }
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!used[i]) out.unmatched_magnitudes.push_back(std::abs(deltas[i]));
  }
  return out;
}

std::vector<double> bin_edges(std::size_t bins, BinRange range) {
  require(bins >= 1 && range.hi > range.lo, ErrorKind::InvalidArgument, "bad histogram geometry");
  std::vector<double> edges(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) {
    edges[i] = range.lo + (range.hi - range.lo) * static_cast<double>(i) / static_cast<double>(bins);
  }
  edges.back() = range.hi;
  return edges;
}

Histogram make_histogram(std::span<const double> values, std::size_t bins, BinRange range) {
  Histogram h;
  h.edges = bin_edges(bins, range);
  h.bins.assign(bins, 0.0);
  const double width = range.hi - range.lo;
  for (double x : values) {
    require(std::isfinite(x), ErrorKind::InvalidArgument, "non-finite histogram value");
    double t = std::floor((x - range.lo) / width * static_cast<double>(bins));
    std::size_t idx = t <= 0.0 ? 0 : std::min(bins - 1, static_cast<std::size_t>(t));
    h.bins[idx] += 1.0;
  }
  h.count = values.size();
  if (h.count > 0) {
    for (double& b : h.bins) b /= static_cast<double>(h.count);
  }
  return h;
}

std::pair<Histogram, Histogram> build_histograms(std::span<const CoefficientEstimate> estimates,
                                                 const PipelineConfig& cfg) {
  require(!estimates.empty(), ErrorKind::InvalidArgument, "no coefficient estimates");
  auto deltas = dry_deltas(estimates);
  Pairing pairing = match_pairs(deltas, cfg);
  return {make_histogram(pairing.matched_increases, cfg.bins, cfg.range_c),
          make_histogram(pairing.unmatched_magnitudes, cfg.bins, cfg.range_d)};
}

PipelineSummary run_pipeline(const TimeSeries& series, const PipelineConfig& cfg) {
  cfg.validate();
  series.validate();
  PipelineSummary out;
  auto intervals = detect_changepoints(series, cfg);
  out.estimates = estimate_coefficients(series, intervals);
  double dry = 0.0, visc = 0.0;
  for (const auto& e : out.estimates) {
    dry += e.dry_hat;
    visc += e.visc_hat;
  }
  out.mean_dry = dry / static_cast<double>(out.estimates.size());
  out.mean_visc = visc / static_cast<double>(out.estimates.size());
  out.deltas = dry_deltas(out.estimates);
  Pairing pairing = match_pairs(out.deltas, cfg);
  out.hist_c = make_histogram(pairing.matched_increases, cfg.bins, cfg.range_c);
  out.hist_d = make_histogram(pairing.unmatched_magnitudes, cfg.bins, cfg.range_d);
  return out;
}

double quantile(std::vector<double> values, double q) {
  require(!values.empty(), ErrorKind::InvalidArgument, "quantile of empty set");
  std::sort(values.begin(), values.end());
  double pos = q * static_cast<double>(values.size() - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(values.size() - 1, lo + 1);
  double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double calibrate_residual_threshold(std::span<const TimeSeries> nominal, std::size_t window, double factor) {
  std::vector<double> all;
  for (const auto& s : nominal) {
    auto r = rolling_residuals(s, window);
    all.insert(all.end(), r.begin(), r.end());
  }
  require(!all.empty(), ErrorKind::InsufficientData, "no nominal series to calibrate the residual threshold");
  auto mid = all.begin() + static_cast<std::ptrdiff_t>(all.size() / 2);
  std::nth_element(all.begin(), mid, all.end());
  double median = *mid;
  require(median > 0.0, ErrorKind::InsufficientData,
          "median rolling residual is zero; calibrate on noisy series");
  return factor * median;
}

BinRange quantile_range(std::vector<double> values, double q_lo, double q_hi, BinRange fallback) {
  if (values.size() < 2) return fallback;
  double lo = quantile(values, q_lo);
  double hi = quantile(std::move(values), q_hi);
  if (!(hi > lo)) return fallback;
  return {lo, hi};
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json to_json(const PipelineConfig& c) {
  return {
      {"window_size", c.window_size},
      {"residual_threshold", c.residual_threshold},
      {"min_interval", c.min_interval},
      {"pair_match_tolerance", c.pair_match_tolerance},
      {"pair_match_max_gap", c.pair_match_max_gap},
      {"bins", c.bins},
      {"range_c", {c.range_c.lo, c.range_c.hi}},
      {"range_d", {c.range_d.lo, c.range_d.hi}},
  };
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  c.window_size = j.value("window_size", c.window_size);
  c.residual_threshold = j.value("residual_threshold", c.residual_threshold);
  c.min_interval = j.value("min_interval", c.min_interval);
  c.pair_match_tolerance = j.value("pair_match_tolerance", c.pair_match_tolerance);
  c.pair_match_max_gap = j.value("pair_match_max_gap", c.pair_match_max_gap);
  c.bins = j.value("bins", c.bins);
  if (j.contains("range_c")) c.range_c = {j["range_c"].at(0).get<double>(), j["range_c"].at(1).get<double>()};
  if (j.contains("range_d")) c.range_d = {j["range_d"].at(0).get<double>(), j["range_d"].at(1).get<double>()};
  c.validate();
  return c;
}

nlohmann::json to_json(const Histogram& h) {
  return {{"bins", h.bins}, {"edges", h.edges}, {"count", h.count}};
}

Histogram histogram_from_json(const nlohmann::json& j) {
  Histogram h;
  h.bins = j.at("bins").get<std::vector<double>>();
  h.edges = j.at("edges").get<std::vector<double>>();
  h.count = j.value("count", std::size_t{0});
  require(h.edges.size() == h.bins.size() + 1, ErrorKind::Parse, "histogram needs M+1 edges");
  return h;
}

nlohmann::json to_json(const PipelineSummary& s) {
  nlohmann::json estimates = nlohmann::json::array();
  for (const auto& e : s.estimates) {
    estimates.push_back({{"start", e.interval.start},
                         {"end", e.interval.end},
                         {"dry_hat", e.dry_hat},
                         {"visc_hat", e.visc_hat},
                         {"residual_rms", e.residual_rms}});
  }
  return {
      {"intervals", estimates},
      {"mean_dry", s.mean_dry},
      {"mean_visc", s.mean_visc},
      {"deltas", s.deltas},
      {"hist_c", to_json(s.hist_c)},
      {"hist_d", to_json(s.hist_d)},
  };
}

}  // namespace rwacert::pipeline
