#include "rwacert/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <tuple>

#include "rwacert/error.hpp"
#include "rwacert/io.hpp"
#include "rwacert/lp.hpp"
#include "rwacert/parallel.hpp"
#include "rwacert/rng.hpp"

namespace rwacert::robustness {

// ---------------------------------------------------------------------------
// Groups and sampling

std::string Group::name() const {
  const char letter = net == Channel::C ? 'C' : 'D';
  if (cls == 0) return std::string("no") + letter;
  return std::string(1, letter) + std::to_string(cls);
}

Group Group::parse(const std::string& name) {
  for (const Group& g : all_groups()) {
    if (g.name() == name) return g;
  }
  fail(ErrorKind::InvalidArgument, "unknown evaluation group '" + name + "'");
}

std::vector<Group> all_groups() {
  std::vector<Group> out;
  for (Channel c : {Channel::C, Channel::D}) {
    for (std::size_t k = 0; k < mlp::kNumClasses; ++k) out.push_back({c, k});
  }
  return out;
}

namespace {

struct Stratum {
  Group group;
  Status status;
  std::size_t count;
};

std::vector<Stratum> strata(const SamplingProtocol& p) {
  std::vector<Stratum> out;
  auto st = [](const char* s) { return Status::parse(s); };
  for (const char* s : {"D1", "D2", "D3", "A1", "A2", "N"}) out.push_back({{Channel::C, 0}, st(s), p.no_c_per_class});
  for (int u = 1; u <= 3; ++u) {
    out.push_back({{Channel::C, static_cast<std::size_t>(u)}, Status::make(AnomalyKind::C, u), p.per_anomaly_class});
  }
  for (const char* s : {"A1", "A2", "N"}) out.push_back({{Channel::D, 0}, st(s), p.no_d_per_class});
  for (int u = 1; u <= 3; ++u) {
    out.push_back({{Channel::D, static_cast<std::size_t>(u)}, Status::make(AnomalyKind::D, u), p.per_anomaly_class});
  }
  return out;
}

// FNV-1a, used to key per-series seeds by id rather than by position.
std::uint64_t id_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::vector<EvalMember> sample_evaluation_set(const std::vector<Candidate>& candidates,
                                              const SamplingProtocol& protocol, std::uint64_t seed) {
  std::vector<EvalMember> out;
  const auto all = strata(protocol);
  for (std::size_t si = 0; si < all.size(); ++si) {
    const Stratum& s = all[si];
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (candidates[i].actual == s.status && candidates[i].predicted == s.status) eligible.push_back(i);
    }
    require(protocol.clamp_to_available || eligible.size() >= s.count, ErrorKind::InsufficientData,
            "stratum " + s.group.name() + "/" + s.status.str() + " has " + std::to_string(eligible.size()) +
                " correctly classified series, " + std::to_string(s.count) + " required");
    std::sort(eligible.begin(), eligible.end(),
              [&](std::size_t a, std::size_t b) { return candidates[a].id < candidates[b].id; });
    Rng rng(derive_seed(seed, streams::kSampling, si));
    const std::size_t take = std::min(s.count, eligible.size());
    for (std::size_t i = 0; i < take; ++i) {
      std::swap(eligible[i], eligible[i + rng.index(eligible.size() - i)]);
      out.push_back({eligible[i], s.group});
    }
  }
  std::sort(out.begin(), out.end(), [&](const EvalMember& a, const EvalMember& b) {
    if (a.group != b.group) return a.group < b.group;
    return candidates[a.candidate].id < candidates[b.candidate].id;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Ladders

double median_snr(std::span<const TimeSeries> calibration, Kind kind, double epsilon, std::uint64_t seed) {
  require(!calibration.empty(), ErrorKind::InsufficientData, "SNR calibration needs at least one series");
  require(perturb::preserves_length(kind), ErrorKind::InvalidArgument,
          std::string("SNR undefined for ") + perturb::to_string(kind));
  std::vector<double> v;
  for (std::size_t i = 0; i < calibration.size(); ++i) {
    const auto p = perturb::apply(calibration[i], {kind, epsilon, derive_seed(seed, streams::kLadder, i)});
    v.push_back(perturb::snr(calibration[i], p).friction_db);
  }
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> strength_ladder(Kind kind, std::span<const TimeSeries> calibration, const LadderOptions& o) {
  if (kind == Kind::MissingData) return kMissingDataLadder;
  require(o.start > 0.0 && o.rungs_per_decade >= 1, ErrorKind::InvalidArgument, "invalid ladder options");
  const double floor = kind == Kind::AmplitudeScaling ? o.snr_floor_amplitude_db : o.snr_floor_db;
  std::vector<double> out;
  for (std::size_t i = 0; i < o.max_rungs; ++i) {
    const double eps = o.start * std::pow(10.0, static_cast<double>(i) / static_cast<double>(o.rungs_per_decade));
    if (median_snr(calibration, kind, eps, o.seed) < floor - kSnrFloorTolerance) break;
    out.push_back(eps);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sweep

std::optional<double> Cell::rate() const {
  if (n_correct == 0) return std::nullopt;
  return static_cast<double>(n_robust) / static_cast<double>(n_correct);
}

std::optional<double> Cell::binary_rate() const {
  if (n_correct == 0) return std::nullopt;
  return static_cast<double>(n_binary_robust) / static_cast<double>(n_correct);
}

const Cell* RobustnessReport::find(Group g, Kind k, double eps) const {
  for (const auto& c : cells) {
    if (c.group == g && c.kind == k && c.epsilon == eps) return &c;
  }
  return nullptr;
}

SeriesOutcome evaluate_series(const TimeSeries& series, const mlp::MlpModel& model, Channel channel,
                              const pipeline::PipelineConfig& cfg, const perturb::Perturbation& p,
                              std::size_t n_iters, double sweep_lower_fraction,
                              const verifier::VerifierOptions& vopts) {
  SeriesOutcome out;
  try {
    const auto base = pipeline::run_pipeline(series, cfg);
    const std::size_t expected = mlp::classify(model, channel == Channel::C ? base.hist_c.bins : base.hist_d.bins);
    const auto env = perturb::build_envelope(series, p, channel, cfg, {n_iters, sweep_lower_fraction});
    const auto verdict =
        verifier::verify_local_robustness(model, verifier::InputRegion::box(env.lower, env.upper), expected, vopts, true);
    out.robust = verdict.robust;
    out.binary_robust = true;
    for (const auto& ce : verdict.counterexamples) {
      out.counterexample_classes.push_back(ce.witness_class);
      if ((ce.witness_class > 0) != (expected > 0)) out.binary_robust = false;
    }
    out.stats = verdict.stats;
  } catch (const Error& e) {
    out.failed = true;
    out.error = std::string(to_string(e.kind())) + ": " + e.what();
  }
  return out;
}

RobustnessReport local_robustness_sweep(const std::vector<SweepItem>& items, const classifier::ClassifierBundle& bundle,
                                        const SweepOptions& options) {
  require(options.n_iters >= 1, ErrorKind::InvalidArgument, "n_iters must be >= 1");
  struct Job {
    std::size_t item;
    Kind kind;
    std::size_t rung;
    double eps;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < items.size(); ++i) {
    require(items[i].series != nullptr, ErrorKind::InvalidArgument, "sweep item without series");
    for (Kind k : options.kinds) {
      auto it = options.ladders.find(k);
      require(it != options.ladders.end(), ErrorKind::InvalidArgument,
              std::string("no strength ladder for ") + perturb::to_string(k));
      for (std::size_t r = 0; r < it->second.size(); ++r) jobs.push_back({i, k, r, it->second[r]});
    }
  }

  std::vector<SeriesOutcome> results(jobs.size());
  parallel_for(jobs.size(), options.threads, [&](std::size_t j) {
    const Job& job = jobs[j];
    const SweepItem& item = items[job.item];
    const auto& model = item.group.net == Channel::C ? bundle.nn_c : bundle.nn_d;
    const std::uint64_t seed = derive_seed(derive_seed(options.seed, streams::kEnvelope, id_hash(item.id)),
                                           static_cast<std::uint64_t>(job.kind), job.rung);
    results[j] = evaluate_series(*item.series, model, item.group.net, bundle.pipeline, {job.kind, job.eps, seed},
                                 options.n_iters, options.sweep_lower_fraction, options.verifier);
    results[j].id = item.id;
  });

  RobustnessReport report;
  report.n_iters = options.n_iters;
  for (Kind k : options.kinds) report.ladders[k] = options.ladders.at(k);
  std::map<std::tuple<Group, int, std::size_t>, Cell> cells;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const Job& job = jobs[j];
    const Group g = items[job.item].group;
    Cell& c = cells[{g, static_cast<int>(job.kind), job.rung}];
    c.group = g;
    c.kind = job.kind;
    c.epsilon = job.eps;
    const SeriesOutcome& o = results[j];
    if (o.failed) {
      ++c.n_failed;
    } else {
      ++c.n_correct;
      c.n_robust += o.robust;
      c.n_binary_robust += o.binary_robust;
      for (std::size_t cls : o.counterexample_classes) ++c.counterexample_counts[cls];
      report.stats += o.stats;
    }
    c.outcomes.push_back(o);
  }
  for (auto& [key, c] : cells) {
    std::sort(c.outcomes.begin(), c.outcomes.end(),
              [](const SeriesOutcome& a, const SeriesOutcome& b) { return a.id < b.id; });
    report.cells.push_back(std::move(c));
  }
  return report;
}

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

}  // namespace

nlohmann::json to_json(const RobustnessReport& r, bool include_outcomes) {
  nlohmann::json ladders = nlohmann::json::object();
  for (const auto& [k, v] : r.ladders) ladders[perturb::to_string(k)] = v;
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells) {
    nlohmann::json jc = {{"group", c.group.name()},
                         {"kind", perturb::to_string(c.kind)},
                         {"epsilon", c.epsilon},
                         {"n_correct", c.n_correct},
                         {"n_robust", c.n_robust},
                         {"rate", opt(c.rate())},
                         {"n_binary_robust", c.n_binary_robust},
                         {"binary_rate", opt(c.binary_rate())},
                         {"n_failed", c.n_failed},
                         {"counterexample_counts", c.counterexample_counts}};
    if (include_outcomes) {
      nlohmann::json outs = nlohmann::json::array();
      for (const auto& o : c.outcomes) {
        if (o.failed) {
          outs.push_back({{"id", o.id}, {"error", o.error}});
        } else if (!o.robust) {
          outs.push_back({{"id", o.id}, {"counterexample_classes", o.counterexample_classes},
                          {"binary_robust", o.binary_robust}});
        }
      }
      jc["non_robust"] = outs;
    }
    cells.push_back(std::move(jc));
  }
  return {{"n_iters", r.n_iters}, {"ladders", ladders}, {"cells", cells},
          {"verifier", verifier::to_json(r.stats, false)}};
}

RobustnessReport report_from_json(const nlohmann::json& j) {
  RobustnessReport r;
  try {
    r.n_iters = j.at("n_iters").get<std::size_t>();
    for (const auto& [k, v] : j.at("ladders").items()) r.ladders[perturb::kind_from_string(k)] = v.get<std::vector<double>>();
    for (const auto& jc : j.at("cells")) {
      Cell c;
      c.group = Group::parse(jc.at("group").get<std::string>());
      c.kind = perturb::kind_from_string(jc.at("kind").get<std::string>());
      c.epsilon = jc.at("epsilon").get<double>();
      c.n_correct = jc.at("n_correct").get<std::size_t>();
      c.n_robust = jc.at("n_robust").get<std::size_t>();
      c.n_binary_robust = jc.at("n_binary_robust").get<std::size_t>();
      c.n_failed = jc.at("n_failed").get<std::size_t>();
      c.counterexample_counts = jc.at("counterexample_counts").get<std::array<std::size_t, mlp::kNumClasses>>();
      r.cells.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, std::string("sweep report: ") + e.what());
  }
  return r;
}

std::vector<CurveCheck> check_curves(const RobustnessReport& r) {
  std::vector<CurveCheck> out;
  for (const Group& g : all_groups()) {
    for (const auto& [kind, ladder] : r.ladders) {
      CurveCheck cc{g, kind, std::nullopt, 0.0, 0.0, 0.0, 0};
      std::vector<std::pair<double, double>> pts;
      for (double eps : ladder) {
        const Cell* c = r.find(g, kind, eps);
        if (!c) continue;
        const auto rate = c->rate();
        const auto bin = c->binary_rate();
        if (rate && bin && *bin < *rate) ++cc.binary_below_class;
        if (rate) pts.emplace_back(eps, *rate);
      }
      if (pts.empty()) continue;
      cc.first_rate = pts.front().second;
      std::size_t lowest = 0;
      for (std::size_t j = 1; j < pts.size(); ++j) {
        if (pts[j].second - pts[lowest].second > cc.max_rise) {
          cc.max_rise = pts[j].second - pts[lowest].second;
          cc.rise_from = pts[lowest].first;
          cc.rise_to = pts[j].first;
        }
        if (pts[j].second < pts[lowest].second) lowest = j;
      }
      out.push_back(cc);
    }
  }
  return out;
}

std::string cells_csv(const RobustnessReport& r) {
  std::ostringstream o;
  o << "group,kind,epsilon,n_correct,n_robust,rate,n_binary_robust,binary_rate,n_failed\n";
  for (const auto& c : r.cells) {
    o << c.group.name() << ',' << perturb::to_string(c.kind) << ',' << io::format_double(c.epsilon) << ','
      << c.n_correct << ',' << c.n_robust << ',' << (c.rate() ? io::format_double(*c.rate()) : "") << ','
      << c.n_binary_robust << ',' << (c.binary_rate() ? io::format_double(*c.binary_rate()) : "") << ','
      << c.n_failed << '\n';
  }
  return o.str();
}

// ---------------------------------------------------------------------------
// Global constraints

double weighted_sum(std::span<const double> h) {
  double s = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) s += h[i] * static_cast<double>(i + 1);
  return s;
}

std::vector<double> window_means(std::span<const double> h, std::size_t k) {
  require(k >= 1 && k <= h.size(), ErrorKind::InvalidArgument,
          "window size " + std::to_string(k) + " must be in [1, " + std::to_string(h.size()) + "]");
  std::vector<double> out(h.size() - k + 1);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = i; j < i + k; ++j) s += h[j];
    out[i] = s / static_cast<double>(k);
  }
  return out;
}

void GlobalConstraintSet::validate() const {
  require(!envelope_upper.empty(), ErrorKind::InvalidArgument, "empty constraint set");
  for (double v : envelope_upper) require(v >= 0.0, ErrorKind::InvalidArgument, "envelope upper must be >= 0");
  require(ws_lo <= ws_hi, ErrorKind::InvalidArgument, "weighted-sum interval is empty");
  for (const auto& w : windows) {
    require(w.k >= 2 && w.k <= envelope_upper.size(), ErrorKind::InvalidArgument, "window size out of range");
    require(w.lower.size() == envelope_upper.size() - w.k + 1 && w.upper.size() == w.lower.size(),
            ErrorKind::DimensionMismatch, "window bound length mismatch");
    for (std::size_t i = 0; i < w.lower.size(); ++i) {
      require(w.lower[i] <= w.upper[i], ErrorKind::InvalidArgument, "window interval is empty");
    }
  }
}

verifier::InputRegion GlobalConstraintSet::region() const {
  validate();
  const std::size_t M = envelope_upper.size();
  auto r = verifier::InputRegion::box(std::vector<double>(M, 0.0), envelope_upper);
  std::vector<double> ws(M);
  for (std::size_t i = 0; i < M; ++i) ws[i] = static_cast<double>(i + 1);
  r.linear.push_back({ws, lp::Relation::Ge, ws_lo});
  r.linear.push_back({ws, lp::Relation::Le, ws_hi});
  for (const auto& w : windows) {
    const double k = static_cast<double>(w.k);
    for (std::size_t i = 0; i < w.lower.size(); ++i) {
      std::vector<double> c(M, 0.0);
      std::fill(c.begin() + static_cast<std::ptrdiff_t>(i), c.begin() + static_cast<std::ptrdiff_t>(i + w.k), 1.0 / k);
      r.linear.push_back({c, lp::Relation::Ge, w.lower[i]});
      r.linear.push_back({std::move(c), lp::Relation::Le, w.upper[i]});
    }
  }
  return r;
}

bool GlobalConstraintSet::satisfied(std::span<const double> h, double slack) const {
  if (h.size() != envelope_upper.size()) return false;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (h[i] < -slack || h[i] > envelope_upper[i] + slack) return false;
  }
  const double ws = weighted_sum(h);
  if (ws < ws_lo - slack || ws > ws_hi + slack) return false;
  for (const auto& w : windows) {
    const auto m = window_means(h, w.k);
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m[i] < w.lower[i] - slack || m[i] > w.upper[i] + slack) return false;
    }
  }
  return true;
}

Synthesis synthesize_constraints(const std::vector<std::vector<double>>& members, Group group,
                                 const SynthesisOptions& options, const std::vector<std::vector<double>>& others) {
  require(!members.empty(), ErrorKind::InsufficientData, "no histograms for group " + group.name());
  require(options.trim_quantile >= 0.0 && options.trim_quantile < 0.5, ErrorKind::InvalidArgument,
          "trim quantile must be in [0, 0.5)");
  const std::size_t M = members.front().size();
  for (const auto& h : members) require(h.size() == M, ErrorKind::DimensionMismatch, "histogram length mismatch");

  Synthesis out;
  GlobalConstraintSet& s = out.set;
  s.group = group;
  s.envelope_upper.assign(M, 0.0);
  std::vector<double> ws;
  for (const auto& h : members) {
    for (std::size_t i = 0; i < M; ++i) s.envelope_upper[i] = std::max(s.envelope_upper[i], h[i]);
    ws.push_back(weighted_sum(h));
  }
  s.ws_lo = pipeline::quantile(ws, options.trim_quantile);
  s.ws_hi = pipeline::quantile(ws, 1.0 - options.trim_quantile);

  std::vector<const std::vector<double>*> kept;
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (ws[i] >= s.ws_lo && ws[i] <= s.ws_hi) kept.push_back(&members[i]);
  }
  for (std::size_t k : options.window_sizes) {
    if (k < 2 || k > M || kept.empty()) continue;
    WindowBounds w{k, {}, {}};
    for (const auto* h : kept) {
      const auto m = window_means(*h, k);
      if (w.lower.empty()) {
        w.lower = m;
        w.upper = m;
        continue;
      }
      for (std::size_t i = 0; i < m.size(); ++i) {
        w.lower[i] = std::min(w.lower[i], m[i]);
        w.upper[i] = std::max(w.upper[i], m[i]);
      }
    }
    s.windows.push_back(std::move(w));
  }
  s.validate();

  out.exclusions.total = members.size();
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (!s.satisfied(members[i])) out.exclusions.excluded.push_back(i);
  }
  out.exclusions.others_total = others.size();
  for (const auto& h : others) out.exclusions.others_inside += s.satisfied(h);
  return out;
}

GlobalVerdict certify_global(const mlp::MlpModel& model, const GlobalConstraintSet& set,
                             const verifier::VerifierOptions& options) {
  require(model.input_dim == set.envelope_upper.size(), ErrorKind::DimensionMismatch,
          "constraint set dimension does not match the network input");
  const auto v = verifier::verify_local_robustness(model, set.region(), set.group.cls, options, true);
  return {v.robust, v.counterexamples, v.stats};
}

SamplingCheck sample_region(const mlp::MlpModel& model, const GlobalConstraintSet& set, std::size_t requested,
                            std::uint64_t seed, std::size_t max_attempts) {
  const auto region = set.region();
  const std::size_t M = region.dim();
  SamplingCheck out;
  out.requested = requested;
  out.box_lower = region.lower;
  out.box_upper = region.upper;
  for (std::size_t i = 0; i < M; ++i) {
    if (region.lower[i] == region.upper[i]) continue;
    for (int dir : {1, -1}) {
      lp::LpProblem prob;
      prob.lower = region.lower;
      prob.upper = region.upper;
      prob.constraints = region.linear;
      prob.objective.assign(M, 0.0);
      prob.objective[i] = dir;
      const auto res = lp::lp_solve(prob);
      if (!res.feasible) {
        out.exhausted = true;
        return out;
      }
      // Widen slightly so LP round-off cannot cut off part of the region.
      const double pad = 1e-9 * std::max(1.0, std::fabs(res.point[i]));
      if (dir == 1) {
        out.box_lower[i] = std::max(region.lower[i], res.point[i] - pad);
      } else {
        out.box_upper[i] = std::min(region.upper[i], res.point[i] + pad);
      }
    }
  }
  Rng rng(seed);
  std::vector<double> x(M);
  while (out.accepted < requested) {
    if (out.attempts >= max_attempts) {
      out.exhausted = true;
      break;
    }
    ++out.attempts;
    for (std::size_t i = 0; i < M; ++i) x[i] = rng.uniform(out.box_lower[i], out.box_upper[i]);
    if (!set.satisfied(x)) continue;
    ++out.accepted;
    if (mlp::classify(model, x) != set.group.cls) ++out.misclassified;
  }
  return out;
}

nlohmann::json to_json(const GlobalConstraintSet& s) {
  nlohmann::json windows = nlohmann::json::array();
  for (const auto& w : s.windows) windows.push_back({{"k", w.k}, {"lower", w.lower}, {"upper", w.upper}});
  return {{"group", s.group.name()},
          {"class", s.group.cls},
          {"envelope_upper", s.envelope_upper},
          {"weighted_sum", {s.ws_lo, s.ws_hi}},
          {"window_means", windows}};
}

nlohmann::json to_json(const ExclusionReport& r) {
  return {{"total", r.total},          {"excluded", r.excluded.size()},
          {"excluded_percent", r.percent()}, {"excluded_indices", r.excluded},
          {"others_total", r.others_total},   {"others_inside", r.others_inside}};
}

nlohmann::json to_json(const GlobalVerdict& v) {
  nlohmann::json ces = nlohmann::json::array();
  for (const auto& c : v.counterexamples) ces.push_back(verifier::to_json(c, false));
  return {{"certified", v.certified}, {"counterexamples", ces}, {"verifier", verifier::to_json(v.stats, false)}};
}

nlohmann::json to_json(const SamplingCheck& s) {
  return {{"requested", s.requested}, {"accepted", s.accepted},         {"attempts", s.attempts},
          {"misclassified", s.misclassified}, {"exhausted", s.exhausted}, {"box_lower", s.box_lower},
          {"box_upper", s.box_upper}};
}

}  // namespace rwacert::robustness
