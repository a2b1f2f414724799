#include "rwacert/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rwacert/error.hpp"
#include "rwacert/io.hpp"
#include "rwacert/svg.hpp"

namespace rwacert::classifier {

void Thresholds::validate() const {
  for (double v : {dry_a3, visc_b1, visc_b2, visc_b3, dry_a1, dry_a2}) {
    require(std::isfinite(v), ErrorKind::InvalidArgument, "thresholds must be finite");
  }
  require(visc_b1 <= visc_b2 && visc_b2 <= visc_b3, ErrorKind::InvalidArgument,
          "viscous thresholds must satisfy b1 <= b2 <= b3");
  require(dry_a1 <= dry_a2 && dry_a2 <= dry_a3, ErrorKind::InvalidArgument,
          "dry thresholds must satisfy a1 <= a2 <= a3");
}

void ClassifierBundle::validate() const {
  thresholds.validate();
  pipeline.validate();
  nn_c.validate();
  nn_d.validate();
  require(nn_c.input_dim == pipeline.bins && nn_d.input_dim == pipeline.bins, ErrorKind::DimensionMismatch,
          "network input dims (" + std::to_string(nn_c.input_dim) + ", " + std::to_string(nn_d.input_dim) +
              ") do not match histogram bins " + std::to_string(pipeline.bins));
}

Decision decide(const pipeline::PipelineSummary& s, const ClassifierBundle& b) {
  const Thresholds& t = b.thresholds;
  Decision d;
  if (s.mean_dry >= t.dry_a3) {
    d.status = Status::make(AnomalyKind::A, 3);
    d.stage = 1;
    return d;
  }
  if (s.mean_visc >= t.visc_b1) {
    int u = s.mean_visc >= t.visc_b3 ? 3 : s.mean_visc >= t.visc_b2 ? 2 : 1;
    d.status = Status::make(AnomalyKind::B, u);
    d.stage = 1;
    return d;
  }
  d.nn_c_class = mlp::classify(b.nn_c, s.hist_c.bins);
  d.nn_c_evaluated = true;
  if (d.nn_c_class > 0) {
    d.status = Status::make(AnomalyKind::C, static_cast<int>(d.nn_c_class));
    d.stage = 2;
    return d;
  }
  d.nn_d_class = mlp::classify(b.nn_d, s.hist_d.bins);
  d.nn_d_evaluated = true;
  if (d.nn_d_class > 0) {
    d.status = Status::make(AnomalyKind::D, static_cast<int>(d.nn_d_class));
    d.stage = 3;
    return d;
  }
  d.stage = 4;
  if (s.mean_dry >= t.dry_a2) {
    d.status = Status::make(AnomalyKind::A, 2);
  } else if (s.mean_dry >= t.dry_a1) {
    d.status = Status::make(AnomalyKind::A, 1);
  } else {
    d.status = Status::nominal();
  }
  return d;
}

Status classify_summary(const pipeline::PipelineSummary& summary, const ClassifierBundle& bundle) {
  return decide(summary, bundle).status;
}

Status classify_series(const TimeSeries& series, const ClassifierBundle& bundle) {
  return classify_summary(pipeline::run_pipeline(series, bundle.pipeline), bundle);
}

double cut_between(std::vector<double> lower, std::vector<double> upper, bool* overlapped) {
  require(!lower.empty() && !upper.empty(), ErrorKind::InsufficientData,
          "threshold calibration needs samples on both sides of the cut");
  const double lo_max = *std::max_element(lower.begin(), lower.end());
  const double hi_min = *std::min_element(upper.begin(), upper.end());
  if (lo_max < hi_min) {
    if (overlapped) *overlapped = false;
    return 0.5 * (lo_max + hi_min);
  }
  if (overlapped) *overlapped = true;
  return 0.5 * (pipeline::quantile(std::move(lower), 0.5) + pipeline::quantile(std::move(upper), 0.5));
}

Calibration calibrate_thresholds(const std::vector<LabeledSummary>& data) {
  auto pick = [&](auto pred, bool dry) {
    std::vector<double> out;
    for (const auto& d : data) {
      if (pred(d.status)) out.push_back(dry ? d.mean_dry : d.mean_visc);
    }
    return out;
  };
  auto is = [](AnomalyKind k, int u) { return [=](Status s) { return s.kind == k && s.urgency == u; }; };

  Calibration cal;
  auto cut = [&](const char* name, std::vector<double> lo, std::vector<double> hi) {
    bool overlap = false;
    double v;
    try {
      v = cut_between(std::move(lo), std::move(hi), &overlap);
    } catch (const Error& e) {
      fail(e.kind(), std::string("cut ") + name + ": " + e.what());
    }
    if (overlap) cal.overlap_fallbacks.push_back(name);
    return v;
  };

  Thresholds& t = cal.thresholds;
  t.dry_a3 = cut("dry_a3",
                 pick([](Status s) { return s.kind != AnomalyKind::B && !(s.kind == AnomalyKind::A && s.urgency == 3); },
                      true),
                 pick(is(AnomalyKind::A, 3), true));
  t.visc_b1 = cut("visc_b1", pick([](Status s) { return s.kind != AnomalyKind::B; }, false),
                  pick(is(AnomalyKind::B, 1), false));
  t.visc_b2 = cut("visc_b2", pick(is(AnomalyKind::B, 1), false), pick(is(AnomalyKind::B, 2), false));
  t.visc_b3 = cut("visc_b3", pick(is(AnomalyKind::B, 2), false), pick(is(AnomalyKind::B, 3), false));
  t.dry_a1 = cut("dry_a1", pick([](Status s) { return !s.is_anomaly(); }, true), pick(is(AnomalyKind::A, 1), true));
  t.dry_a2 = cut("dry_a2", pick(is(AnomalyKind::A, 1), true), pick(is(AnomalyKind::A, 2), true));
  t.validate();
  return cal;
}

std::vector<Grouping> standard_groupings() {
  std::vector<Grouping> g;
  Grouping anomaly{"anomaly", {}};
  for (std::size_t i = 1; i < kStatusCount; ++i) anomaly.members.push_back(Status::from_index(i));
  g.push_back(anomaly);
  for (int u = 1; u <= 3; ++u) {
    Grouping gu{"urgency" + std::to_string(u), {}};
    for (AnomalyKind k : {AnomalyKind::A, AnomalyKind::B, AnomalyKind::C, AnomalyKind::D}) {
      gu.members.push_back(Status::make(k, u));
    }
    g.push_back(gu);
  }
  for (AnomalyKind k : {AnomalyKind::A, AnomalyKind::B, AnomalyKind::C, AnomalyKind::D}) {
    Grouping gk{std::string(1, kind_letter(k)), {}};
    for (int u = 1; u <= 3; ++u) gk.members.push_back(Status::make(k, u));
    g.push_back(gk);
  }
  return g;
}

EvalReport evaluate(const std::vector<std::pair<Status, Status>>& predicted_actual) {
  EvalReport r;
  for (const auto& [p, a] : predicted_actual) {
    ++r.confusion[p.index()][a.index()];
    ++r.total;
    if (p == a) ++r.correct;
  }
  for (const auto& grp : standard_groupings()) {
    std::vector<bool> in(kStatusCount, false);
    for (Status s : grp.members) in[s.index()] = true;
    GroupMetric m;
    m.name = grp.name;
    for (std::size_t p = 0; p < kStatusCount; ++p) {
      for (std::size_t a = 0; a < kStatusCount; ++a) {
        const std::size_t c = r.confusion[p][a];
        if (in[a]) m.n += c;
        if (in[p]) m.n_all += c;
        if (in[p] && in[a]) m.n_correct += c;
      }
    }
    if (m.n > 0) m.sensitivity = static_cast<double>(m.n_correct) / static_cast<double>(m.n);
    if (m.n_all > 0) m.ppv = static_cast<double>(m.n_correct) / static_cast<double>(m.n_all);
    r.groups.push_back(std::move(m));
  }
  return r;
}

nlohmann::json to_json(const Thresholds& t) {
  return {{"dry_a3", t.dry_a3}, {"visc_b1", t.visc_b1}, {"visc_b2", t.visc_b2},
          {"visc_b3", t.visc_b3}, {"dry_a1", t.dry_a1}, {"dry_a2", t.dry_a2}};
}

Thresholds thresholds_from_json(const nlohmann::json& j) {
  Thresholds t;
  try {
    t.dry_a3 = j.at("dry_a3").get<double>();
    t.visc_b1 = j.at("visc_b1").get<double>();
    t.visc_b2 = j.at("visc_b2").get<double>();
    t.visc_b3 = j.at("visc_b3").get<double>();
    t.dry_a1 = j.at("dry_a1").get<double>();
    t.dry_a2 = j.at("dry_a2").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, std::string("thresholds: ") + e.what());
  }
  t.validate();
  return t;
}

namespace {

std::vector<std::string> status_labels() {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < kStatusCount; ++i) out.push_back(Status::from_index(i).str());
  return out;
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

}  // namespace

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : r.groups) {
    groups.push_back({{"name", g.name},
                      {"n", g.n},
                      {"n_all", g.n_all},
                      {"n_correct", g.n_correct},
                      {"sensitivity", optional_json(g.sensitivity)},
                      {"ppv", optional_json(g.ppv)}});
  }
  nlohmann::json matrix = nlohmann::json::array();
  for (const auto& row : r.confusion) matrix.push_back(row);
  return {{"labels", status_labels()},
          {"confusion", matrix},
          {"total", r.total},
          {"correct", r.correct},
          {"accuracy", r.total ? nlohmann::json(static_cast<double>(r.correct) / static_cast<double>(r.total))
                               : nlohmann::json()},
          {"groups", groups}};
}

std::string confusion_csv(const EvalReport& r) {
  const auto labels = status_labels();
  std::ostringstream o;
  o << "predicted\\actual";
  for (const auto& l : labels) o << ',' << l;
  o << '\n';
  for (std::size_t p = 0; p < kStatusCount; ++p) {
    o << labels[p];
    for (std::size_t a = 0; a < kStatusCount; ++a) o << ',' << r.confusion[p][a];
    o << '\n';
  }
  return o.str();
}

std::string confusion_svg(const EvalReport& r) {
  const auto labels = status_labels();
  std::vector<std::vector<double>> v(kStatusCount, std::vector<double>(kStatusCount));
  for (std::size_t p = 0; p < kStatusCount; ++p)
    for (std::size_t a = 0; a < kStatusCount; ++a) v[p][a] = static_cast<double>(r.confusion[p][a]);
  return svg::heatmap("Confusion matrix", labels, labels, v, "predicted", "actual");
}

void save_bundle(const ClassifierBundle& bundle, const std::filesystem::path& dir) {
  bundle.validate();
  nlohmann::json j = {{"format", "rwacert-classifier"},
                      {"version", 1},
                      {"thresholds", to_json(bundle.thresholds)},
                      {"pipeline", pipeline::to_json(bundle.pipeline)},
                      {"nn_c", "nn_c.json"},
                      {"nn_d", "nn_d.json"},
                      {"metadata", bundle.metadata}};
  mlp::save(bundle.nn_c, dir / "nn_c.json");
  mlp::save(bundle.nn_d, dir / "nn_d.json");
  io::write_file_atomic(dir / "bundle.json", j.dump(1) + "\n");
}

ClassifierBundle load_bundle(const std::filesystem::path& dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(dir / "bundle.json"));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::Parse, (dir / "bundle.json").string() + ": " + e.what());
  }
  ClassifierBundle b;
  try {
    require(j.at("format") == "rwacert-classifier", ErrorKind::Parse, "bundle.json: unexpected format");
    b.thresholds = thresholds_from_json(j.at("thresholds"));
    b.pipeline = pipeline::pipeline_config_from_json(j.at("pipeline"));
    b.nn_c = mlp::load(dir / j.at("nn_c").get<std::string>());
    b.nn_d = mlp::load(dir / j.at("nn_d").get<std::string>());
    b.metadata = j.value("metadata", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, std::string("bundle.json: ") + e.what());
  }
  b.validate();
  return b;
}

}  // namespace rwacert::classifier
