#include "rwacert/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "rwacert/error.hpp"
#include "rwacert/io.hpp"
#include "rwacert/parallel.hpp"
#include "rwacert/rng.hpp"
#include "rwacert/svg.hpp"

namespace rwacert::experiment {

namespace fs = std::filesystem;
using robustness::Group;
using perturb::Channel;

// ---------------------------------------------------------------------------
// Corpus

ClassCounts desk_class_counts(double scale) {
  require(scale > 0.0, ErrorKind::InvalidArgument, "corpus scale must be > 0");
  auto n = [&](double base) { return static_cast<std::size_t>(std::llround(base * scale)); };
  ClassCounts out{{Status::nominal(), n(1000)}};
  const std::pair<AnomalyKind, double> kinds[] = {
      {AnomalyKind::A, 342}, {AnomalyKind::B, 436}, {AnomalyKind::C, 396}, {AnomalyKind::D, 438}};
  for (auto [kind, total] : kinds) {
    const std::size_t t = n(total);
    for (int u = 1; u <= 3; ++u) {
      out.push_back({Status::make(kind, u), t / 3 + (static_cast<std::size_t>(u) <= t % 3 ? 1 : 0)});
    }
  }
  return out;
}

namespace {

std::string make_id(Status s, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%05zu", s.str().c_str(), i);
  return buf;
}

}  // namespace

std::vector<CorpusEntry> generate_corpus(const CorpusSpec& spec, unsigned threads) {
  struct Job {
    Status status;
    std::size_t i;
  };
  std::vector<Job> jobs;
  std::set<std::size_t> seen;
  for (const auto& [status, count] : spec.counts) {
    require(seen.insert(status.index()).second, ErrorKind::InvalidArgument,
            "status " + status.str() + " listed twice in the corpus counts");
    require(count < 1000000, ErrorKind::InvalidArgument, "at most 999999 series per status");
    for (std::size_t i = 0; i < count; ++i) jobs.push_back({status, i});
  }
  std::vector<CorpusEntry> out(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t j) {
    const Job& job = jobs[j];
    telemetry::GenConfig cfg = spec.gen;
    cfg.seed = derive_seed(spec.seed, streams::kSeries, job.status.index() * 1000000 + job.i);
    auto g = telemetry::generate_series(telemetry::AnomalyProfile::for_status(job.status, spec.severity), cfg);
    out[j] = {make_id(job.status, job.i), job.status, std::move(g.series), std::move(g.truth.dry)};
  });
  std::sort(out.begin(), out.end(), [](const CorpusEntry& a, const CorpusEntry& b) { return a.id < b.id; });
  return out;
}

void write_corpus(const fs::path& dir, const std::vector<CorpusEntry>& corpus, const CorpusSpec& spec) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : corpus) {
    io::write_series_csv(dir / "series" / (e.id + ".csv"), e.series);
    if (!e.truth_dry.empty()) io::write_file_atomic(dir / "truth" / (e.id + ".csv"), io::truth_to_csv(e.truth_dry));
    entries.push_back({{"id", e.id}, {"status", e.status.str()}});
  }
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [s, n] : spec.counts) counts[s.str()] = n;
  nlohmann::json m = {{"format", "rwacert-corpus"},
                      {"version", 1},
                      {"seed", spec.seed},
                      {"gen", telemetry::to_json(spec.gen)},
                      {"counts", counts},
                      {"series", entries}};
  io::write_file_atomic(dir / "manifest.json", m.dump(1) + "\n");
}

std::vector<CorpusEntry> read_corpus(const fs::path& dir, bool with_truth) {
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(io::read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::Parse, (dir / "manifest.json").string() + ": " + e.what());
  }
  std::vector<CorpusEntry> out;
  try {
    require(m.at("format") == "rwacert-corpus", ErrorKind::Parse, "manifest.json: unexpected format");
    for (const auto& e : m.at("series")) {
      CorpusEntry c;
      c.id = e.at("id").get<std::string>();
      c.status = Status::parse(e.at("status").get<std::string>());
      out.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, std::string("manifest.json: ") + e.what());
  }
  for (auto& c : out) {
    c.series = io::read_series_csv(dir / "series" / (c.id + ".csv"));
    if (with_truth && fs::exists(dir / "truth" / (c.id + ".csv"))) {
      c.truth_dry = io::truth_from_csv(io::read_file(dir / "truth" / (c.id + ".csv")));
    }
  }
  return out;
}

std::vector<pipeline::PipelineSummary> summarize(const std::vector<CorpusEntry>& corpus,
                                                 const pipeline::PipelineConfig& cfg, unsigned threads) {
  std::vector<pipeline::PipelineSummary> out(corpus.size());
  parallel_for(corpus.size(), threads, [&](std::size_t i) {
    try {
      out[i] = pipeline::run_pipeline(corpus[i].series, cfg);
    } catch (const Error& e) {
      fail(e.kind(), corpus[i].id + ": " + e.what());
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Training

std::vector<std::size_t> stratified_split(const std::vector<CorpusEntry>& corpus, double fraction,
                                          std::uint64_t seed) {
  require(fraction > 0.0 && fraction <= 1.0, ErrorKind::InvalidArgument, "train fraction must be in (0, 1]");
  std::vector<std::size_t> out;
  for (std::size_t si = 0; si < kStatusCount; ++si) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (corpus[i].status.index() == si) idx.push_back(i);
    }
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return corpus[a].id < corpus[b].id; });
    Rng rng(derive_seed(seed, streams::kSplit, si));
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.index(i)]);
    const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
    out.insert(out.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool in_network_population(Channel net, Status s) {
  if (s == Status::make(AnomalyKind::A, 3) || s.kind == AnomalyKind::B) return false;
  return net == Channel::C || s.kind != AnomalyKind::C;
}

bool in_population(Group g, Status s) {
  if (!in_network_population(g.net, s)) return false;
  const AnomalyKind kind = g.net == Channel::C ? AnomalyKind::C : AnomalyKind::D;
  if (g.cls == 0) return s.kind != kind;
  return s.kind == kind && static_cast<std::size_t>(s.urgency) == g.cls;
}

TrainOutcome train_classifier(const std::vector<CorpusEntry>& corpus, const TrainOptions& o) {
  o.mlp.validate();
  TrainOutcome out;
  out.train_indices = stratified_split(corpus, o.train_fraction, o.seed);
  std::vector<CorpusEntry> train;
  for (std::size_t i : out.train_indices) train.push_back(corpus[i]);

  pipeline::PipelineConfig cfg = o.pipeline;
  std::vector<TimeSeries> nominal;
  for (const auto& e : train) {
    if (!e.status.is_anomaly()) nominal.push_back(e.series);
  }
  cfg.residual_threshold = pipeline::calibrate_residual_threshold(nominal, cfg.window_size, o.residual_factor);
  cfg.validate();

  // Histogram geometry from the pooled training deltas.
  auto provisional = summarize(train, cfg, o.threads);
  std::vector<double> inc, unm;
  for (const auto& s : provisional) {
    auto p = pipeline::match_pairs(s.deltas, cfg);
    inc.insert(inc.end(), p.matched_increases.begin(), p.matched_increases.end());
    unm.insert(unm.end(), p.unmatched_magnitudes.begin(), p.unmatched_magnitudes.end());
  }
  cfg.range_c = pipeline::quantile_range(inc, o.bin_quantile_lo, o.bin_quantile_hi, cfg.range_c);
  cfg.range_d = pipeline::quantile_range(unm, o.bin_quantile_lo, o.bin_quantile_hi, cfg.range_d);
  const auto summaries = summarize(train, cfg, o.threads);

  std::vector<classifier::LabeledSummary> labeled;
  for (std::size_t i = 0; i < train.size(); ++i) {
    labeled.push_back({summaries[i].mean_dry, summaries[i].mean_visc, train[i].status});
  }
  out.calibration = classifier::calibrate_thresholds(labeled);

  std::vector<mlp::Example> ex_c, ex_d;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const Status s = train[i].status;
    if (in_network_population(Channel::C, s)) {
      ex_c.push_back({summaries[i].hist_c.bins, s.kind == AnomalyKind::C ? static_cast<std::size_t>(s.urgency) : 0});
    }
    if (in_network_population(Channel::D, s)) {
      ex_d.push_back({summaries[i].hist_d.bins, s.kind == AnomalyKind::D ? static_cast<std::size_t>(s.urgency) : 0});
    }
  }
  require(!ex_c.empty() && !ex_d.empty(), ErrorKind::InsufficientData, "no training examples for the networks");
  mlp::TrainConfig tc = o.mlp;
  tc.seed = derive_seed(o.seed, streams::kTrainC);
  auto rc = mlp::train(ex_c, tc);
  tc.seed = derive_seed(o.seed, streams::kTrainD);
  auto rd = mlp::train(ex_d, tc);
  rc.model.bin_edges = pipeline::bin_edges(cfg.bins, cfg.range_c);
  rd.model.bin_edges = pipeline::bin_edges(cfg.bins, cfg.range_d);
  out.nn_c_loss = rc.epoch_loss;
  out.nn_d_loss = rd.epoch_loss;

  auto& b = out.bundle;
  b.thresholds = out.calibration.thresholds;
  b.nn_c = std::move(rc.model);
  b.nn_d = std::move(rd.model);
  b.pipeline = cfg;
  std::vector<std::string> ids;
  for (const auto& e : train) ids.push_back(e.id);
  b.metadata = {{"seed", o.seed},
                {"train_fraction", o.train_fraction},
                {"residual_factor", o.residual_factor},
                {"bin_quantiles", {o.bin_quantile_lo, o.bin_quantile_hi}},
                {"overlap_fallbacks", out.calibration.overlap_fallbacks},
                {"nn_c_examples", ex_c.size()},
                {"nn_d_examples", ex_d.size()},
                {"nn_c_final_loss", out.nn_c_loss.back()},
                {"nn_d_final_loss", out.nn_d_loss.back()},
                {"train_ids", ids}};
  b.validate();
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

std::vector<std::string> training_ids(const classifier::ClassifierBundle& bundle) {
  if (!bundle.metadata.contains("train_ids")) return {};
  return bundle.metadata.at("train_ids").get<std::vector<std::string>>();
}

EvalOutcome evaluate_corpus(const std::vector<CorpusEntry>& corpus, const classifier::ClassifierBundle& bundle,
                            unsigned threads) {
  bundle.validate();
  const auto summaries = summarize(corpus, bundle.pipeline, threads);
  EvalOutcome out;
  const auto train = training_ids(bundle);
  const std::set<std::string> train_set(train.begin(), train.end());
  std::vector<std::pair<Status, Status>> held, all;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Status p = classifier::classify_summary(summaries[i], bundle);
    out.predicted.push_back(p);
    all.emplace_back(p, corpus[i].status);
    if (!train_set.count(corpus[i].id)) held.emplace_back(p, corpus[i].status);
  }
  out.held_out = classifier::evaluate(held);
  out.all = classifier::evaluate(all);
  return out;
}

// ---------------------------------------------------------------------------
// Sweep

SweepOutcome run_sweep(const std::vector<CorpusEntry>& corpus, const std::vector<Status>& predicted,
                       const classifier::ClassifierBundle& bundle, const SweepPlan& plan) {
  require(predicted.size() == corpus.size(), ErrorKind::DimensionMismatch, "one prediction per corpus entry required");
  bundle.validate();
  SweepOutcome out;
  std::vector<robustness::Candidate> cands;
  for (std::size_t i = 0; i < corpus.size(); ++i) cands.push_back({corpus[i].id, corpus[i].status, predicted[i]});
  out.members = robustness::sample_evaluation_set(cands, plan.protocol, derive_seed(plan.seed, streams::kSampling));

  std::vector<std::size_t> nominal;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!corpus[i].status.is_anomaly()) nominal.push_back(i);
  }
  std::sort(nominal.begin(), nominal.end(), [&](std::size_t a, std::size_t b) { return corpus[a].id < corpus[b].id; });
  Rng rng(derive_seed(plan.seed, streams::kLadder));
  const std::size_t n_cal = std::min(plan.calibration_size, nominal.size());
  std::vector<TimeSeries> cal;
  for (std::size_t i = 0; i < n_cal; ++i) {
    std::swap(nominal[i], nominal[i + rng.index(nominal.size() - i)]);
    cal.push_back(corpus[nominal[i]].series);
    out.calibration_ids.push_back(corpus[nominal[i]].id);
  }

  robustness::SweepOptions so;
  so.kinds = plan.kinds;
  so.n_iters = plan.n_iters;
  so.sweep_lower_fraction = plan.sweep_lower_fraction;
  so.seed = derive_seed(plan.seed, streams::kEnvelope);
  so.threads = plan.threads;
  so.verifier = plan.verifier;
  robustness::LadderOptions lo = plan.ladder;
  lo.seed = derive_seed(plan.seed, streams::kLadder, 1);
  for (auto k : plan.kinds) {
    if (k != perturb::Kind::MissingData) {
      require(!cal.empty(), ErrorKind::InsufficientData, "no nominal series for SNR ladder calibration");
    }
    so.ladders[k] = robustness::strength_ladder(k, cal, lo);
  }

  std::vector<robustness::SweepItem> items;
  for (const auto& m : out.members) {
    items.push_back({corpus[m.candidate].id, &corpus[m.candidate].series, m.group});
  }
  out.report = robustness::local_robustness_sweep(items, bundle, so);
  return out;
}

// ---------------------------------------------------------------------------
// Certification

std::vector<GroupCertification> run_certification(const std::vector<CorpusEntry>& corpus,
                                                  const std::vector<pipeline::PipelineSummary>& summaries,
                                                  const classifier::ClassifierBundle& bundle, const CertifyPlan& plan) {
  require(summaries.size() == corpus.size(), ErrorKind::DimensionMismatch, "one summary per corpus entry required");
  std::vector<GroupCertification> out(plan.groups.size());
  for (std::size_t gi = 0; gi < plan.groups.size(); ++gi) {
    const Group g = plan.groups[gi];
    std::vector<std::vector<double>> members, others;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const auto& h = g.net == Channel::C ? summaries[i].hist_c.bins : summaries[i].hist_d.bins;
      if (in_population(g, corpus[i].status)) {
        members.push_back(h);
      } else if (in_network_population(g.net, corpus[i].status)) {
        others.push_back(h);
      }
    }
    out[gi].group = g;
    out[gi].synthesis = robustness::synthesize_constraints(members, g, plan.synthesis, others);
  }
  // Verification and sampling per group are independent.
  parallel_for(out.size(), plan.threads, [&](std::size_t gi) {
    GroupCertification& r = out[gi];
    const auto& model = r.group.net == Channel::C ? bundle.nn_c : bundle.nn_d;
    r.verdict = robustness::certify_global(model, r.synthesis.set, plan.verifier);
    if (r.verdict.certified) {
      r.sampling = robustness::sample_region(model, r.synthesis.set, plan.samples,
                                             derive_seed(plan.seed, streams::kCertify, gi), plan.max_attempts);
    }
    const auto region = r.synthesis.set.region();
    for (const auto& ce : r.verdict.counterexamples) {
      if (mlp::classify(model, ce.witness) == ce.witness_class && region.contains(ce.witness)) {
        ++r.counterexamples_confirmed;
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

std::string dump(const nlohmann::json& j) { return j.dump(1) + "\n"; }

std::string opt_str(const std::optional<double>& v) { return v ? io::format_double(*v) : ""; }

}  // namespace

void write_eval_report(const fs::path& dir, const std::vector<CorpusEntry>& corpus, const EvalOutcome& eval) {
  nlohmann::json j = {{"format", "rwacert-eval"},
                      {"version", 1},
                      {"held_out", classifier::to_json(eval.held_out)},
                      {"all", classifier::to_json(eval.all)}};
  io::write_file_atomic(dir / "eval.json", dump(j));
  io::write_file_atomic(dir / "confusion.csv", classifier::confusion_csv(eval.held_out));
  io::write_file_atomic(dir / "confusion.svg", classifier::confusion_svg(eval.held_out));
  std::ostringstream pred;
  pred << "id,actual,predicted\n";
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    pred << corpus[i].id << ',' << corpus[i].status.str() << ',' << eval.predicted[i].str() << '\n';
  }
  io::write_file_atomic(dir / "predictions.csv", pred.str());
  std::ostringstream groups;
  groups << "group,n,n_all,n_correct,sensitivity,ppv\n";
  for (const auto& g : eval.held_out.groups) {
    groups << g.name << ',' << g.n << ',' << g.n_all << ',' << g.n_correct << ',' << opt_str(g.sensitivity) << ','
           << opt_str(g.ppv) << '\n';
  }
  io::write_file_atomic(dir / "groups.csv", groups.str());
}

nlohmann::json sweep_json(const std::vector<CorpusEntry>& corpus, const SweepOutcome& sweep) {
  nlohmann::json j = robustness::to_json(sweep.report);
  nlohmann::json members = nlohmann::json::array();
  for (const auto& m : sweep.members) {
    members.push_back({{"id", corpus[m.candidate].id}, {"group", m.group.name()}});
  }
  nlohmann::json out = {{"format", "rwacert-sweep"}, {"version", 1}};
  out.update(j);
  out["calibration_ids"] = sweep.calibration_ids;
  out["members"] = members;
  return out;
}

void write_sweep_charts(const fs::path& dir, const robustness::RobustnessReport& report) {
  for (const auto& [kind, ladder] : report.ladders) {
    for (Channel net : {Channel::C, Channel::D}) {
      svg::LineChart chart;
      chart.title = std::string("Local robustness, ") + perturb::to_string(kind) + ", network " +
                    perturb::to_string(net);
      chart.x_label = "perturbation strength";
      chart.y_label = "rate";
      chart.log_x = ladder.size() > 1 && ladder.front() > 0.0;
      for (bool binary : {false, true}) {
        for (const Group& g : robustness::all_groups()) {
          if (g.net != net) continue;
          svg::Series s{g.name() + (binary ? " binary" : ""), {}, {}};
          for (double eps : ladder) {
            const auto* c = report.find(g, kind, eps);
            if (!c) continue;
            const auto r = binary ? c->binary_rate() : c->rate();
            if (!r) continue;
            s.x.push_back(eps);
            s.y.push_back(*r);
          }
          if (!s.x.empty()) chart.series.push_back(std::move(s));
        }
      }
      if (chart.series.empty()) continue;
      io::write_file_atomic(dir / (std::string("sweep_") + perturb::to_string(kind) + "_" + perturb::to_string(net) +
                                   ".svg"),
                            svg::line_chart(chart));
    }
  }
}

void write_sweep_report(const fs::path& dir, const std::vector<CorpusEntry>& corpus, const SweepOutcome& sweep) {
  io::write_file_atomic(dir / "sweep.json", dump(sweep_json(corpus, sweep)));
  io::write_file_atomic(dir / "sweep.csv", robustness::cells_csv(sweep.report));
  write_sweep_charts(dir, sweep.report);
}

nlohmann::json certify_json(const std::vector<GroupCertification>& results) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& r : results) {
    groups.push_back({{"group", r.group.name()},
                      {"constraints", robustness::to_json(r.synthesis.set)},
                      {"exclusions", robustness::to_json(r.synthesis.exclusions)},
                      {"verdict", robustness::to_json(r.verdict)},
                      {"sampling", r.sampling ? robustness::to_json(*r.sampling) : nlohmann::json()},
                      {"counterexamples_confirmed", r.counterexamples_confirmed}});
  }
  return {{"format", "rwacert-certify"}, {"version", 1}, {"groups", groups}};
}

void write_certify_report(const fs::path& dir, const std::vector<GroupCertification>& results) {
  io::write_file_atomic(dir / "certify.json", dump(certify_json(results)));
  std::ostringstream csv;
  csv << "group,certified,members,excluded,excluded_percent,others,others_inside,ws_lo,ws_hi,"
         "sampled,misclassified,counterexample_classes\n";
  for (const auto& r : results) {
    const auto& ex = r.synthesis.exclusions;
    csv << r.group.name() << ',' << (r.verdict.certified ? "yes" : "no") << ',' << ex.total << ','
        << ex.excluded.size() << ',' << io::format_double(ex.percent()) << ',' << ex.others_total << ','
        << ex.others_inside << ',' << io::format_double(r.synthesis.set.ws_lo) << ','
        << io::format_double(r.synthesis.set.ws_hi) << ',' << (r.sampling ? std::to_string(r.sampling->accepted) : "")
        << ',' << (r.sampling ? std::to_string(r.sampling->misclassified) : "") << ',';
    for (std::size_t i = 0; i < r.verdict.counterexamples.size(); ++i) {
      csv << (i ? " " : "") << r.verdict.counterexamples[i].witness_class;
    }
    csv << '\n';
    svg::BinPlot plot;
    plot.title = "Constraint envelope " + r.group.name() + (r.verdict.certified ? " (certified)" : "");
    plot.lower.assign(r.synthesis.set.envelope_upper.size(), 0.0);
    plot.upper = r.synthesis.set.envelope_upper;
    if (!r.verdict.counterexamples.empty()) plot.values = r.verdict.counterexamples.front().witness;
    io::write_file_atomic(dir / ("envelope_" + r.group.name() + ".svg"), svg::bin_plot(plot));
  }
  io::write_file_atomic(dir / "certify.csv", csv.str());
}

}  // namespace rwacert::experiment
