#include "rwacert/cli.hpp"

#include <algorithm>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "rwacert/classifier.hpp"
#include "rwacert/error.hpp"
#include "rwacert/io.hpp"
#include "rwacert/perturb.hpp"
#include "rwacert/query.hpp"
#include "rwacert/robustness.hpp"
#include "rwacert/verifier.hpp"

namespace rwacert::cli {

namespace fs = std::filesystem;
using experiment::CorpusEntry;

void RunConfig::validate() const {
  require(sweep.n_iters >= 1, ErrorKind::InvalidArgument, "n_iters must be >= 1");
  pipeline.validate();
  gen.validate();
  train.validate();
}

namespace {

struct Args {
  RunConfig cfg;

  std::vector<std::string> gen_status;
  std::size_t gen_count = 10;
  double gen_scale = 1.0;
  bool gen_no_truth = false;

  std::string process_series;
  bool process_from_bundle = false;

  double train_fraction = 0.4;
  double residual_factor = 4.0;

  std::string perturb_series;
  std::string perturb_out;
  std::string perturb_kind = "gaussian";
  double perturb_epsilon = 0.01;
  std::string perturb_envelope;  // "C" or "D"
  std::string perturb_query_out;

  std::string verify_query;
  std::string verify_json;

  std::vector<std::string> sweep_kinds;

  std::vector<std::string> certify_groups;
  std::size_t certify_samples = 100000;
  std::size_t certify_max_attempts = 50'000'000;
  double certify_trim = 0.01;
};

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

void require_dir(const fs::path& p, const char* what) {
  require(fs::is_directory(p), ErrorKind::Io, std::string(what) + " directory not found: " + p.string());
}

std::vector<CorpusEntry> load_corpus(const RunConfig& cfg) {
  require_dir(cfg.data_dir, "data");
  return experiment::read_corpus(cfg.data_dir);
}

classifier::ClassifierBundle load_bundle(const RunConfig& cfg) {
  require_dir(cfg.bundle_dir, "bundle");
  return classifier::load_bundle(cfg.bundle_dir);
}

// ---------------------------------------------------------------------------

int cmd_gen(const Args& a, std::ostream& out) {
  experiment::CorpusSpec spec;
  spec.gen = a.cfg.gen;
  spec.seed = a.cfg.seed;
  if (a.gen_status.empty()) {
    spec.counts = experiment::desk_class_counts(a.gen_scale);
  } else {
    for (const auto& s : a.gen_status) spec.counts.emplace_back(Status::parse(s), a.gen_count);
  }
  auto corpus = experiment::generate_corpus(spec, a.cfg.threads);
  if (a.gen_no_truth) {
    for (auto& e : corpus) e.truth_dry.clear();
  }
  experiment::write_corpus(a.cfg.data_dir, corpus, spec);
  out << "wrote " << corpus.size() << " series to " << a.cfg.data_dir.string() << "\n";
  return 0;
}

nlohmann::json summary_entry(const std::string& id, const std::string& status, const pipeline::PipelineSummary& s) {
  return {{"id", id}, {"status", status}, {"summary", pipeline::to_json(s)}};
}

int cmd_process(const Args& a, std::ostream& out) {
  pipeline::PipelineConfig pc = a.cfg.pipeline;
  if (a.process_from_bundle) pc = load_bundle(a.cfg).pipeline;
  pc.validate();
  if (!a.process_series.empty()) {
    const auto s = pipeline::run_pipeline(io::read_series_csv(a.process_series), pc);
    out << summary_entry(fs::path(a.process_series).stem().string(), "", s).dump(1) << "\n";
    return 0;
  }
  const auto corpus = load_corpus(a.cfg);
  const auto sums = experiment::summarize(corpus, pc, a.cfg.threads);
  nlohmann::json series = nlohmann::json::array();
  std::ostringstream csv;
  csv << "id,status,net";
  for (std::size_t i = 1; i <= pc.bins; ++i) csv << ",bin_" << i;
  csv << "\n";
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    series.push_back(summary_entry(corpus[i].id, corpus[i].status.str(), sums[i]));
    for (const auto* h : {&sums[i].hist_c, &sums[i].hist_d}) {
      csv << corpus[i].id << ',' << corpus[i].status.str() << ',' << (h == &sums[i].hist_c ? "C" : "D");
      for (double v : h->bins) csv << ',' << io::format_double(v);
      csv << "\n";
    }
  }
  nlohmann::json j = {{"format", "rwacert-summaries"}, {"version", 1}, {"pipeline", pipeline::to_json(pc)},
                      {"series", series}};
  io::write_file_atomic(a.cfg.report_dir / "summaries.json", j.dump(1) + "\n");
  io::write_file_atomic(a.cfg.report_dir / "histograms.csv", csv.str());
  out << "processed " << corpus.size() << " series\n";
  return 0;
}

int cmd_train(const Args& a, std::ostream& out) {
  const auto corpus = load_corpus(a.cfg);
  experiment::TrainOptions o;
  o.train_fraction = a.train_fraction;
  o.residual_factor = a.residual_factor;
  o.pipeline = a.cfg.pipeline;
  o.mlp = a.cfg.train;
  o.seed = a.cfg.seed;
  o.threads = a.cfg.threads;
  const auto t = experiment::train_classifier(corpus, o);
  classifier::save_bundle(t.bundle, a.cfg.bundle_dir);
  out << "trained on " << t.train_indices.size() << " series; thresholds "
      << classifier::to_json(t.bundle.thresholds).dump() << "\n";
  out << "nn_c loss " << io::format_double(t.nn_c_loss.back()) << ", nn_d loss "
      << io::format_double(t.nn_d_loss.back()) << "\n";
  return 0;
}

int cmd_eval(const Args& a, std::ostream& out) {
  const auto corpus = load_corpus(a.cfg);
  const auto bundle = load_bundle(a.cfg);
  const auto ev = experiment::evaluate_corpus(corpus, bundle, a.cfg.threads);
  experiment::write_eval_report(a.cfg.report_dir, corpus, ev);
  out << "held-out " << ev.held_out.correct << "/" << ev.held_out.total << ", all " << ev.all.correct << "/"
      << ev.all.total << "\n";
  return 0;
}

int cmd_perturb(const Args& a, std::ostream& out) {
  const TimeSeries series = io::read_series_csv(a.perturb_series);
  perturb::Perturbation p{perturb::kind_from_string(a.perturb_kind), a.perturb_epsilon, a.cfg.seed};
  p.validate();
  if (!a.perturb_envelope.empty()) {
    require(a.perturb_envelope == "C" || a.perturb_envelope == "D", ErrorKind::InvalidArgument,
            "--envelope takes C or D");
    require(!a.perturb_query_out.empty(), ErrorKind::InvalidArgument, "--envelope needs --query-out");
    const auto bundle = load_bundle(a.cfg);
    const auto ch = a.perturb_envelope == "C" ? perturb::Channel::C : perturb::Channel::D;
    const auto& model = ch == perturb::Channel::C ? bundle.nn_c : bundle.nn_d;
    const auto s = pipeline::run_pipeline(series, bundle.pipeline);
    const std::size_t expected = mlp::classify(model, ch == perturb::Channel::C ? s.hist_c.bins : s.hist_d.bins);
    const auto env = perturb::build_envelope(series, p, ch, bundle.pipeline,
                                             {a.cfg.sweep.n_iters, a.cfg.sweep.sweep_lower_fraction});
    const fs::path qpath = fs::absolute(a.perturb_query_out);
    const fs::path mpath = fs::absolute(a.cfg.bundle_dir / (ch == perturb::Channel::C ? "nn_c.json" : "nn_d.json"));
    const auto region = verifier::InputRegion::box(env.lower, env.upper);
    io::write_file_atomic(qpath, query::format(region, mpath.lexically_relative(qpath.parent_path()).generic_string(),
                                               expected));
    out << "envelope over " << env.sample_count << " perturbed series, expected class " << expected << "\n";
  }
  if (!a.perturb_out.empty()) {
    const TimeSeries perturbed = perturb::apply(series, p);
    io::write_series_csv(a.perturb_out, perturbed);
    if (perturb::preserves_length(p.kind)) {
      const auto snr = perturb::snr(series, perturbed);
      out << "snr_db friction " << io::format_double(snr.friction_db) << " omega " << io::format_double(snr.omega_db)
          << "\n";
    } else {
      out << "dropped " << series.size() - perturbed.size() << " frames\n";
    }
  }
  return 0;
}

int cmd_verify(const Args& a, std::ostream& out) {
  const auto q = query::load(a.verify_query);
  const auto model = mlp::load(q.model);
  const auto region = q.region(model.input_dim);
  nlohmann::json j;
  if (q.expected) {
    const auto v = verifier::verify_local_robustness(model, region, *q.expected, a.cfg.sweep.verifier);
    if (v.robust) {
      out << "ROBUST\n";
    } else {
      out << "NOT_ROBUST class " << v.first()->witness_class << "\n";
    }
    nlohmann::json ces = nlohmann::json::array();
    for (const auto& c : v.counterexamples) ces.push_back(verifier::to_json(c));
    j = {{"expected", *q.expected}, {"robust", v.robust}, {"counterexamples", ces},
         {"stats", verifier::to_json(v.stats, false)}};
  } else {
    const auto v = verifier::verify_query(model, region, *q.target, a.cfg.sweep.verifier);
    out << (v.sat ? "SAT" : "UNSAT") << "\n";
    j = verifier::to_json(v);
  }
  if (!a.verify_json.empty()) io::write_file_atomic(a.verify_json, j.dump(1) + "\n");
  return 0;
}

int cmd_sweep(const Args& a, std::ostream& out) {
  const auto corpus = load_corpus(a.cfg);
  const auto bundle = load_bundle(a.cfg);
  experiment::SweepPlan plan = a.cfg.sweep;
  if (!a.sweep_kinds.empty()) {
    plan.kinds.clear();
    for (const auto& k : a.sweep_kinds) plan.kinds.push_back(perturb::kind_from_string(k));
  }
  plan.seed = a.cfg.seed;
  plan.threads = a.cfg.threads;
  const auto ev = experiment::evaluate_corpus(corpus, bundle, a.cfg.threads);
  const auto sw = experiment::run_sweep(corpus, ev.predicted, bundle, plan);
  experiment::write_sweep_report(a.cfg.report_dir, corpus, sw);
  out << "sweep: " << sw.members.size() << " members, " << sw.report.cells.size() << " cells\n";
  return 0;
}

int cmd_certify(const Args& a, std::ostream& out) {
  const auto corpus = load_corpus(a.cfg);
  const auto bundle = load_bundle(a.cfg);
  experiment::CertifyPlan plan;
  if (!a.certify_groups.empty()) {
    plan.groups.clear();
    for (const auto& g : a.certify_groups) plan.groups.push_back(robustness::Group::parse(g));
  }
  plan.samples = a.certify_samples;
  plan.max_attempts = a.certify_max_attempts;
  plan.synthesis.trim_quantile = a.certify_trim;
  plan.seed = a.cfg.seed;
  plan.threads = a.cfg.threads;
  plan.verifier = a.cfg.sweep.verifier;
  const auto sums = experiment::summarize(corpus, bundle.pipeline, a.cfg.threads);
  const auto res = experiment::run_certification(corpus, sums, bundle, plan);
  experiment::write_certify_report(a.cfg.report_dir, res);
  for (const auto& r : res) {
    out << r.group.name() << ' ' << (r.verdict.certified ? "CERTIFIED" : "COUNTEREXAMPLE");
    if (r.sampling) out << " sampled " << r.sampling->accepted << " misclassified " << r.sampling->misclassified;
    out << "\n";
  }
  return 0;
}

int cmd_report(const Args& a, std::ostream& out) {
  require_dir(a.cfg.report_dir, "report");
  const fs::path src = a.cfg.report_dir / "sweep.json";
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(src));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::Parse, src.string() + ": " + e.what());
  }
  const auto report = robustness::report_from_json(j);
  io::write_file_atomic(a.cfg.report_dir / "sweep.csv", robustness::cells_csv(report));
  experiment::write_sweep_charts(a.cfg.report_dir, report);
  std::ostringstream csv;
  csv << "group,kind,first_rate,max_rise,rise_from,rise_to,binary_below_class\n";
  for (const auto& c : robustness::check_curves(report)) {
    csv << c.group.name() << ',' << perturb::to_string(c.kind) << ','
        << (c.first_rate ? io::format_double(*c.first_rate) : "") << ',' << io::format_double(c.max_rise) << ','
        << io::format_double(c.rise_from) << ',' << io::format_double(c.rise_to) << ',' << c.binary_below_class
        << "\n";
  }
  io::write_file_atomic(a.cfg.report_dir / "curves.csv", csv.str());
  out << csv.str();
  return 0;
}

// ---------------------------------------------------------------------------

void add_pipeline_options(CLI::App* sub, pipeline::PipelineConfig& pc) {
  sub->add_option("--window", pc.window_size, "rolling regression window [samples]")->capture_default_str();
  sub->add_option("--residual-threshold", pc.residual_threshold, "changepoint trigger [mNm]")->capture_default_str();
  sub->add_option("--min-interval", pc.min_interval, "shortest interval [samples]")->capture_default_str();
  sub->add_option("--pair-tolerance", pc.pair_match_tolerance, "relative pair magnitude tolerance")
      ->capture_default_str();
  sub->add_option("--pair-max-gap", pc.pair_match_max_gap, "max delta-index distance of a pair")
      ->capture_default_str();
  sub->add_option("--bins", pc.bins, "histogram bins M")->capture_default_str();
}

int dispatch(CLI::App& app, Args& a, std::ostream& out) {
  a.cfg.validate();
  const std::string name = app.get_subcommands().front()->get_name();
  if (name == "gen") return cmd_gen(a, out);
  if (name == "process") return cmd_process(a, out);
  if (name == "train") return cmd_train(a, out);
  if (name == "eval") return cmd_eval(a, out);
  if (name == "perturb") return cmd_perturb(a, out);
  if (name == "verify") return cmd_verify(a, out);
  if (name == "sweep") return cmd_sweep(a, out);
  if (name == "certify") return cmd_certify(a, out);
  if (name == "report") return cmd_report(a, out);
  fail(ErrorKind::InvalidArgument, "unknown subcommand " + name);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Args a;
  RunConfig& c = a.cfg;
  CLI::App app{"Reaction-wheel friction anomaly classification and neural network robustness certification",
               "rwacert"};
  app.set_config("--config", "", "run configuration (INI/TOML; sections per subcommand)");
  app.require_subcommand(1, 1);
  app.add_option("--seed", c.seed, "root seed")->capture_default_str();
  app.add_option("--threads", c.threads, "worker threads (0 = all cores)")->capture_default_str();
  app.add_option("--data", c.data_dir, "corpus directory (default: data)");
  app.add_option("--bundle", c.bundle_dir, "classifier bundle directory (default: model)");
  app.add_option("--reports", c.report_dir, "report directory (default: reports)");

  auto* gen = app.add_subcommand("gen", "generate a labelled synthetic corpus into --data");
  gen->add_option("--status", a.gen_status, "statuses to generate (N, A1..D3); default: desk class mix");
  gen->add_option("--count", a.gen_count, "series per --status")->capture_default_str();
  gen->add_option("--scale", a.gen_scale, "scale factor of the desk class mix")->capture_default_str();
  gen->add_option("--samples", c.gen.n_samples, "samples per series")->capture_default_str();
  gen->add_option("--noise-sigma", c.gen.noise_sigma, "measurement noise [mNm]")->capture_default_str();
  gen->add_option("--dry-base", c.gen.dry_base, "nominal dry friction [mNm]")->capture_default_str();
  gen->add_option("--visc-base", c.gen.visc_base, "nominal viscous coefficient [mNm s/rad]")->capture_default_str();
  gen->add_flag("--no-truth", a.gen_no_truth, "skip ground-truth sidecars");

  auto* process = app.add_subcommand("process", "run the pipeline over --data (or one --series)");
  process->add_option("--series", a.process_series, "single series CSV; summary printed to stdout")
      ->check(CLI::ExistingFile);
  process->add_flag("--from-bundle", a.process_from_bundle, "use the pipeline configuration stored in --bundle");
  add_pipeline_options(process, c.pipeline);

  auto* train = app.add_subcommand("train", "train the classifier bundle from --data into --bundle");
  train->add_option("--train-fraction", a.train_fraction, "per-status training fraction")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  train->add_option("--residual-factor", a.residual_factor, "changepoint trigger / median nominal residual")
      ->capture_default_str();
  train->add_option("--epochs", c.train.epochs)->capture_default_str();
  train->add_option("--learning-rate", c.train.learning_rate)->capture_default_str();
  train->add_option("--batch-size", c.train.batch_size)->capture_default_str();
  train->add_option("--hidden", c.train.hidden_dim, "hidden ReLUs")->capture_default_str();
  train->add_option("--l2", c.train.l2)->capture_default_str();
  add_pipeline_options(train, c.pipeline);

  app.add_subcommand("eval", "evaluate --bundle on --data");

  auto* pert = app.add_subcommand("perturb", "perturb one series; optionally emit an envelope query");
  pert->add_option("--series", a.perturb_series, "input series CSV")->required()->check(CLI::ExistingFile);
  pert->add_option("--kind", a.perturb_kind, "gaussian|uniform|poisson|linear_trend|amplitude_scaling|missing_data")
      ->capture_default_str();
  pert->add_option("--epsilon", a.perturb_epsilon, "strength")->capture_default_str();
  pert->add_option("--out", a.perturb_out, "perturbed series CSV");
  pert->add_option("--envelope", a.perturb_envelope, "network (C or D) whose histogram envelope to build");
  pert->add_option("--query-out", a.perturb_query_out, "query file for the envelope");
  pert->add_option("--n-iters", c.sweep.n_iters, "perturbed instances per envelope")->capture_default_str();

  auto* verify = app.add_subcommand("verify", "decide a query file");
  verify->add_option("--query", a.verify_query, "query file")->required()->check(CLI::ExistingFile);
  verify->add_option("--json", a.verify_json, "write the verdict as JSON");

  auto* sweep = app.add_subcommand("sweep", "local robustness sweep of --bundle on --data");
  sweep->add_option("--kinds", a.sweep_kinds, "perturbation kinds (default: all)");
  sweep->add_option("--n-iters", c.sweep.n_iters, "perturbed instances per envelope")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sweep->add_option("--sweep-lower-fraction", c.sweep.sweep_lower_fraction,
                    "deterministic kinds sweep [f * eps, eps]")
      ->capture_default_str();
  sweep->add_option("--per-class", c.sweep.protocol.per_anomaly_class, "series per C/D class")->capture_default_str();
  sweep->add_option("--no-c-per-class", c.sweep.protocol.no_c_per_class)->capture_default_str();
  sweep->add_option("--no-d-per-class", c.sweep.protocol.no_d_per_class)->capture_default_str();
  sweep->add_flag("--clamp", c.sweep.protocol.clamp_to_available, "take fewer series when a stratum is short");
  sweep->add_option("--calibration-size", c.sweep.calibration_size, "nominal series for SNR ladders")
      ->capture_default_str();
  sweep->add_option("--ladder-start", c.sweep.ladder.start)->capture_default_str();
  sweep->add_option("--max-rungs", c.sweep.ladder.max_rungs)->capture_default_str();

  auto* cert = app.add_subcommand("certify", "global constraint synthesis and certification");
  cert->add_option("--groups", a.certify_groups, "groups (noC, C1..C3, noD, D1..D3; default: all)");
  cert->add_option("--samples", a.certify_samples, "rejection samples per certified set")->capture_default_str();
  cert->add_option("--max-attempts", a.certify_max_attempts)->capture_default_str();
  cert->add_option("--trim-quantile", a.certify_trim, "weighted-sum trim per tail")->capture_default_str();

  app.add_subcommand("report", "re-render sweep charts and curve checks from --reports/sweep.json");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  try {
    return dispatch(app, a, out);
  } catch (const Error& e) {
    err << "error[" << to_string(e.kind()) << "]: " << one_line(e.what()) << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error[internal]: " << one_line(e.what()) << "\n";
    return 1;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("rwacert");
  for (const auto& s : args) argv.push_back(s.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace rwacert::cli
