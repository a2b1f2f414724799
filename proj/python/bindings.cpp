#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "rwacert/classifier.hpp"
#include "rwacert/cli.hpp"
#include "rwacert/error.hpp"
#include "rwacert/mlp.hpp"
#include "rwacert/perturb.hpp"
#include "rwacert/pipeline.hpp"
#include "rwacert/robustness.hpp"
#include "rwacert/telemetry.hpp"
#include "rwacert/verifier.hpp"

namespace py = pybind11;
using namespace rwacert;

namespace {

TimeSeries make_series(std::vector<double> omega, std::vector<double> friction) {
  TimeSeries s{std::move(omega), std::move(friction)};
  s.validate();
  return s;
}

verifier::InputRegion make_box(std::vector<double> lower, std::vector<double> upper) {
  auto r = verifier::InputRegion::box(std::move(lower), std::move(upper));
  r.validate();
  return r;
}

py::dict verdict_dict(const verifier::Verdict& v) {
  py::dict d;
  d["sat"] = v.sat;
  d["target"] = v.target;
  d["witness"] = v.witness;
  d["witness_class"] = v.sat ? py::cast(v.witness_class) : py::none();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Reaction-wheel friction anomaly pipeline and ReLU network verifier";

  py::register_exception<Error>(m, "Error", PyExc_ValueError);

  m.def(
      "generate_series",
      [](const std::string& status, std::uint64_t seed, std::size_t n_samples, double noise_sigma) {
        telemetry::GenConfig g;
        g.seed = seed;
        g.n_samples = n_samples;
        g.noise_sigma = noise_sigma;
        auto out = telemetry::generate_series(telemetry::AnomalyProfile::for_status(Status::parse(status)), g);
        return py::make_tuple(out.series.omega, out.series.friction, out.truth.dry);
      },
      py::arg("status"), py::arg("seed"), py::arg("n_samples") = 4000, py::arg("noise_sigma") = 0.005,
      "Returns (omega, friction, true dry friction) lists.");

  m.def(
      "run_pipeline",
      [](std::vector<double> omega, std::vector<double> friction, const std::string& config_json) {
        const auto cfg = config_json.empty() ? pipeline::PipelineConfig{}
                                             : pipeline::pipeline_config_from_json(nlohmann::json::parse(config_json));
        return pipeline::to_json(pipeline::run_pipeline(make_series(std::move(omega), std::move(friction)), cfg))
            .dump();
      },
      py::arg("omega"), py::arg("friction"), py::arg("config_json") = "", "Pipeline summary as a JSON string.");

  m.def(
      "perturb",
      [](std::vector<double> omega, std::vector<double> friction, const std::string& kind, double epsilon,
         std::uint64_t seed) {
        auto s = perturb::apply(make_series(std::move(omega), std::move(friction)),
                                {perturb::kind_from_string(kind), epsilon, seed});
        return py::make_tuple(s.omega, s.friction);
      },
      py::arg("omega"), py::arg("friction"), py::arg("kind"), py::arg("epsilon"), py::arg("seed") = 0);

  m.def(
      "snr_db",
      [](const std::vector<double>& original, const std::vector<double>& perturbed) {
        return perturb::snr_channel(original, perturbed);
      },
      py::arg("original"), py::arg("perturbed"));

  m.def("weighted_sum", [](const std::vector<double>& h) { return robustness::weighted_sum(h); }, py::arg("h"));
  m.def(
      "window_means", [](const std::vector<double>& h, std::size_t k) { return robustness::window_means(h, k); },
      py::arg("h"), py::arg("k"));

  py::class_<mlp::MlpModel>(m, "MlpModel")
      .def_static("load", &mlp::load, py::arg("path"))
      .def_static(
          "from_json", [](const std::string& s) { return mlp::model_from_json(nlohmann::json::parse(s)); },
          py::arg("text"))
      .def_static("random", &mlp::init_model, py::arg("input_dim"), py::arg("hidden_dim"), py::arg("seed"))
      .def("to_json", &mlp::serialize)
      .def_readonly("input_dim", &mlp::MlpModel::input_dim)
      .def_readonly("hidden_dim", &mlp::MlpModel::hidden_dim)
      .def("forward", [](const mlp::MlpModel& self, const std::vector<double>& h) { return mlp::forward(self, h); })
      .def("classify",
           [](const mlp::MlpModel& self, const std::vector<double>& h) { return mlp::classify(self, h); });

  m.def(
      "verify_query",
      [](const mlp::MlpModel& model, std::vector<double> lower, std::vector<double> upper, std::size_t target) {
        return verdict_dict(verifier::verify_query(model, make_box(std::move(lower), std::move(upper)), target));
      },
      py::arg("model"), py::arg("lower"), py::arg("upper"), py::arg("target"),
      "Is there an input in the box the model assigns to `target`?");

  m.def(
      "verify_local_robustness",
      [](const mlp::MlpModel& model, std::vector<double> lower, std::vector<double> upper, std::size_t expected) {
        const auto v = verifier::verify_local_robustness(model, make_box(std::move(lower), std::move(upper)),
                                                         expected, {}, true);
        py::list ces;
        for (const auto& c : v.counterexamples) ces.append(verdict_dict(c));
        py::dict d;
        d["robust"] = v.robust;
        d["expected"] = v.expected;
        d["counterexamples"] = ces;
        return d;
      },
      py::arg("model"), py::arg("lower"), py::arg("upper"), py::arg("expected"));

  py::class_<classifier::ClassifierBundle>(m, "ClassifierBundle")
      .def_static("load", &classifier::load_bundle, py::arg("directory"))
      .def_readonly("nn_c", &classifier::ClassifierBundle::nn_c)
      .def_readonly("nn_d", &classifier::ClassifierBundle::nn_d)
      .def("classify", [](const classifier::ClassifierBundle& self, std::vector<double> omega,
                          std::vector<double> friction) {
        return classifier::classify_series(make_series(std::move(omega), std::move(friction)), self).str();
      });

  m.def(
      "cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line front end in-process; returns (exit_code, stdout, stderr).");
}
