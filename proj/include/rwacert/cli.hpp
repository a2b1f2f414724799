#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "rwacert/experiment.hpp"

// Command-line front end:
//
//   rwacert [--config run.ini] [--seed N] [--threads N] <subcommand> [options]
//
//   gen      synthetic labelled corpus          -> <data>/
//   process  pipeline summaries                 -> <reports>/summaries.json
//   train    classifier bundle                  -> <bundle>/
//   eval     confusion matrix and S/PPV         -> <reports>/eval.json ...
//   perturb  perturbed series, SNR, envelope query
//   verify   decide a query file
//   sweep    local robustness sweep             -> <reports>/sweep.json ...
//   certify  global constraint certification    -> <reports>/certify.json ...
//   report   re-render charts and curve checks from <reports>/sweep.json
//
// Exit codes: 0 success, 1 domain error (stderr line "error[<kind>]: ..."),
// 2 usage error.
namespace rwacert::cli {

struct RunConfig {
  std::filesystem::path data_dir = "data";
  std::filesystem::path bundle_dir = "model";
  std::filesystem::path report_dir = "reports";
  std::uint64_t seed = 1;
  unsigned threads = 0;
  pipeline::PipelineConfig pipeline;
  telemetry::GenConfig gen;
  mlp::TrainConfig train;
  experiment::SweepPlan sweep;

  // n_iters >= 1 plus the nested configs' own checks.
  void validate() const;
};

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rwacert::cli
