#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "rwacert/lp.hpp"
#include "rwacert/mlp.hpp"

// Complete decision procedure for "does some input in the region classify to
// class t?" on one-hidden-layer ReLU networks: branch-and-bound over ReLU
// phases, interval bound propagation and an optional triangle LP relaxation
// for pruning, and exact affine LPs once every phase is fixed.
namespace rwacert::verifier {

struct InputRegion {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<lp::LinearConstraint> linear;  // over the M inputs

  static InputRegion point(const std::vector<double>& h);
  static InputRegion box(std::vector<double> lower, std::vector<double> upper);

  std::size_t dim() const { return lower.size(); }
  void validate() const;
  // Box within `slack`, linear constraints within `slack`.
  bool contains(const std::vector<double>& x, double slack = 1e-9) const;
};

struct IntervalBounds {
  std::vector<double> hidden_lo, hidden_hi;  // pre-activations
  std::vector<double> logit_lo, logit_hi;
};

// Interval arithmetic through both layers; ignores region.linear.
IntervalBounds interval_bounds(const mlp::MlpModel& model, const InputRegion& region);

struct VerifierOptions {
  bool ibp_pruning = true;
  bool relaxation_pruning = true;
  double margin = 1e-7;  // strictness margin used when a witness fails validation
  lp::LpOptions lp{};
};

struct QueryStats {
  std::size_t lp_calls = 0;
  std::size_t nodes = 0;
  std::size_t leaves = 0;
  std::size_t pruned_ibp = 0;
  std::size_t pruned_relaxation = 0;
  std::size_t near_misses = 0;
  double wall_ms = 0.0;

  QueryStats& operator+=(const QueryStats& o);
};

struct Verdict {
  bool sat = false;
  std::vector<double> witness;  // set when sat
  std::size_t witness_class = 0;
  std::size_t target = 0;
  QueryStats stats;
};

// Is there h in the region with classify(model, h) == target?
Verdict verify_query(const mlp::MlpModel& model, const InputRegion& region, std::size_t target,
                     const VerifierOptions& options = {});

struct RobustnessVerdict {
  bool robust = true;
  std::size_t expected = 0;
  // Sat verdicts in ascending target order; the first is the reported counterexample.
  std::vector<Verdict> counterexamples;
  QueryStats stats;

  const Verdict* first() const { return counterexamples.empty() ? nullptr : &counterexamples.front(); }
};

// One query per target != expected, in ascending class order. With
// `all_targets` false the search stops at the first Sat.
RobustnessVerdict verify_local_robustness(const mlp::MlpModel& model, const InputRegion& region,
                                          std::size_t expected, const VerifierOptions& options = {},
                                          bool all_targets = false);

nlohmann::json to_json(const QueryStats& s, bool include_time);
nlohmann::json to_json(const Verdict& v, bool include_time = false);

}  // namespace rwacert::verifier
