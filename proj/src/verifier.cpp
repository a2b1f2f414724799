#include "rwacert/verifier.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "rwacert/error.hpp"

namespace rwacert::verifier {

InputRegion InputRegion::point(const std::vector<double>& h) { return {h, h, {}}; }

InputRegion InputRegion::box(std::vector<double> lower, std::vector<double> upper) {
  return {std::move(lower), std::move(upper), {}};
}

void InputRegion::validate() const {
  require(lower.size() == upper.size(), ErrorKind::DimensionMismatch, "region lower/upper length mismatch");
  for (std::size_t i = 0; i < lower.size(); ++i) {
    require(std::isfinite(lower[i]) && std::isfinite(upper[i]), ErrorKind::InvalidArgument,
            "region bounds must be finite");
    require(lower[i] <= upper[i], ErrorKind::InvalidArgument,
            "region lower > upper at x_" + std::to_string(i));
  }
  for (const auto& c : linear) {
    require(c.coeffs.size() == lower.size(), ErrorKind::DimensionMismatch, "linear constraint arity != region dim");
    for (double a : c.coeffs) require(std::isfinite(a), ErrorKind::InvalidArgument, "non-finite coefficient");
    require(std::isfinite(c.rhs), ErrorKind::InvalidArgument, "non-finite constraint rhs");
  }
}

bool InputRegion::contains(const std::vector<double>& x, double slack) const {
  if (x.size() != lower.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < lower[i] - slack || x[i] > upper[i] + slack) return false;
  }
  for (const auto& c : linear) {
    double lhs = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) lhs += c.coeffs[i] * x[i];
    if (c.rel == lp::Relation::Le && lhs > c.rhs + slack) return false;
    if (c.rel == lp::Relation::Ge && lhs < c.rhs - slack) return false;
    if (c.rel == lp::Relation::Eq && std::abs(lhs - c.rhs) > slack) return false;
  }
  return true;
}

IntervalBounds interval_bounds(const mlp::MlpModel& model, const InputRegion& region) {
  require(region.dim() == model.input_dim, ErrorKind::DimensionMismatch,
          "region dim " + std::to_string(region.dim()) + " != model input_dim " + std::to_string(model.input_dim));
  const std::size_t H = model.hidden_dim;
  IntervalBounds b;
  b.hidden_lo.assign(H, 0.0);
  b.hidden_hi.assign(H, 0.0);
  for (std::size_t j = 0; j < H; ++j) {
    double lo = model.b1[j], hi = model.b1[j];
    for (std::size_t i = 0; i < model.input_dim; ++i) {
      const double w = model.weight1(j, i);
      lo += w * (w >= 0 ? region.lower[i] : region.upper[i]);
      hi += w * (w >= 0 ? region.upper[i] : region.lower[i]);
    }
    b.hidden_lo[j] = lo;
    b.hidden_hi[j] = hi;
  }
  b.logit_lo.assign(mlp::kNumClasses, 0.0);
  b.logit_hi.assign(mlp::kNumClasses, 0.0);
  for (std::size_t c = 0; c < mlp::kNumClasses; ++c) {
    double lo = model.b2[c], hi = model.b2[c];
    for (std::size_t j = 0; j < H; ++j) {
      const double w = model.weight2(c, j);
      const double alo = std::max(b.hidden_lo[j], 0.0), ahi = std::max(b.hidden_hi[j], 0.0);
      lo += w * (w >= 0 ? alo : ahi);
      hi += w * (w >= 0 ? ahi : alo);
    }
    b.logit_lo[c] = lo;
    b.logit_hi[c] = hi;
  }
  return b;
}

QueryStats& QueryStats::operator+=(const QueryStats& o) {
  lp_calls += o.lp_calls;
  nodes += o.nodes;
  leaves += o.leaves;
  pruned_ibp += o.pruned_ibp;
  pruned_relaxation += o.pruned_relaxation;
  near_misses += o.near_misses;
  wall_ms += o.wall_ms;
  return *this;
}

namespace {

enum class Phase : signed char { Unknown, Active, Inactive };

class Search {
 public:
  Search(const mlp::MlpModel& model, const InputRegion& region, std::size_t target, const VerifierOptions& opt)
      : model_(model), region_(region), target_(target), opt_(opt), M_(model.input_dim), H_(model.hidden_dim) {
    bounds_ = interval_bounds(model, region);
  }

  Verdict run() {
    Verdict v;
    v.target = target_;
    std::vector<Phase> phase(H_, Phase::Unknown);
    std::vector<bool> implied(H_, false);
    if (opt_.ibp_pruning) {
      for (std::size_t j = 0; j < H_; ++j) {
        if (bounds_.hidden_lo[j] >= 0.0) phase[j] = Phase::Active, implied[j] = true;
        else if (bounds_.hidden_hi[j] <= 0.0) phase[j] = Phase::Inactive, implied[j] = true;
      }
    }
    implied_ = implied;
    if (node(phase)) {
      v.sat = true;
      v.witness = witness_;
      v.witness_class = mlp::classify(model_, witness_);
    }
    v.stats = stats_;
    return v;
  }

 private:
  // Activation range of neuron j under the given phase.
  std::pair<double, double> act_range(std::size_t j, Phase p) const {
    if (p == Phase::Inactive) return {0.0, 0.0};
    const double hi = std::max(bounds_.hidden_hi[j], 0.0);
    if (p == Phase::Active) return {std::max(bounds_.hidden_lo[j], 0.0), hi};
    return {0.0, hi};
  }

  // Upper bound of logit_target - logit_k given phases.
  double diff_upper(std::size_t k, const std::vector<Phase>& phase) const {
    double acc = model_.b2[target_] - model_.b2[k];
    for (std::size_t j = 0; j < H_; ++j) {
      const double w = model_.weight2(target_, j) - model_.weight2(k, j);
      auto [lo, hi] = act_range(j, phase[j]);
      acc += w * (w >= 0 ? hi : lo);
    }
    return acc;
  }

  bool validate(std::vector<double> x) {
    for (std::size_t i = 0; i < M_; ++i) x[i] = std::clamp(x[i], region_.lower[i], region_.upper[i]);
    if (!region_.contains(x, 1e-9)) return false;
    if (mlp::classify(model_, x) != target_) return false;
    witness_ = std::move(x);
    return true;
  }

  struct NodeLp {
    lp::LpProblem problem;
    std::size_t margin_var = 0;
  };

  // Variables: x (M), one relaxed activation per unknown crossing neuron,
  // then the margin variable tau. Maximizes tau subject to
  // logit_target - logit_k >= tau for every k != target.
  NodeLp build(const std::vector<Phase>& phase, double strict_margin) const {
    NodeLp out;
    lp::LpProblem& p = out.problem;
    p.lower = region_.lower;
    p.upper = region_.upper;
    const std::size_t nx = M_;

    // act_j as an affine map over the LP variables; filled once all vars exist.
    std::vector<std::size_t> relax_var(H_, SIZE_MAX);
    for (std::size_t j = 0; j < H_; ++j) {
      if (phase[j] == Phase::Unknown && bounds_.hidden_lo[j] < 0.0 && bounds_.hidden_hi[j] > 0.0) {
        relax_var[j] = p.lower.size();
        p.lower.push_back(0.0);
        p.upper.push_back(bounds_.hidden_hi[j]);
      }
    }
    double tau_hi = 0.0;
    for (std::size_t k = 0; k < mlp::kNumClasses; ++k) {
      if (k != target_) tau_hi = std::max(tau_hi, diff_upper(k, phase));
    }
    out.margin_var = p.lower.size();
    p.lower.push_back(0.0);
    p.upper.push_back(tau_hi + 1.0);
    const std::size_t nv = p.lower.size();

    auto pre = [&](std::size_t j) {
      std::vector<double> row(nv, 0.0);
      for (std::size_t i = 0; i < nx; ++i) row[i] = model_.weight1(j, i);
      return row;
    };

    // Linear region constraints.
    for (const auto& c : region_.linear) {
      std::vector<double> row(nv, 0.0);
      std::copy(c.coeffs.begin(), c.coeffs.end(), row.begin());
      p.constraints.push_back({std::move(row), c.rel, c.rhs});
    }

    // act_j = coeffs . vars + constant
    std::vector<std::vector<double>> act(H_, std::vector<double>(nv, 0.0));
    std::vector<double> act_c(H_, 0.0);
    for (std::size_t j = 0; j < H_; ++j) {
      const double b = model_.b1[j];
      const double lo = bounds_.hidden_lo[j], hi = bounds_.hidden_hi[j];
      switch (phase[j]) {
        case Phase::Active:
          act[j] = pre(j);
          act_c[j] = b;
          if (!implied_[j]) p.constraints.push_back({pre(j), lp::Relation::Ge, -b});
          break;
        case Phase::Inactive:
          if (!implied_[j]) p.constraints.push_back({pre(j), lp::Relation::Le, -b});
          break;
        case Phase::Unknown:
          if (lo >= 0.0) {
            act[j] = pre(j);
            act_c[j] = b;
          } else if (hi > 0.0) {
            const std::size_t a = relax_var[j];
            act[j][a] = 1.0;
            // a >= z
            auto r1 = pre(j);
            for (double& v : r1) v = -v;
            r1[a] = 1.0;
            p.constraints.push_back({std::move(r1), lp::Relation::Ge, b});
            // a <= hi (z - lo) / (hi - lo)
            const double s = hi / (hi - lo);
            auto r2 = pre(j);
            for (double& v : r2) v = -s * v;
            r2[a] = 1.0;
            p.constraints.push_back({std::move(r2), lp::Relation::Le, s * (b - lo)});
          }
          break;
      }
    }

    for (std::size_t k = 0; k < mlp::kNumClasses; ++k) {
      if (k == target_) continue;
      std::vector<double> row(nv, 0.0);
      double c = model_.b2[target_] - model_.b2[k];
      for (std::size_t j = 0; j < H_; ++j) {
        const double w = model_.weight2(target_, j) - model_.weight2(k, j);
        if (w == 0.0) continue;
        for (std::size_t v = 0; v < nv; ++v) row[v] += w * act[j][v];
        c += w * act_c[j];
      }
      if (strict_margin > 0.0 && k < target_) {
        p.constraints.push_back({row, lp::Relation::Ge, strict_margin - c});
      }
      row[out.margin_var] = -1.0;
      p.constraints.push_back({std::move(row), lp::Relation::Ge, -c});
    }
    p.objective.assign(nv, 0.0);
    p.objective[out.margin_var] = -1.0;
    return out;
  }

  lp::LpResult solve(const std::vector<Phase>& phase, double strict_margin) {
    NodeLp n = build(phase, strict_margin);
    ++stats_.lp_calls;
    return lp::lp_solve(n.problem, opt_.lp);
  }

  static std::vector<double> head(const std::vector<double>& v, std::size_t n) {
    return {v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n)};
  }

  bool node(std::vector<Phase>& phase) {
    ++stats_.nodes;
    if (opt_.ibp_pruning) {
      for (std::size_t k = 0; k < mlp::kNumClasses; ++k) {
        if (k != target_ && diff_upper(k, phase) < 0.0) {
          ++stats_.pruned_ibp;
          return false;
        }
      }
    }

    std::size_t branch = H_;
    double widest = -1.0;
    for (std::size_t j = 0; j < H_; ++j) {
      if (phase[j] != Phase::Unknown) continue;
      const double width = bounds_.hidden_hi[j] - bounds_.hidden_lo[j];
      if (width > widest) {
        widest = width;
        branch = j;
      }
    }

    if (branch == H_) {
      ++stats_.leaves;
      auto r = solve(phase, 0.0);
      if (!r.feasible) return false;
      if (validate(head(r.point, M_))) return true;
      auto strict = solve(phase, opt_.margin);
      if (strict.feasible && validate(head(strict.point, M_))) return true;
      ++stats_.near_misses;
      return false;
    }

    if (opt_.relaxation_pruning) {
      auto r = solve(phase, 0.0);
      if (!r.feasible) {
        ++stats_.pruned_relaxation;
        return false;
      }
      if (validate(head(r.point, M_))) return true;
    }

    for (Phase p : {Phase::Active, Phase::Inactive}) {
      phase[branch] = p;
      if (node(phase)) return true;
    }
    phase[branch] = Phase::Unknown;
    return false;
  }

  const mlp::MlpModel& model_;
  const InputRegion& region_;
  std::size_t target_;
  const VerifierOptions& opt_;
  std::size_t M_, H_;
  IntervalBounds bounds_;
  std::vector<bool> implied_;
  std::vector<double> witness_;
  QueryStats stats_;
};

}  // namespace

Verdict verify_query(const mlp::MlpModel& model, const InputRegion& region, std::size_t target,
                     const VerifierOptions& options) {
  model.validate();
  region.validate();
  require(region.dim() == model.input_dim, ErrorKind::DimensionMismatch,
          "region dim " + std::to_string(region.dim()) + " != model input_dim " + std::to_string(model.input_dim));
  require(target < mlp::kNumClasses, ErrorKind::InvalidArgument, "target class out of range");
  const auto t0 = std::chrono::steady_clock::now();
  Search search(model, region, target, options);
  Verdict v = search.run();
  v.stats.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return v;
}

RobustnessVerdict verify_local_robustness(const mlp::MlpModel& model, const InputRegion& region,
                                          std::size_t expected, const VerifierOptions& options,
                                          bool all_targets) {
  require(expected < mlp::kNumClasses, ErrorKind::InvalidArgument, "expected class out of range");
  RobustnessVerdict out;
  out.expected = expected;
  for (std::size_t t = 0; t < mlp::kNumClasses; ++t) {
    if (t == expected) continue;
    Verdict v = verify_query(model, region, t, options);
    out.stats += v.stats;
    if (v.sat) {
      out.robust = false;
      out.counterexamples.push_back(std::move(v));
      if (!all_targets) break;
    }
  }
  return out;
}

nlohmann::json to_json(const QueryStats& s, bool include_time) {
  nlohmann::json j = {
      {"lp_calls", s.lp_calls},         {"nodes", s.nodes},
      {"leaves", s.leaves},             {"pruned_ibp", s.pruned_ibp},
      {"pruned_relaxation", s.pruned_relaxation}, {"near_misses", s.near_misses},
  };
  if (include_time) j["wall_ms"] = s.wall_ms;
  return j;
}

nlohmann::json to_json(const Verdict& v, bool include_time) {
  nlohmann::json j = {{"target", v.target}, {"result", v.sat ? "sat" : "unsat"}};
  if (v.sat) {
    j["witness"] = v.witness;
    j["witness_class"] = v.witness_class;
  }
  j["stats"] = to_json(v.stats, include_time);
  return j;
}

}  // namespace rwacert::verifier
