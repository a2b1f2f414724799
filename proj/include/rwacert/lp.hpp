#pragma once

#include <cstddef>
#include <vector>

// Small dense linear programs over box-bounded variables. Two-phase primal
// simplex on a full tableau with Bland's rule; meant for the tens-of-variables
// problems produced by the verifier, not for general use.
namespace rwacert::lp {

enum class Relation { Le, Ge, Eq };

struct LinearConstraint {
  std::vector<double> coeffs;  // one per variable
  Relation rel = Relation::Le;
  double rhs = 0.0;
};

struct LpProblem {
  std::vector<double> lower;  // finite
  std::vector<double> upper;  // finite
  std::vector<LinearConstraint> constraints;
  std::vector<double> objective;  // minimized; empty means pure feasibility

  std::size_t num_vars() const { return lower.size(); }
  std::size_t add_variable(double lo, double hi);
  void add(std::vector<double> coeffs, Relation rel, double rhs);
};

struct LpOptions {
  double feasibility_tol = 1e-9;
  double pivot_tol = 1e-11;
  // 0 picks a cap from the tableau size.
  std::size_t max_iterations = 0;
};

struct LpResult {
  bool feasible = false;
  std::vector<double> point;  // original variables, clamped into their bounds
  double objective = 0.0;
  std::size_t iterations = 0;
};

// Throws InvalidArgument on malformed input and SolverStall when the
// iteration cap is hit.
LpResult lp_solve(const LpProblem& problem, const LpOptions& options = {});

inline LpResult lp_feasible(const LpProblem& problem, const LpOptions& options = {}) {
  LpProblem copy = problem;
  copy.objective.clear();
  return lp_solve(copy, options);
}

// Largest violation of bounds and constraints at `x` (0 when feasible).
double max_violation(const LpProblem& problem, const std::vector<double>& x);

}  // namespace rwacert::lp
