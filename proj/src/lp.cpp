#include "rwacert/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rwacert/error.hpp"

namespace rwacert::lp {

std::size_t LpProblem::add_variable(double lo, double hi) {
  lower.push_back(lo);
  upper.push_back(hi);
  for (auto& c : constraints) c.coeffs.push_back(0.0);
  if (!objective.empty()) objective.push_back(0.0);
  return lower.size() - 1;
}

void LpProblem::add(std::vector<double> coeffs, Relation rel, double rhs) {
  require(coeffs.size() == num_vars(), ErrorKind::DimensionMismatch, "constraint arity != variable count");
  constraints.push_back({std::move(coeffs), rel, rhs});
}

double max_violation(const LpProblem& p, const std::vector<double>& x) {
  double worst = 0.0;
  for (std::size_t j = 0; j < p.num_vars(); ++j) {
    worst = std::max({worst, p.lower[j] - x[j], x[j] - p.upper[j]});
  }
  for (const auto& c : p.constraints) {
    double lhs = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) lhs += c.coeffs[j] * x[j];
    switch (c.rel) {
      case Relation::Le: worst = std::max(worst, lhs - c.rhs); break;
      case Relation::Ge: worst = std::max(worst, c.rhs - lhs); break;
      case Relation::Eq: worst = std::max(worst, std::abs(lhs - c.rhs)); break;
    }
  }
  return worst;
}

namespace {

// Dense tableau: rows 0..m-1 are constraints, row m holds reduced costs.
// Column `cols` is the right-hand side.
class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols) : m_(rows), n_(cols), t_((rows + 1) * (cols + 1), 0.0), basis_(rows) {}

  double& at(std::size_t i, std::size_t j) { return t_[i * (n_ + 1) + j]; }
  double at(std::size_t i, std::size_t j) const { return t_[i * (n_ + 1) + j]; }
  double& rhs(std::size_t i) { return at(i, n_); }
  double rhs(std::size_t i) const { return at(i, n_); }
  std::size_t rows() const { return m_; }
  std::size_t cols() const { return n_; }
  std::vector<std::size_t>& basis() { return basis_; }

  void pivot(std::size_t r, std::size_t c) {
    const double inv = 1.0 / at(r, c);
    for (std::size_t j = 0; j <= n_; ++j) at(r, j) *= inv;
    at(r, c) = 1.0;
    for (std::size_t i = 0; i <= m_; ++i) {
      if (i == r) continue;
      const double f = at(i, c);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j <= n_; ++j) at(i, j) -= f * at(r, j);
      at(i, c) = 0.0;
    }
    basis_[r] = c;
  }

  // Loads cost vector c into the objective row, priced out against the basis.
  void set_costs(const std::vector<double>& c) {
    for (std::size_t j = 0; j <= n_; ++j) at(m_, j) = j < n_ ? c[j] : 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      const double cb = c[basis_[i]];
      if (cb == 0.0) continue;
      for (std::size_t j = 0; j <= n_; ++j) at(m_, j) -= cb * at(i, j);
    }
  }

  // Objective value of the current basic solution (row m holds -z in the rhs).
  double objective() const { return -rhs(m_); }

  // Minimizes with Bland's rule over columns [0, allowed). Returns iterations.
  std::size_t minimize(std::size_t allowed, const LpOptions& opt, std::size_t cap, std::size_t used) {
    std::size_t iters = 0;
    for (;;) {
      std::size_t enter = allowed;
      for (std::size_t j = 0; j < allowed; ++j) {
        if (at(m_, j) < -opt.feasibility_tol) {
          enter = j;
          break;
        }
      }
      if (enter == allowed) return iters;

      std::size_t leave = m_;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m_; ++i) {
        const double a = at(i, enter);
        if (a <= opt.pivot_tol) continue;
        const double ratio = std::max(rhs(i), 0.0) / a;
        if (leave == m_) {
          best = ratio;
          leave = i;
          continue;
        }
        const double slack = 1e-12 * std::max(1.0, best);
        if (ratio < best - slack || (ratio <= best + slack && basis_[i] < basis_[leave])) {
          best = std::min(best, ratio);
          leave = i;
        }
      }
      // Every variable is bounded, so an unbounded ray means round-off; stop.
      if (leave == m_) return iters;
      pivot(leave, enter);
      ++iters;
      if (used + iters > cap) {
        fail(ErrorKind::SolverStall, "simplex iteration cap " + std::to_string(cap) + " exceeded (" +
                                         std::to_string(m_) + " rows, " + std::to_string(n_) + " columns)");
      }
    }
  }

 private:
  std::size_t m_, n_;
  std::vector<double> t_;
  std::vector<std::size_t> basis_;
};

struct Row {
  std::vector<double> a;  // over shifted free variables
  Relation rel;
  double b;
};

}  // namespace

LpResult lp_solve(const LpProblem& p, const LpOptions& opt) {
  const std::size_t n = p.num_vars();
  require(p.upper.size() == n, ErrorKind::DimensionMismatch, "lower/upper length mismatch");
  require(p.objective.empty() || p.objective.size() == n, ErrorKind::DimensionMismatch,
          "objective length != variable count");
  for (std::size_t j = 0; j < n; ++j) {
    require(std::isfinite(p.lower[j]) && std::isfinite(p.upper[j]), ErrorKind::InvalidArgument,
            "LP variables must have finite bounds");
  }
  LpResult result;
  for (std::size_t j = 0; j < n; ++j) {
    if (p.lower[j] > p.upper[j] + opt.feasibility_tol) return result;
  }

  // Shift x = lower + y and drop fixed variables.
  std::vector<std::size_t> free_idx;
  std::vector<std::size_t> col_of(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    if (p.upper[j] - p.lower[j] > 0.0) {
      col_of[j] = free_idx.size();
      free_idx.push_back(j);
    }
  }
  const std::size_t nf = free_idx.size();

  std::vector<Row> rows;
  rows.reserve(p.constraints.size() + nf);
  for (const auto& c : p.constraints) {
    require(c.coeffs.size() == n, ErrorKind::DimensionMismatch, "constraint arity != variable count");
    Row r{std::vector<double>(nf, 0.0), c.rel, c.rhs};
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) {
      require(std::isfinite(c.coeffs[j]), ErrorKind::InvalidArgument, "non-finite constraint coefficient");
      r.b -= c.coeffs[j] * p.lower[j];
      if (col_of[j] < n && c.coeffs[j] != 0.0) {
        r.a[col_of[j]] = c.coeffs[j];
        any = true;
      }
    }
    require(std::isfinite(r.b), ErrorKind::InvalidArgument, "non-finite constraint rhs");
    if (!any) {
      // Constant row: check it directly.
      const double scale = opt.feasibility_tol * std::max(1.0, std::abs(c.rhs));
      bool ok = (c.rel == Relation::Le && r.b >= -scale) || (c.rel == Relation::Ge && r.b <= scale) ||
                (c.rel == Relation::Eq && std::abs(r.b) <= scale);
      if (!ok) return result;
      continue;
    }
    rows.push_back(std::move(r));
  }
  for (std::size_t k = 0; k < nf; ++k) {
    Row r{std::vector<double>(nf, 0.0), Relation::Le, p.upper[free_idx[k]] - p.lower[free_idx[k]]};
    r.a[k] = 1.0;
    rows.push_back(std::move(r));
  }
  for (auto& r : rows) {
    if (r.b < 0.0) {
      for (double& v : r.a) v = -v;
      r.b = -r.b;
      if (r.rel == Relation::Le) r.rel = Relation::Ge;
      else if (r.rel == Relation::Ge) r.rel = Relation::Le;
    }
  }

  const std::size_t m = rows.size();
  std::size_t n_slack = 0, n_art = 0;
  for (const auto& r : rows) {
    if (r.rel != Relation::Eq) ++n_slack;
    if (r.rel != Relation::Le) ++n_art;
  }
  const std::size_t art_begin = nf + n_slack;
  const std::size_t total = art_begin + n_art;
  Tableau T(m, total);
  {
    std::size_t s = nf, a = art_begin;
    for (std::size_t i = 0; i < m; ++i) {
      const Row& r = rows[i];
      for (std::size_t j = 0; j < nf; ++j) T.at(i, j) = r.a[j];
      T.rhs(i) = r.b;
      switch (r.rel) {
        case Relation::Le:
          T.at(i, s) = 1.0;
          T.basis()[i] = s++;
          break;
        case Relation::Ge:
          T.at(i, s++) = -1.0;
          T.at(i, a) = 1.0;
          T.basis()[i] = a++;
          break;
        case Relation::Eq:
          T.at(i, a) = 1.0;
          T.basis()[i] = a++;
          break;
      }
    }
  }

  const std::size_t cap = opt.max_iterations ? opt.max_iterations : 50 * (m + total) + 1000;
  double bscale = 1.0;
  for (const auto& r : rows) bscale = std::max(bscale, r.b);

  if (n_art > 0) {
    std::vector<double> c1(total, 0.0);
    for (std::size_t j = art_begin; j < total; ++j) c1[j] = 1.0;
    T.set_costs(c1);
    result.iterations += T.minimize(total, opt, cap, 0);
    if (T.objective() > opt.feasibility_tol * bscale) {
      result.feasible = false;
      return result;
    }
    // Drive remaining (zero-valued) artificials out of the basis.
    for (std::size_t i = 0; i < m; ++i) {
      if (T.basis()[i] < art_begin) continue;
      std::size_t best = art_begin;
      double mag = opt.pivot_tol;
      for (std::size_t j = 0; j < art_begin; ++j) {
        if (std::abs(T.at(i, j)) > mag) {
          mag = std::abs(T.at(i, j));
          best = j;
        }
      }
      if (best < art_begin) T.pivot(i, best);
    }
  }

  if (!p.objective.empty()) {
    std::vector<double> c2(total, 0.0);
    for (std::size_t k = 0; k < nf; ++k) c2[k] = p.objective[free_idx[k]];
    T.set_costs(c2);
    result.iterations += T.minimize(art_begin, opt, cap, result.iterations);
  }

  std::vector<double> y(total, 0.0);
  for (std::size_t i = 0; i < m; ++i) y[T.basis()[i]] = std::max(T.rhs(i), 0.0);
  result.point.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    double v = p.lower[j] + (col_of[j] < n ? y[col_of[j]] : 0.0);
    result.point[j] = std::clamp(v, p.lower[j], std::max(p.lower[j], p.upper[j]));
  }
  result.feasible = true;
  if (!p.objective.empty()) {
    for (std::size_t j = 0; j < n; ++j) result.objective += p.objective[j] * result.point[j];
  }
  return result;
}

}  // namespace rwacert::lp
