#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "uavbf/convex_core.hpp"
#include "uavbf/error.hpp"

namespace uavbf {

namespace {

constexpr double kPivotEps = 1e-11;

// Dense tableau for: maximize cost' x  s.t.  A x = b (b >= 0), x >= 0.
// `cost` holds the reduced costs; its last entry is minus the objective value.
struct Tableau {
  Eigen::MatrixXd a;            // rows x (cols + 1), last column is the rhs
  Eigen::VectorXd cost;         // cols + 1
  std::vector<int> basis;       // basic column per row

  int rows() const { return static_cast<int>(a.rows()); }
  int cols() const { return static_cast<int>(a.cols()) - 1; }

  void pivot(int r, int c) {
    a.row(r) /= a(r, c);
    for (int i = 0; i < rows(); ++i) {
      if (i != r && a(i, c) != 0.0) a.row(i) -= a(i, c) * a.row(r);
    }
    if (cost(c) != 0.0) cost -= cost(c) * a.row(r).transpose();
    basis[r] = c;
  }

  void price_out(const Eigen::VectorXd& c_full) {
    cost = c_full;
    for (int i = 0; i < rows(); ++i) {
      const double cb = c_full(basis[i]);
      if (cb != 0.0) cost -= cb * a.row(i).transpose();
    }
  }
};

enum class SimplexOutcome { Optimal, Unbounded, IterationLimit };

// Bland's rule: lowest-index improving column, lowest-index basic variable on ratio ties.
SimplexOutcome run_simplex(Tableau& t, int usable_cols, int& pivots_left) {
  while (true) {
    int enter = -1;
    for (int j = 0; j < usable_cols; ++j) {
      if (t.cost(j) > kPivotEps) {
        enter = j;
        break;
      }
    }
    if (enter < 0) return SimplexOutcome::Optimal;
    if (pivots_left-- <= 0) return SimplexOutcome::IterationLimit;

    int leave = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (int i = 0; i < t.rows(); ++i) {
      const double coef = t.a(i, enter);
      if (coef <= kPivotEps) continue;
      const double ratio = t.a(i, t.cols()) / coef;
      if (ratio < best_ratio - 1e-12 ||
          (std::abs(ratio - best_ratio) <= 1e-12 && leave >= 0 && t.basis[i] < t.basis[leave])) {
        best_ratio = ratio;
        leave = i;
      }
    }
    if (leave < 0) return SimplexOutcome::Unbounded;
    t.pivot(leave, enter);
  }
}

}  // namespace

LpResult solve_lp(const LinearProgram& lp, const SolveConfig& cfg) {
  const int n = static_cast<int>(lp.objective.size());
  const int m = static_cast<int>(lp.rows.size());
  std::vector<double> lower = lp.lower.empty() ? std::vector<double>(n, 0.0) : lp.lower;
  if (static_cast<int>(lower.size()) != n) throw Error(ErrorKind::InvalidParameter, "LP lower bounds have wrong length");
  for (const auto& row : lp.rows) {
    if (static_cast<int>(row.coeffs.size()) != n) throw Error(ErrorKind::InvalidParameter, "LP row has wrong length");
    for (double v : row.coeffs) {
      if (!std::isfinite(v)) throw Error(ErrorKind::InvalidParameter, "LP coefficients must be finite");
    }
  }

  // Shift x = lower + y and orient rows so every rhs is nonnegative.
  std::vector<double> rhs(m);
  std::vector<bool> flipped(m, false);
  int n_art = 0;
  for (int i = 0; i < m; ++i) {
    double b = lp.rows[i].rhs;
    for (int j = 0; j < n; ++j) b -= lp.rows[i].coeffs[j] * lower[j];
    rhs[i] = b;
    if (b < 0.0) {
      flipped[i] = true;
      ++n_art;
    }
  }

  // Columns: y (n), slack/surplus (m), artificials (n_art).
  const int cols = n + m + n_art;
  Tableau t;
  t.a = Eigen::MatrixXd::Zero(m, cols + 1);
  t.basis.assign(m, -1);
  int art = n + m;
  for (int i = 0; i < m; ++i) {
    const double sign = flipped[i] ? -1.0 : 1.0;
    for (int j = 0; j < n; ++j) t.a(i, j) = sign * lp.rows[i].coeffs[j];
    t.a(i, n + i) = sign;  // slack (+1) or surplus (-1 after the flip)
    t.a(i, cols) = sign * rhs[i];
    if (flipped[i]) {
      t.a(i, art) = 1.0;
      t.basis[i] = art++;
    } else {
      t.basis[i] = n + i;
    }
  }

  int pivots_left = cfg.max_iters;
  LpResult result;

  if (n_art > 0) {
    Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(cols + 1);
    for (int j = n + m; j < cols; ++j) phase1(j) = -1.0;
    t.price_out(phase1);
    const auto outcome = run_simplex(t, cols, pivots_left);
    if (outcome == SimplexOutcome::IterationLimit) {
      result.status = LpStatus::IterationLimit;
      return result;
    }
    const double infeasibility = t.cost(cols);  // equals +sum of artificials at optimum
    if (infeasibility > cfg.tol_feas * (1.0 + t.a.col(cols).cwiseAbs().maxCoeff())) {
      result.status = LpStatus::Infeasible;
      return result;
    }
    // Drive remaining artificials out of the basis.
    for (int i = 0; i < m; ++i) {
      if (t.basis[i] < n + m) continue;
      for (int j = 0; j < n + m; ++j) {
        if (std::abs(t.a(i, j)) > 1e-9) {
          t.pivot(i, j);
          break;
        }
      }
    }
  }

  Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(cols + 1);
  for (int j = 0; j < n; ++j) phase2(j) = lp.objective[j];
  // Artificials still basic sit at zero on redundant rows; they are excluded from entering.
  t.price_out(phase2);
  const auto outcome = run_simplex(t, n + m, pivots_left);
  if (outcome == SimplexOutcome::IterationLimit) {
    result.status = LpStatus::IterationLimit;
    return result;
  }
  if (outcome == SimplexOutcome::Unbounded) {
    result.status = LpStatus::Unbounded;
    return result;
  }

  result.status = LpStatus::Optimal;
  result.x = lower;
  for (int i = 0; i < m; ++i) {
    if (t.basis[i] < n) result.x[t.basis[i]] += std::max(0.0, t.a(i, cols));
  }
  result.objective = 0.0;
  for (int j = 0; j < n; ++j) result.objective += lp.objective[j] * result.x[j];
  return result;
}

}  // namespace uavbf
