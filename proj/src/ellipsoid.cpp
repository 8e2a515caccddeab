#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "uavbf/convex_core.hpp"
#include "uavbf/error.hpp"

namespace uavbf {

EllipsoidResult ellipsoid_optimize(const SubgradientOracle& oracle, const Eigen::VectorXd& x0, double r0,
                                   const Eigen::VectorXd& lower_bounds, double tol_obj, int max_iters) {
  const Eigen::Index n = x0.size();
  if (n == 0) throw Error(ErrorKind::InvalidParameter, "ellipsoid method needs at least one variable");
  if (lower_bounds.size() != n) throw Error(ErrorKind::InvalidParameter, "lower bounds have wrong length");
  if (!(r0 > 0.0)) throw Error(ErrorKind::InvalidParameter, "initial radius must be > 0");

  EllipsoidResult res;
  res.best_value = std::numeric_limits<double>::infinity();
  res.lower_bound = -std::numeric_limits<double>::infinity();
  res.best_x = x0;

  Eigen::VectorXd x = x0;
  Eigen::MatrixXd shape = Eigen::MatrixXd::Identity(n, n) * (r0 * r0);
  const double dn = static_cast<double>(n);

  for (int it = 0; it < max_iters; ++it) {
    res.iterations = it + 1;
    Eigen::VectorXd g;

    // Feasibility cut on the most violated floor.
    Eigen::Index violated = -1;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = lower_bounds(i) - x(i);
      if (v > worst) {
        worst = v;
        violated = i;
      }
    }
    bool objective_cut = violated < 0;
    if (!objective_cut) {
      g = Eigen::VectorXd::Zero(n);
      g(violated) = -1.0;
    } else {
      OracleResult o = oracle(x);
      g = std::move(o.subgradient);
      res.value_history.push_back(o.value);
      res.subgradient_norm_history.push_back(g.norm());
      if (o.value < res.best_value) {
        res.best_value = o.value;
        res.best_x = x;
      }
    }

    const double gpg = g.dot(shape * g);
    if (objective_cut) {
      const double radius = std::sqrt(std::max(0.0, gpg));
      res.lower_bound = std::max(res.lower_bound, res.value_history.back() - radius);
      if (res.best_value - res.lower_bound <= tol_obj * std::max(1.0, std::abs(res.best_value))) {
        res.converged = true;
        return res;
      }
    }
    if (!(gpg > 0.0)) {
      // Zero subgradient: the current center is optimal.
      if (objective_cut) {
        res.lower_bound = res.best_value;
        res.converged = true;
      }
      return res;
    }

    const Eigen::VectorXd gt = shape * g / std::sqrt(gpg);
    if (n == 1) {
      x -= 0.5 * gt;
      shape *= 0.25;
    } else {
      x -= gt / (dn + 1.0);
      shape = (dn * dn / (dn * dn - 1.0)) * (shape - (2.0 / (dn + 1.0)) * gt * gt.transpose());
      shape = 0.5 * (shape + shape.transpose()).eval();
    }
  }
  return res;
}

Bracket bisect(const std::function<bool(double)>& predicate, double lo, double hi, double tol) {
  if (!(lo < hi)) throw Error(ErrorKind::InvalidParameter, "bisection needs lo < hi");
  if (!(tol > 0.0)) throw Error(ErrorKind::InvalidParameter, "bisection tolerance must be > 0");
  const bool at_lo = predicate(lo);
  if (predicate(hi) == at_lo) throw Error(ErrorKind::NoSignChange, "predicate has the same value at both ends");
  Bracket b{lo, hi};
  while (b.hi - b.lo > 2.0 * tol) {
    const double mid = 0.5 * (b.lo + b.hi);
    if (predicate(mid) == at_lo) {
      b.lo = mid;
    } else {
      b.hi = mid;
    }
  }
  return b;
}

int bisect_largest(const std::function<bool(int)>& feasible, int lo, int hi) {
  if (lo > hi) throw Error(ErrorKind::InvalidParameter, "bisection needs lo <= hi");
  if (!feasible(lo)) throw Error(ErrorKind::NoSignChange, "lower end is not feasible");
  if (feasible(hi)) return hi;
  // Invariant: feasible(lo) holds, feasible(hi) fails.
  while (hi - lo > 1) {
    const int mid = lo + (hi - lo) / 2;
    if (feasible(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

}  // namespace uavbf
