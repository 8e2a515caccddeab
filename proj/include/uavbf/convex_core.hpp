#pragma once

// Small self-contained solvers shared by the planners: a dense simplex for the
// time-sharing LPs, a log-barrier Newton method for the convexified SCA
// subproblems, a central-cut ellipsoid method for the Lagrange duals, and
// monotone bisection helpers.

#include <functional>
#include <vector>

#include <Eigen/Core>

namespace uavbf {

struct SolveConfig {
  double tol_obj = 1e-6;      // relative objective tolerance (barrier gap, ellipsoid bound)
  double tol_feas = 1e-8;     // constraint tolerance
  int max_iters = 2000;       // Newton steps per barrier solve, pivots per LP
  double grid_step_m = 1.0;   // resolution of the 2D location search
  double dual_floor = 1e-8;   // lower bound on every dual variable
  double dual_tol = 1e-10;    // relative ellipsoid tolerance for the relaxed duals
  int dual_iters_per_dim2 = 500;
  double tie_tol = 1e-6;      // grid maximizers within this of the best are ties
  double duality_gap_tol = 1e-2;
  double kappa_tol = 1e-3;          // "slightly above zero" outage for budget scaling
  double kappa_bisect_tol = 1e-4;
  double sca_tol = 1e-4;
  int sca_max_rounds = 50;
  int slots = 128;
  int tsp_exhaustive_limit = 8;

  /// Throws Error(InvalidParameter) when a field is out of range.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Linear programming

/// maximize c'x  s.t.  row.coeffs' x <= row.rhs,  x >= lower.
struct LinearProgram {
  struct Row {
    std::vector<double> coeffs;
    double rhs = 0.0;
  };
  std::vector<double> objective;
  std::vector<Row> rows;
  std::vector<double> lower;  // empty means all zeros
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  std::vector<double> x;
  double objective = 0.0;
};

/// Two-phase tableau simplex with Bland's rule.
LpResult solve_lp(const LinearProgram& lp, const SolveConfig& cfg);

// ---------------------------------------------------------------------------
// Smooth concave programs

/// Local evaluation of one term on its support. When `order` is 0 only
/// `value` is required.
struct TermEval {
  int order = 2;
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

/// A function of the variables listed in `support`. `eval` receives the values
/// of those variables (in support order) and returns false outside its domain.
struct SmoothTerm {
  std::vector<int> support;
  std::function<bool(const Eigen::VectorXd& local, TermEval& out)> eval;
};

/// maximize sum(objective)  s.t.  every constraint term >= 0,  lower <= x <= upper.
/// Objective terms must be concave, constraint terms concave.
struct SmoothProgram {
  int dim = 0;
  std::vector<SmoothTerm> objective;
  std::vector<SmoothTerm> constraints;
  std::vector<double> lower;  // -inf allowed; empty means unbounded
  std::vector<double> upper;  // +inf allowed; empty means unbounded
};

enum class SmoothStatus { Converged, IterationLimit };

struct SmoothResult {
  Eigen::VectorXd x;
  double objective = 0.0;
  SmoothStatus status = SmoothStatus::Converged;
  int newton_steps = 0;
  double barrier_t = 0.0;
  std::vector<double> multipliers;  // estimates 1/(t g_i) for each constraint
};

/// Log-barrier path following with damped Newton centering. `x0` must be
/// strictly feasible; throws Error(NoStrictlyFeasibleStart) otherwise.
SmoothResult maximize_smooth(const SmoothProgram& prog, const Eigen::VectorXd& x0, const SolveConfig& cfg);

struct FeasibilityResult {
  bool strictly_feasible = false;
  Eigen::VectorXd x;
  double min_slack = 0.0;  // smallest constraint value at x
};

/// Feasibility phase: maximizes the minimum constraint slack starting from
/// `guess` (clamped into the box) and stops once every constraint is positive.
FeasibilityResult find_strictly_feasible(const SmoothProgram& prog, const Eigen::VectorXd& guess,
                                         const SolveConfig& cfg);

/// maximize_smooth, running the feasibility phase first when `guess` is not
/// strictly feasible. Throws Error(NoStrictlyFeasibleStart) when none exists.
SmoothResult maximize_smooth_from(const SmoothProgram& prog, const Eigen::VectorXd& guess, const SolveConfig& cfg);

/// Sum of objective terms at x, or -inf outside the domain.
double evaluate_objective(const SmoothProgram& prog, const Eigen::VectorXd& x);
/// Smallest constraint value at x (+inf when there are none).
double min_constraint(const SmoothProgram& prog, const Eigen::VectorXd& x);

// ---------------------------------------------------------------------------
// Ellipsoid method

struct OracleResult {
  double value = 0.0;
  Eigen::VectorXd subgradient;
};

/// Convex objective oracle; only called at points satisfying the lower bounds.
using SubgradientOracle = std::function<OracleResult(const Eigen::VectorXd&)>;

struct EllipsoidResult {
  Eigen::VectorXd best_x;
  double best_value = 0.0;
  double lower_bound = 0.0;  // certified lower bound on the minimum
  int iterations = 0;
  bool converged = false;    // false means the iteration cap was hit
  std::vector<double> value_history;           // objective at each oracle call
  std::vector<double> subgradient_norm_history;
};

/// Central-cut ellipsoid minimization over {x >= lower_bounds}, starting from
/// the ball of radius r0 around x0. Stops when best_value - lower_bound <=
/// tol_obj * max(1, |best_value|) or after `max_iters` cuts.
EllipsoidResult ellipsoid_optimize(const SubgradientOracle& oracle, const Eigen::VectorXd& x0, double r0,
                                   const Eigen::VectorXd& lower_bounds, double tol_obj, int max_iters);

// ---------------------------------------------------------------------------
// Bisection

struct Bracket {
  double lo = 0.0;
  double hi = 0.0;
  double threshold() const { return 0.5 * (lo + hi); }
};

/// Shrinks [lo, hi] around the point where a monotone predicate switches
/// value, until hi - lo <= 2 tol. Throws Error(NoSignChange) when the
/// predicate agrees at both ends.
Bracket bisect(const std::function<bool(double)>& predicate, double lo, double hi, double tol);

/// Largest n in [lo, hi] with feasible(n), assuming feasible is nonincreasing
/// in n and feasible(lo) holds. Throws Error(NoSignChange) if feasible(lo) fails.
int bisect_largest(const std::function<bool(int)>& feasible, int lo, int hi);

}  // namespace uavbf
