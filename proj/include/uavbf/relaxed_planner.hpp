#pragma once

// Speed-unconstrained planners. Both relaxations decompose per time instant
// once the budget constraints are dualized: the inner power problem has a
// closed form, the location is found by exhaustive grid search, the duals by
// the ellipsoid method, and the primal plan by a time-sharing LP.

#include <cstddef>
#include <string>
#include <vector>

#include "uavbf/convex_core.hpp"
#include "uavbf/model.hpp"

namespace uavbf {

/// Grid nodes over the scenario region with cached normalized gains.
/// Nodes are ordered x-major, then y, at multiples of `step` from (x_lo, y_lo).
class ChannelGrid {
 public:
  ChannelGrid(const Scenario& scn, double step);

  std::size_t size() const { return nx_ * ny_; }
  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t num_sensors() const { return k_; }
  double step() const { return step_; }
  Vec2 node(std::size_t i) const;
  /// Pointer to the K normalized gains beta0 d^-alpha / sigma^2 of node i.
  const double* gains(std::size_t i) const { return gains_.data() + i * k_; }

 private:
  double x_lo_, y_lo_, step_;
  std::size_t nx_, ny_, k_;
  std::vector<double> gains_;
};

struct DualVars {
  std::vector<double> values;
};

struct InnerSolution {
  Vec2 location = Vec2::Zero();
  PowerVector powers;
  double p_total_tilde = 0.0;  // rate mode only
  double inner_value = 0.0;
  double snr = 0.0;
};

struct HoverPoint {
  Vec2 location = Vec2::Zero();
  double duration = 0.0;  // s
  PowerVector powers;
};

struct HoverPlan {
  std::vector<HoverPoint> points;
  double outage_duration = 0.0;  // s, zero in rate mode
  double objective = 0.0;        // avg rate (bps/Hz) or outage probability
};

struct DualSolveReport {
  DualVars dual_point;
  double dual_value = 0.0;
  int iterations = 0;
  std::vector<double> subgradient_norm_history;
  bool converged = false;
};

enum class OutageCase { NonOutageCheaper, Tie, OutageCheaper };

const char* to_string(OutageCase c);

/// Type invariants of a hover plan (duration sum, budgets, SNR floor in
/// outage mode). Returns an empty string when they all hold.
std::string check_hover_plan(const HoverPlan& plan, const Scenario& scn, bool outage_mode, double tol_feas);

// ---------------------------------------------------------------------------
// Rate maximization

InnerSolution rate_inner_power(const DualVars& lambda, const Vec2& q, const Scenario& scn);

/// Grid maximizers of the inner value within tie_tol of the best, merged into
/// clusters of nodes closer than 2 grid steps; one representative per cluster.
std::vector<InnerSolution> rate_location_search(const DualVars& lambda, const Scenario& scn, const SolveConfig& cfg);
std::vector<InnerSolution> rate_location_search(const DualVars& lambda, const ChannelGrid& grid, const Scenario& scn,
                                                const SolveConfig& cfg);

/// g(lambda) = max_q inner value + sum lambda_k P_k^ave.
double rate_dual_function(const DualVars& lambda, const ChannelGrid& grid, const Scenario& scn);

DualSolveReport rate_dual_solve(const Scenario& scn, const SolveConfig& cfg);
DualSolveReport rate_dual_solve(const ChannelGrid& grid, const Scenario& scn, const SolveConfig& cfg);

HoverPlan rate_timeshare(const std::vector<InnerSolution>& candidates, const Scenario& scn, const SolveConfig& cfg);

// ---------------------------------------------------------------------------
// Outage minimization

/// Minimum-cost powers meeting SNR = gamma_min at q. Throws MissingThreshold.
InnerSolution outage_inner_power(const DualVars& mu, const Vec2& q, const Scenario& scn);

struct OutageSearchResult {
  std::vector<InnerSolution> candidates;
  OutageCase flag = OutageCase::OutageCheaper;
  double min_value = 0.0;  // smallest sum mu_k P_k over the grid
};

OutageSearchResult outage_location_search(const DualVars& mu, const Scenario& scn, const SolveConfig& cfg);
OutageSearchResult outage_location_search(const DualVars& mu, const ChannelGrid& grid, const Scenario& scn,
                                          const SolveConfig& cfg);

/// Normalized dual min(1, min_q sum mu_k P_k) - sum mu_k P_k^ave.
double outage_dual_function(const DualVars& mu, const ChannelGrid& grid, const Scenario& scn);

DualSolveReport outage_dual_solve(const Scenario& scn, const SolveConfig& cfg);
DualSolveReport outage_dual_solve(const ChannelGrid& grid, const Scenario& scn, const SolveConfig& cfg);

HoverPlan outage_timeshare(const std::vector<InnerSolution>& candidates, const Scenario& scn, const SolveConfig& cfg);

struct ScaleBisectionResult {
  HoverPlan plan;
  double kappa = 1.0;       // outage side of the final bracket
  bool degenerate = false;  // non-outage held down to the smallest kappa tried
};

/// Shrinks the budgets by kappa until outage just appears, then re-solves the
/// time sharing over those hover points with the original budgets.
ScaleBisectionResult outage_scale_bisection(const Scenario& scn, const SolveConfig& cfg);

// ---------------------------------------------------------------------------

struct RelaxedSolution {
  HoverPlan plan;
  DualSolveReport report;
  std::vector<InnerSolution> candidates;
  OutageCase outage_case = OutageCase::Tie;  // outage mode only
  double kappa = 1.0;
  bool kappa_degenerate = false;
};

RelaxedSolution solve_p11(const Scenario& scn, const SolveConfig& cfg);
RelaxedSolution solve_p21(const Scenario& scn, const SolveConfig& cfg);

}  // namespace uavbf
