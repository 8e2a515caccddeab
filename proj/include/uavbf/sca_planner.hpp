#pragma once

// Finite-horizon planners on N time slots of length T/N. Waypoints are
// sampled at the end of each slot, so q[N] = q_F. Trajectory and powers are
// improved alternately, each step maximizing a concave lower bound that is
// tight at the current plan.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "uavbf/convex_core.hpp"
#include "uavbf/model.hpp"
#include "uavbf/relaxed_planner.hpp"

namespace uavbf {

enum class PlanMode { Rate, Outage };

const char* to_string(PlanMode mode);

/// Ordered by tie-break priority in select_init.
enum class InitKind { SuccessiveHoverFly, FlyHoverFly, Direct };

const char* to_string(InitKind kind);

struct InitTrajectory {
  InitKind kind = InitKind::Direct;
  double slot_len = 0.0;
  std::vector<Vec2> waypoints;       // q[1..N]
  std::vector<Vec2> hover_points;    // in visit order
  std::vector<double> hover_times;   // s, per hover point
  double fly_time = 0.0;             // s spent moving at v_max
  bool order_exhaustive = true;      // false when the visit order is heuristic
};

/// Per-slot received-amplitude surrogates in physical units:
/// a(n, k) = sqrt(P_k[n] beta0 d_k^-alpha), A(n) = (sum_k a(n, k))^2.
struct ScaAuxiliary {
  Eigen::MatrixXd a;
  Eigen::VectorXd A;
};

/// Tight auxiliaries at the plan (the bounds below are exact there).
ScaAuxiliary auxiliary_at(const DiscretePlan& plan, const Scenario& scn);

/// First-order lower bound on sqrt(P beta0 d_k(q)^-alpha) around q_ref, valid
/// for every q because d^-alpha/2 is convex in ||q - s_k||^2.
double amplitude_lower_bound(const Vec2& q, const Vec2& q_ref, double power, std::size_t k, const Scenario& scn);
/// First-order lower bound on (sum a)^2 around a_ref.
double square_sum_lower_bound(const Eigen::VectorXd& a, const Eigen::VectorXd& a_ref);

/// Grid node maximizing the SNR with every sensor at its average budget.
Vec2 max_snr_location(const Scenario& scn, const SolveConfig& cfg);

InitTrajectory init_fly_hover_fly(const Scenario& scn, const SolveConfig& cfg);
InitTrajectory init_successive_hover_fly(const Scenario& scn, const HoverPlan& hover, const SolveConfig& cfg);
InitTrajectory init_direct(const Scenario& scn, const SolveConfig& cfg);

/// Shortest q_I -> points -> q_F visiting order. Exhaustive up to `limit`
/// points, nearest neighbour plus 2-opt beyond (exhaustive set to false).
std::vector<std::size_t> shortest_visit_order(const Vec2& start, const std::vector<Vec2>& points, const Vec2& end,
                                              std::size_t limit, bool& exhaustive);
double tour_length(const Vec2& start, const std::vector<Vec2>& points, const std::vector<std::size_t>& order,
                   const Vec2& end);

/// (1/N) sum log2(1 + SNR) in rate mode, (1/N) sum min(SNR, gamma) in outage mode.
double surrogate_objective(const DiscretePlan& plan, PlanMode mode, const Scenario& scn);

struct SubproblemResult {
  DiscretePlan plan;
  double before = 0.0;  // surrogate objective at the input plan
  double after = 0.0;   // surrogate objective at the returned plan
  bool accepted = false;
};

/// One trajectory step with the powers held fixed. The returned plan never
/// has a lower surrogate objective than the input.
SubproblemResult traj_subproblem(const DiscretePlan& plan, PlanMode mode, const Scenario& scn, const SolveConfig& cfg);
/// One power step with the waypoints held fixed. Same ascent guarantee.
SubproblemResult power_subproblem(const DiscretePlan& plan, PlanMode mode, const Scenario& scn, const SolveConfig& cfg);

/// Plan with every sensor at its average budget in every slot.
DiscretePlan uniform_power_plan(const std::vector<Vec2>& waypoints, double slot_len, const Scenario& scn);

struct TraceRow {
  int round = 0;
  std::string phase;  // "init", "traj" or "power"
  double objective = 0.0;
};

/// Repeats power steps on fixed waypoints until the relative gain per step
/// drops below sca_tol.
DiscretePlan power_only_design(const std::vector<Vec2>& waypoints, double slot_len, PlanMode mode,
                               const Scenario& scn, const SolveConfig& cfg, std::vector<TraceRow>* trace = nullptr);

struct OutagePostResult {
  std::vector<std::size_t> order;         // slots sorted by SNR, descending
  std::size_t n_served = 0;               // N'
  DiscretePlan plan;                      // final powers, zero on unserved slots
  std::vector<std::size_t> outage_slots;  // ascending slot indices
  double outage_prob = 1.0;               // 1 - N'/N
};

/// Largest served prefix of the SNR ordering for which powers meeting the
/// threshold exist within the budgets.
OutagePostResult outage_postprocess(const DiscretePlan& plan, const Scenario& scn, const SolveConfig& cfg);

/// Whether the first n slots of `order` can all meet gamma_min. On success
/// `powers` receives the per-slot powers (zero elsewhere).
bool served_prefix_feasible(const DiscretePlan& plan, const std::vector<std::size_t>& order, std::size_t n,
                            const Scenario& scn, const SolveConfig& cfg, std::vector<PowerVector>* powers = nullptr);

struct Candidate {
  InitTrajectory init;
  DiscretePlan plan;  // after the power-only design
  double objective = 0.0;  // avg rate, or outage probability after post-processing
};

/// Power-only design on each candidate; the best true objective wins, ties go
/// to the earliest InitKind. Returns the index into `candidates`.
std::size_t select_init(std::vector<Candidate>& candidates, PlanMode mode, const Scenario& scn,
                        const SolveConfig& cfg);

/// The three initial trajectories applicable to the scenario (those whose
/// horizon is too short are skipped).
std::vector<InitTrajectory> initial_trajectories(const Scenario& scn, PlanMode mode, const SolveConfig& cfg,
                                                 const HoverPlan* relaxed = nullptr);

struct ScaResult {
  DiscretePlan plan;
  InitKind init_kind = InitKind::Direct;
  std::vector<TraceRow> trace;
  int rounds = 0;
  bool converged = false;
  double objective = 0.0;  // surrogate objective of `plan`
};

/// Alternating trajectory/power ascent from the best initialization. In
/// outage mode the returned plan is the surrogate solution before post-processing.
ScaResult sca_solve(const Scenario& scn, PlanMode mode, const SolveConfig& cfg);

/// Trajectory-only ascent with every sensor fixed at its average budget.
ScaResult traj_only_solve(const Scenario& scn, PlanMode mode, const SolveConfig& cfg);

enum class FiniteSolver { Sca, InitFlyHoverFly, InitSuccessiveHoverFly, InitDirect, TrajOnly };

const char* to_string(FiniteSolver solver);

struct FiniteResult {
  DiscretePlan plan;  // final plan; in outage mode after post-processing
  TrajectoryMetrics metrics;
  InitKind init_kind = InitKind::Direct;
  std::vector<TraceRow> trace;
  int rounds = 0;
  bool converged = true;
  std::optional<OutagePostResult> post;  // outage mode, power-optimizing solvers
  double init_objective = 0.0;           // avg rate or outage of the selected initialization
  bool kept_initialization = false;      // outage mode: the ascent did not beat its start
};

/// End-to-end finite-horizon planning for one solver variant. Outage-mode
/// results are post-processed; the sca solver never reports a worse outage
/// than its selected initialization.
FiniteResult solve_finite(const Scenario& scn, PlanMode mode, FiniteSolver solver, const SolveConfig& cfg);

}  // namespace uavbf
