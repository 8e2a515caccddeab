#pragma once

// Experiment harness behind the command-line tool: single planner runs with
// file emission, parameter sweeps, plan CSV round-tripping, and a brute-force
// reference for tiny relaxed instances.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "uavbf/convex_core.hpp"
#include "uavbf/error.hpp"
#include "uavbf/model.hpp"
#include "uavbf/relaxed_planner.hpp"
#include "uavbf/sca_planner.hpp"

namespace uavbf::bench {

enum class Solver { Relaxed, Sca, InitFhf, InitShf, InitDirect, TrajOnly };

const char* to_string(Solver solver);
std::optional<Solver> parse_solver(const std::string& name);
std::optional<PlanMode> parse_mode(const std::string& name);

struct ConfigOverrides {
  std::optional<double> grid_step_m;
  std::optional<int> slots;
  std::optional<double> tol;  // SCA relative stopping tolerance
  std::optional<int> max_rounds;

  /// Applies the overrides to `base` and validates the result.
  SolveConfig apply(SolveConfig base = {}) const;
};

struct RunRequest {
  PlanMode mode = PlanMode::Rate;
  Solver solver = Solver::Relaxed;
  std::filesystem::path scenario;
  std::filesystem::path out;
  ConfigOverrides overrides;
};

/// Outcome of one planner invocation, independent of any files.
struct RunResult {
  double objective = 0.0;  // avg rate (bps/Hz) or outage probability
  std::optional<RelaxedSolution> relaxed;
  std::optional<FiniteResult> finite;
};

/// Solves without touching the filesystem.
RunResult solve(const Scenario& scn, PlanMode mode, Solver solver, const SolveConfig& cfg);

enum ExitCode { kExitOk = 0, kExitConfig = 2, kExitSolver = 3, kExitIo = 4 };

/// Exit code for a library error kind.
int exit_code_for(ErrorKind kind);

/// Runs one planner and writes plan.csv, metrics.json, report.json,
/// trace.csv and manifest.json into req.out. Nothing is written unless the
/// solve succeeds. Errors are reported on `err` as one JSON object.
int run(const RunRequest& req, std::ostream& err);

enum class SweepParam { Horizon, PAvg };

const char* to_string(SweepParam param);
std::optional<SweepParam> parse_sweep_param(const std::string& name);

struct SweepSpec {
  SweepParam param = SweepParam::Horizon;
  std::vector<double> values;
  std::filesystem::path scenario;
  PlanMode mode = PlanMode::Rate;
  std::vector<Solver> solvers;  // the relaxed reference is always added
  ConfigOverrides overrides;
};

struct SweepRow {
  double value = 0.0;
  Solver solver = Solver::Relaxed;
  bool ok = false;
  double objective = 0.0;
  std::string error;  // error kind when !ok
};

/// Scenario document with the swept parameter replaced (horizon in seconds,
/// or every sensor's average power in dBm).
nlohmann::json sweep_scenario(const nlohmann::json& base, SweepParam param, double value);

/// Runs every (value, solver) cell on a pool of UAVBF_WORKERS threads. Rows
/// come back sorted by value, then solver, whatever the completion order.
std::vector<SweepRow> sweep(const SweepSpec& spec);
void write_sweep_csv(const std::vector<SweepRow>& rows, SweepParam param, std::ostream& os);
/// sweep() plus sweep.csv and manifest.json under `out`.
int run_sweep(const SweepSpec& spec, const std::filesystem::path& out, std::ostream& err);

// ---------------------------------------------------------------------------
// Plan files

void write_hover_plan_csv(const HoverPlan& plan, std::size_t num_sensors, std::ostream& os);
HoverPlan read_hover_plan_csv(std::istream& is, std::size_t num_sensors);
/// Time-averaged rate, or outage_duration / T in outage mode.
double hover_plan_objective(const HoverPlan& plan, const Scenario& scn, bool outage_mode);

void write_discrete_plan_csv(const DiscretePlan& plan, const Scenario& scn, std::ostream& os);
/// Slot length is taken as T / N of the scenario.
DiscretePlan read_discrete_plan_csv(std::istream& is, const Scenario& scn);

void write_trace_csv(const std::vector<TraceRow>& trace, std::ostream& os);

std::string sha256_hex(const std::string& bytes);

// ---------------------------------------------------------------------------
// Brute-force reference

struct OracleGrid {
  double step_m = 10.0;    // hover candidates on the region lattice
  int power_levels = 5;    // per sensor per point, evenly spaced on [0, power_cap * P^ave]
  double power_cap = 4.0;
  int time_fractions = 10;  // time shares in multiples of T / time_fractions
};

/// Best objective over at most two hover points with discretized powers and
/// time shares that respect the budgets. Rate mode returns the largest rate,
/// outage mode the smallest outage probability. Requires K <= 2 and throws
/// BudgetExceeded beyond 1e6 combinations.
double brute_force_oracle(const Scenario& scn, PlanMode mode, const OracleGrid& grid);

}  // namespace uavbf::bench
