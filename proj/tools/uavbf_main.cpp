#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "uavbf/bench.hpp"

namespace {

using uavbf::PlanMode;
using uavbf::bench::Solver;

const std::map<std::string, PlanMode> kModes = {{"rate", PlanMode::Rate}, {"outage", PlanMode::Outage}};
const std::map<std::string, Solver> kSolvers = {
    {"relaxed", Solver::Relaxed},    {"sca", Solver::Sca},
    {"init-fhf", Solver::InitFhf},   {"init-shf", Solver::InitShf},
    {"init-direct", Solver::InitDirect}, {"traj-only", Solver::TrajOnly},
};
const std::map<std::string, uavbf::bench::SweepParam> kParams = {
    {"horizon", uavbf::bench::SweepParam::Horizon}, {"pavg", uavbf::bench::SweepParam::PAvg}};

struct Common {
  PlanMode mode = PlanMode::Rate;
  std::string scenario;
  std::string out;
  uavbf::bench::ConfigOverrides overrides;
  double grid_step = 0.0;
  int slots = 0;
  double tol = 0.0;
  int max_rounds = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--mode", c.mode, "Objective: rate or outage")
      ->required()
      ->transform(CLI::CheckedTransformer(kModes, CLI::ignore_case));
  cmd->add_option("--scenario", c.scenario, "Scenario JSON file")->required();
  cmd->add_option("--out", c.out, "Output directory")->required();
  cmd->add_option("--grid-step", c.grid_step, "Location grid step in meters");
  cmd->add_option("--slots", c.slots, "Number of time slots");
  cmd->add_option("--tol", c.tol, "Relative SCA stopping tolerance");
  cmd->add_option("--max-rounds", c.max_rounds, "SCA round limit");
}

uavbf::bench::ConfigOverrides overrides_from(CLI::App* cmd, const Common& c) {
  uavbf::bench::ConfigOverrides o;
  if (cmd->count("--grid-step")) o.grid_step_m = c.grid_step;
  if (cmd->count("--slots")) o.slots = c.slots;
  if (cmd->count("--tol")) o.tol = c.tol;
  if (cmd->count("--max-rounds")) o.max_rounds = c.max_rounds;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UAV data-collection planner for coherent sensor beamforming"};
  app.require_subcommand(1);

  Common plan_opts;
  Solver plan_solver = Solver::Relaxed;
  auto* plan = app.add_subcommand("plan", "Solve one scenario and write plan, metrics and manifest files");
  add_common(plan, plan_opts);
  plan->add_option("--solver", plan_solver, "relaxed, sca, init-fhf, init-shf, init-direct or traj-only")
      ->required()
      ->transform(CLI::CheckedTransformer(kSolvers, CLI::ignore_case));

  Common sweep_opts;
  uavbf::bench::SweepParam param = uavbf::bench::SweepParam::Horizon;
  std::vector<double> values;
  std::vector<Solver> sweep_solvers{Solver::Sca};
  auto* sweep = app.add_subcommand("sweep", "Run solvers over a list of horizons or average powers");
  add_common(sweep, sweep_opts);
  sweep->add_option("--param", param, "horizon (s) or pavg (dBm)")
      ->required()
      ->transform(CLI::CheckedTransformer(kParams, CLI::ignore_case));
  sweep->add_option("--values", values, "Comma-separated parameter values")->required()->delimiter(',');
  sweep->add_option("--solver", sweep_solvers, "Comma-separated solvers; relaxed is always included")
      ->delimiter(',')
      ->transform(CLI::CheckedTransformer(kSolvers, CLI::ignore_case));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : uavbf::bench::kExitConfig;
  }

  if (*plan) {
    uavbf::bench::RunRequest req;
    req.mode = plan_opts.mode;
    req.solver = plan_solver;
    req.scenario = plan_opts.scenario;
    req.out = plan_opts.out;
    req.overrides = overrides_from(plan, plan_opts);
    return uavbf::bench::run(req, std::cerr);
  }

  uavbf::bench::SweepSpec spec;
  spec.param = param;
  spec.values = values;
  spec.scenario = sweep_opts.scenario;
  spec.mode = sweep_opts.mode;
  spec.solvers = sweep_solvers;
  spec.overrides = overrides_from(sweep, sweep_opts);
  return uavbf::bench::run_sweep(spec, sweep_opts.out, std::cerr);
}
