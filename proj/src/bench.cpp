#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include "uavbf/bench.hpp"
#include "uavbf/scenario_io.hpp"

namespace uavbf::bench {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kToolVersion = "0.1.0";

const std::vector<std::pair<Solver, const char*>> kSolverNames = {
    {Solver::Relaxed, "relaxed"},       {Solver::Sca, "sca"},
    {Solver::InitFhf, "init-fhf"},      {Solver::InitShf, "init-shf"},
    {Solver::InitDirect, "init-direct"}, {Solver::TrajOnly, "traj-only"},
};

FiniteSolver finite_kind(Solver s) {
  switch (s) {
    case Solver::Sca: return FiniteSolver::Sca;
    case Solver::InitFhf: return FiniteSolver::InitFlyHoverFly;
    case Solver::InitShf: return FiniteSolver::InitSuccessiveHoverFly;
    case Solver::InitDirect: return FiniteSolver::InitDirect;
    case Solver::TrajOnly: return FiniteSolver::TrajOnly;
    case Solver::Relaxed: break;
  }
  throw Error(ErrorKind::InvalidParameter, "relaxed solver has no finite-horizon variant");
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot open scenario file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json_text(const std::string& text, const fs::path& path) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, "malformed scenario file " + path.string() + ": " + e.what());
  }
}

json config_json(const SolveConfig& c) {
  return {{"tol_obj", c.tol_obj},
          {"tol_feas", c.tol_feas},
          {"max_iters", c.max_iters},
          {"grid_step_m", c.grid_step_m},
          {"dual_floor", c.dual_floor},
          {"dual_tol", c.dual_tol},
          {"dual_iters_per_dim2", c.dual_iters_per_dim2},
          {"tie_tol", c.tie_tol},
          {"duality_gap_tol", c.duality_gap_tol},
          {"kappa_tol", c.kappa_tol},
          {"kappa_bisect_tol", c.kappa_bisect_tol},
          {"sca_tol", c.sca_tol},
          {"sca_max_rounds", c.sca_max_rounds},
          {"slots", c.slots},
          {"tsp_exhaustive_limit", c.tsp_exhaustive_limit}};
}

json watts_json(const PowerVector& p) {
  json a = json::array();
  for (double w : p.values()) a.push_back(w);
  return a;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.close();
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
}

void report_error(std::ostream& err, ErrorKind kind, const std::string& message) {
  err << json{{"error", std::string(to_string(kind))}, {"message", message}, {"exit_code", exit_code_for(kind)}}.dump()
      << '\n';
}

struct Emitted {
  std::string plan, metrics, report, trace;
};

Emitted render(const RunResult& res, const Scenario& scn, PlanMode mode, Solver solver, const SolveConfig& cfg) {
  const bool outage = mode == PlanMode::Outage;
  Emitted e;
  std::ostringstream plan, trace;
  json metrics{{"mode", to_string(mode)}, {"solver", to_string(solver)}, {"objective", res.objective}};
  json report{{"mode", to_string(mode)}, {"solver", to_string(solver)}};

  if (res.relaxed) {
    const RelaxedSolution& r = *res.relaxed;
    write_hover_plan_csv(r.plan, scn.num_sensors(), plan);
    write_trace_csv({}, trace);
    metrics["hover_points"] = r.plan.points.size();
    metrics["outage_duration_s"] = r.plan.outage_duration;
    if (outage) {
      metrics["outage_prob"] = r.plan.objective;
    } else {
      metrics["avg_rate"] = r.plan.objective;
    }
    json cands = json::array();
    for (const auto& c : r.candidates) {
      cands.push_back({{"x_m", c.location.x()},
                       {"y_m", c.location.y()},
                       {"powers_w", watts_json(c.powers)},
                       {"inner_value", c.inner_value},
                       {"snr_linear", c.snr}});
    }
    report["dual_point"] = r.report.dual_point.values;
    report["dual_value"] = r.report.dual_value;
    report["dual_iterations"] = r.report.iterations;
    report["dual_converged"] = r.report.converged;
    report["duality_gap"] = std::abs(r.plan.objective - r.report.dual_value);
    report["candidates"] = cands;
    if (outage) {
      report["outage_case"] = to_string(r.outage_case);
      report["kappa"] = r.kappa;
      report["kappa_degenerate"] = r.kappa_degenerate;
    }
    report["plan_check"] = check_hover_plan(r.plan, scn, outage, 1e-6);
  } else {
    const FiniteResult& f = *res.finite;
    write_discrete_plan_csv(f.plan, scn, plan);
    write_trace_csv(f.trace, trace);
    metrics["avg_rate"] = f.metrics.avg_rate;
    if (f.metrics.outage_prob) metrics["outage_prob"] = *f.metrics.outage_prob;
    metrics["slots"] = f.plan.n_slots();
    report["init_kind"] = to_string(f.init_kind);
    report["init_objective"] = f.init_objective;
    report["rounds"] = f.rounds;
    report["converged"] = f.converged;
    if (f.post) {
      report["kept_initialization"] = f.kept_initialization;
      report["served_slots"] = f.post->n_served;
      report["outage_slots"] = f.post->outage_slots;
    }
    report["plan_check"] = check_plan(f.plan, scn, 1e-6);
  }
  report["config"] = config_json(cfg);
  e.plan = plan.str();
  e.trace = trace.str();
  e.metrics = metrics.dump(2) + "\n";
  e.report = report.dump(2) + "\n";
  return e;
}

int worker_count(std::size_t cells) {
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("UAVBF_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) n = static_cast<int>(std::min<long>(v, 256));
  }
  return std::max(1, std::min(n, static_cast<int>(cells)));
}

}  // namespace

const char* to_string(Solver solver) {
  for (const auto& [s, name] : kSolverNames) {
    if (s == solver) return name;
  }
  return "unknown";
}

std::optional<Solver> parse_solver(const std::string& name) {
  for (const auto& [s, n] : kSolverNames) {
    if (name == n) return s;
  }
  return std::nullopt;
}

std::optional<PlanMode> parse_mode(const std::string& name) {
  if (name == "rate") return PlanMode::Rate;
  if (name == "outage") return PlanMode::Outage;
  return std::nullopt;
}

SolveConfig ConfigOverrides::apply(SolveConfig base) const {
  if (grid_step_m) base.grid_step_m = *grid_step_m;
  if (slots) base.slots = *slots;
  if (tol) base.sca_tol = *tol;
  if (max_rounds) base.sca_max_rounds = *max_rounds;
  base.validate();
  return base;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigError:
    case ErrorKind::NonPositiveParameter:
    case ErrorKind::InvalidParameter:
    case ErrorKind::InfeasibleHorizon:
    case ErrorKind::MissingThreshold:
      return kExitConfig;
    case ErrorKind::IoError:
      return kExitIo;
    default:
      return kExitSolver;
  }
}

RunResult solve(const Scenario& scn, PlanMode mode, Solver solver, const SolveConfig& cfg) {
  RunResult res;
  if (solver == Solver::Relaxed) {
    res.relaxed = mode == PlanMode::Rate ? solve_p11(scn, cfg) : solve_p21(scn, cfg);
    res.objective = res.relaxed->plan.objective;
    return res;
  }
  res.finite = solve_finite(scn, mode, finite_kind(solver), cfg);
  res.objective = mode == PlanMode::Rate ? res.finite->metrics.avg_rate : res.finite->metrics.outage_prob.value();
  return res;
}

int run(const RunRequest& req, std::ostream& err) {
  Emitted files;
  json manifest;
  try {
    const SolveConfig cfg = req.overrides.apply();
    const std::string text = read_file(req.scenario);
    const Scenario scn = parse_scenario(parse_json_text(text, req.scenario));
    if (req.mode == PlanMode::Outage && !scn.gamma_min) {
      throw Error(ErrorKind::MissingThreshold, "outage mode needs gamma_min_db in the scenario");
    }
    const RunResult res = solve(scn, req.mode, req.solver, cfg);
    files = render(res, scn, req.mode, req.solver, cfg);
    manifest = {{"tool", "uavbf"},
                {"version", kToolVersion},
                {"command", "plan"},
                {"mode", to_string(req.mode)},
                {"solver", to_string(req.solver)},
                {"scenario_path", req.scenario.string()},
                {"scenario_sha256", sha256_hex(text)},
                {"scenario", scenario_to_json(scn)},
                {"config", config_json(cfg)}};
  } catch (const Error& e) {
    report_error(err, e.kind(), e.what());
    return exit_code_for(e.kind());
  }

  try {
    std::error_code ec;
    fs::create_directories(req.out, ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot create " + req.out.string() + ": " + ec.message());
    const std::vector<std::pair<const char*, const std::string*>> outputs = {
        {"plan.csv", &files.plan}, {"metrics.json", &files.metrics}, {"report.json", &files.report},
        {"trace.csv", &files.trace}};
    json hashes = json::object();
    for (const auto& [name, text] : outputs) {
      write_text(req.out / name, *text);
      hashes[name] = sha256_hex(*text);
    }
    manifest["outputs_sha256"] = hashes;
    write_text(req.out / "manifest.json", manifest.dump(2) + "\n");
  } catch (const Error& e) {
    report_error(err, e.kind(), e.what());
    return exit_code_for(e.kind());
  }
  return kExitOk;
}

const char* to_string(SweepParam param) { return param == SweepParam::Horizon ? "horizon_s" : "p_avg_dbm"; }

std::optional<SweepParam> parse_sweep_param(const std::string& name) {
  if (name == "horizon" || name == "horizon_s") return SweepParam::Horizon;
  if (name == "pavg" || name == "p_avg_dbm") return SweepParam::PAvg;
  return std::nullopt;
}

json sweep_scenario(const json& base, SweepParam param, double value) {
  json doc = base;
  try {
    if (param == SweepParam::Horizon) {
      doc.at("uav")["horizon_s"] = value;
    } else {
      for (auto& s : doc.at("sensors")) s["p_avg_dbm"] = value;
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("scenario cannot be swept: ") + e.what());
  }
  return doc;
}

std::vector<SweepRow> sweep(const SweepSpec& spec) {
  if (spec.values.empty()) throw Error(ErrorKind::InvalidParameter, "sweep needs at least one value");
  const SolveConfig cfg = spec.overrides.apply();
  const json base = parse_json_text(read_file(spec.scenario), spec.scenario);
  parse_scenario(base);

  std::vector<Solver> solvers{Solver::Relaxed};
  for (Solver s : spec.solvers) {
    if (std::find(solvers.begin(), solvers.end(), s) == solvers.end()) solvers.push_back(s);
  }
  std::sort(solvers.begin(), solvers.end());

  std::vector<SweepRow> rows;
  for (double v : spec.values) {
    for (Solver s : solvers) rows.push_back({v, s, false, 0.0, {}});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return a.value != b.value ? a.value < b.value : a.solver < b.solver;
  });

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < rows.size(); i = next++) {
      SweepRow& row = rows[i];
      try {
        const Scenario scn = parse_scenario(sweep_scenario(base, spec.param, row.value));
        row.objective = solve(scn, spec.mode, row.solver, cfg).objective;
        row.ok = true;
      } catch (const Error& e) {
        row.error = std::string(to_string(e.kind()));
      } catch (const std::exception&) {
        row.error = "InternalError";
      }
    }
  };
  const int workers = worker_count(rows.size());
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, SweepParam param, std::ostream& os) {
  os << "param,value,solver,objective,status,error\n";
  for (const auto& r : rows) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", r.value);
    os << to_string(param) << ',' << buf << ',' << to_string(r.solver) << ',';
    if (r.ok) {
      std::snprintf(buf, sizeof buf, "%.17g", r.objective);
      os << buf;
    }
    os << ',' << (r.ok ? "ok" : "failed") << ',' << r.error << '\n';
  }
}

int run_sweep(const SweepSpec& spec, const fs::path& out, std::ostream& err) {
  std::vector<SweepRow> rows;
  json manifest;
  try {
    rows = sweep(spec);
    json solvers = json::array();
    for (Solver s : spec.solvers) solvers.push_back(to_string(s));
    manifest = {{"tool", "uavbf"},
                {"version", kToolVersion},
                {"command", "sweep"},
                {"mode", to_string(spec.mode)},
                {"param", to_string(spec.param)},
                {"values", spec.values},
                {"solvers", solvers},
                {"scenario_path", spec.scenario.string()},
                {"scenario_sha256", sha256_hex(read_file(spec.scenario))},
                {"config", config_json(spec.overrides.apply())}};
  } catch (const Error& e) {
    report_error(err, e.kind(), e.what());
    return exit_code_for(e.kind());
  }
  try {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot create " + out.string() + ": " + ec.message());
    std::ostringstream csv;
    write_sweep_csv(rows, spec.param, csv);
    write_text(out / "sweep.csv", csv.str());
    manifest["outputs_sha256"] = {{"sweep.csv", sha256_hex(csv.str())}};
    write_text(out / "manifest.json", manifest.dump(2) + "\n");
  } catch (const Error& e) {
    report_error(err, e.kind(), e.what());
    return exit_code_for(e.kind());
  }
  return kExitOk;
}

}  // namespace uavbf::bench
