#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "uavbf/bench.hpp"
#include "uavbf/relaxed_planner.hpp"
#include "uavbf/sca_planner.hpp"

using namespace uavbf;

namespace {

// Tolerances are fixed here and nowhere else.
constexpr double kDurationTolS = 0.05;
constexpr double kBudgetTolDb = 0.05;
constexpr double kTargetTolDb = 0.5;
constexpr double kRelaxedTimeLimitS = 60.0;
constexpr double kOutageRatioTarget = 0.176;
constexpr double kOutageRatioTol = 0.02;
constexpr double kSnrRelTol = 1e-6;
constexpr double kBudgetIdentityRelTol = 0.01;
constexpr double kGapTol = 1e-2;
constexpr double kScaMonotoneRelTol = 1e-9;
constexpr double kLongHorizonFraction = 0.95;
constexpr double kFullRunLimitS = 600.0;
constexpr double kTaylorTol = 1e-12;
constexpr double kClosedFormRelTol = 1e-9;

struct Check {
  std::vector<std::string> failures;
  std::ostringstream notes;

  void require(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool rel_close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b)); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double avg_power(const HoverPlan& plan, std::size_t k, double horizon) {
  double e = 0.0;
  for (const auto& p : plan.points) e += p.duration * p.powers[k];
  return e / horizon;
}

// Hover points ordered by x so that point 0 sits on sensor 1's side.
std::vector<HoverPoint> by_x(const HoverPlan& plan) {
  std::vector<HoverPoint> pts = plan.points;
  std::sort(pts.begin(), pts.end(), [](const HoverPoint& a, const HoverPoint& b) { return a.location.x() < b.location.x(); });
  return pts;
}

Check rate_example() {
  Check c;
  const Scenario scn = load_scenario(fixtures::scenario_path("pair_d80_rate.json"));
  const auto t0 = std::chrono::steady_clock::now();
  const RelaxedSolution sol = solve_p11(scn, SolveConfig{});
  const double secs = seconds_since(t0);
  c.require(secs <= kRelaxedTimeLimitS, "runtime " + fmt("%.1f s", secs));
  const auto pts = by_x(sol.plan);
  c.require(pts.size() == 2, "expected 2 hover points, got " + std::to_string(pts.size()));
  if (pts.size() != 2) return c;
  for (const auto& p : pts) {
    c.require(std::abs(p.duration - scn.horizon / 2) <= kDurationTolS, "duration " + fmt("%.4f s", p.duration));
  }
  for (std::size_t k = 0; k < 2; ++k) {
    const double dbm = watts_to_dbm(avg_power(sol.plan, k, scn.horizon));
    c.require(std::abs(dbm - 30.0) <= kBudgetTolDb, "average power " + fmt("%.4f dBm", dbm));
  }
  const double near0 = watts_to_dbm(pts[0].powers[0]), far0 = watts_to_dbm(pts[0].powers[1]);
  const double near1 = watts_to_dbm(pts[1].powers[1]), far1 = watts_to_dbm(pts[1].powers[0]);
  c.require(std::abs(near0 - near1) <= kBudgetTolDb && std::abs(far0 - far1) <= kBudgetTolDb, "powers not mirrored");
  c.require(std::abs(pts[0].location.x() + pts[1].location.x()) <= 1e-9 &&
                std::abs(pts[0].location.y() - pts[1].location.y()) <= 1e-9,
            "locations not mirrored");
  c.require(std::abs(near0 - 32.3) <= kTargetTolDb, "near-sensor power " + fmt("%.3f dBm", near0));
  c.require(std::abs(far0 - 25.0) <= kTargetTolDb, "far-sensor power " + fmt("%.3f dBm", far0));
  c.notes << "hover x=" << pts[0].location.x() << "/" << pts[1].location.x() << " m, tau=" << fmt("%.3f", pts[0].duration)
          << "/" << fmt("%.3f", pts[1].duration) << " s, powers " << fmt("%.2f", near0) << "/" << fmt("%.2f", far0)
          << " dBm, " << fmt("%.2f s", secs);
  return c;
}

Check outage_example() {
  Check c;
  const Scenario scn = load_scenario(fixtures::scenario_path("pair_d80_outage.json"));
  const auto t0 = std::chrono::steady_clock::now();
  const RelaxedSolution sol = solve_p21(scn, SolveConfig{});
  const double secs = seconds_since(t0);
  c.require(secs <= kRelaxedTimeLimitS, "runtime " + fmt("%.1f s", secs));
  const double ratio = sol.plan.outage_duration / scn.horizon;
  c.require(std::abs(ratio - kOutageRatioTarget) <= kOutageRatioTol, "outage ratio " + fmt("%.4f", ratio));
  const auto pts = by_x(sol.plan);
  c.require(pts.size() == 2, "expected 2 hover points, got " + std::to_string(pts.size()));
  if (pts.size() != 2) return c;
  c.require(std::abs(pts[0].duration - pts[1].duration) <= kDurationTolS, "durations differ");
  for (const auto& p : pts) {
    const double s = snr(p.location, p.powers, scn);
    c.require(rel_close(s, *scn.gamma_min, kSnrRelTol), "hover SNR " + fmt("%.9g", s));
  }
  const double identity = pts[0].duration * (pts[0].powers[0] + pts[1].powers[0]) / scn.horizon;
  c.require(rel_close(identity, scn.sensors[0].p_avg, kBudgetIdentityRelTol), "budget identity " + fmt("%.5f W", identity));
  const double near = watts_to_dbm(pts[0].powers[0]), far = watts_to_dbm(pts[0].powers[1]);
  c.require(std::abs(near - 33.1) <= kTargetTolDb, "near-sensor power " + fmt("%.3f dBm", near));
  c.require(std::abs(far - 25.8) <= kTargetTolDb, "far-sensor power " + fmt("%.3f dBm", far));
  c.notes << "outage ratio " << fmt("%.4f", ratio) << ", tau=" << fmt("%.3f", pts[0].duration) << "/"
          << fmt("%.3f", pts[1].duration) << " s, powers " << fmt("%.2f", near) << "/" << fmt("%.2f", far) << " dBm, "
          << fmt("%.2f s", secs);
  return c;
}

Check hover_structure() {
  Check c;
  const SolveConfig cfg;
  const RelaxedSolution d80 = solve_p11(load_scenario(fixtures::scenario_path("pair_d80_rate.json")), cfg);
  c.require(d80.plan.points.size() == 2, "D=80 gives " + std::to_string(d80.plan.points.size()) + " points");
  for (const auto& p : d80.plan.points) c.require(p.location.y() == 0.0, "D=80 point off the sensor axis");

  const RelaxedSolution d40 = solve_p11(load_scenario(fixtures::scenario_path("pair_d40_rate.json")), cfg);
  c.require(d40.plan.points.size() == 1, "D=40 gives " + std::to_string(d40.plan.points.size()) + " points");
  if (d40.plan.points.size() == 1) c.require(d40.plan.points[0].location.norm() == 0.0, "D=40 point not at the midpoint");

  const RelaxedSolution field = solve_p11(load_scenario(fixtures::scenario_path("field_rate.json")), cfg);
  c.require(field.plan.points.size() == 3, "field instance gives " + std::to_string(field.plan.points.size()) + " points");
  c.notes << "counts " << d80.plan.points.size() << "/" << d40.plan.points.size() << "/" << field.plan.points.size();
  return c;
}

Check duality_gap() {
  Check c;
  const SolveConfig cfg;
  bench::OracleGrid pair_rate;
  pair_rate.step_m = 20.0;
  pair_rate.power_levels = 4;
  bench::OracleGrid pair_outage = pair_rate;
  pair_outage.power_levels = 3;
  pair_outage.time_fractions = 5;
  bench::OracleGrid fine;
  fine.step_m = 5.0;
  fine.power_levels = 9;
  bench::OracleGrid fine_outage = fine;
  fine_outage.time_fractions = 5;
  bench::OracleGrid axis;
  axis.step_m = 10.0;
  axis.power_levels = 5;

  ScenarioSpec axis_spec;
  axis_spec.sensors = {{{-40.0, 0.0}, 1.0}, {{40.0, 0.0}, 1.0}};
  axis_spec.altitude = 50.0;
  axis_spec.v_max = 40.0;
  axis_spec.horizon = 10.0;
  axis_spec.q_init = {-40.0, 0.0};
  axis_spec.q_final = {40.0, 0.0};
  axis_spec.channel = fixtures::field_channel();
  axis_spec.region = Region{-40.0, 40.0, 0.0, 0.0};

  struct Desk {
    std::string name;
    Scenario scn;
    bench::OracleGrid grid;
  };
  const std::vector<Desk> rate_desks = {
      {"d80", load_scenario(fixtures::scenario_path("pair_d80_rate.json")), pair_rate},
      {"d40", load_scenario(fixtures::scenario_path("pair_d40_rate.json")), pair_rate},
      {"d80-axis", validate_scenario(axis_spec), axis},
      {"single", fixtures::single(10.0), fine},
  };
  const std::vector<Desk> outage_desks = {
      {"d80", load_scenario(fixtures::scenario_path("pair_d80_outage.json")), pair_outage},
      {"d40", load_scenario(fixtures::scenario_path("pair_d40_outage.json")), pair_outage},
      {"single", fixtures::single(10.0, 10.0, 30.0, 15.0), fine_outage},
  };

  double worst_gap = 0.0, worst_excess = -1e300;
  for (const auto& d : rate_desks) {
    const RelaxedSolution s = solve_p11(d.scn, cfg);
    const double gap = std::abs(s.plan.objective - s.report.dual_value);
    worst_gap = std::max(worst_gap, gap);
    c.require(gap <= kGapTol, "rate " + d.name + " gap " + fmt("%.3g", gap));
    const double oracle = bench::brute_force_oracle(d.scn, PlanMode::Rate, d.grid);
    worst_excess = std::max(worst_excess, oracle - s.plan.objective);
    c.require(oracle <= s.plan.objective + kGapTol, "rate " + d.name + " oracle " + fmt("%.6f", oracle));
  }
  for (const auto& d : outage_desks) {
    const RelaxedSolution s = solve_p21(d.scn, cfg);
    const double gap = std::abs(s.plan.objective - s.report.dual_value);
    worst_gap = std::max(worst_gap, gap);
    c.require(gap <= kGapTol, "outage " + d.name + " gap " + fmt("%.3g", gap));
    const double oracle = bench::brute_force_oracle(d.scn, PlanMode::Outage, d.grid);
    worst_excess = std::max(worst_excess, s.plan.objective - oracle);
    c.require(oracle >= s.plan.objective - kGapTol, "outage " + d.name + " oracle " + fmt("%.6f", oracle));
  }
  c.notes << "max gap " << fmt("%.2e", worst_gap) << ", max oracle excess " << fmt("%.2e", worst_excess);
  return c;
}

bool trace_nondecreasing(const std::vector<TraceRow>& trace) {
  bool have = false;
  double prev = 0.0;
  for (const auto& r : trace) {
    if (r.phase == "init") continue;
    if (have && r.objective < prev - kScaMonotoneRelTol * std::max(1.0, std::abs(prev))) return false;
    prev = r.objective;
    have = true;
  }
  return true;
}

Check sca_properties() {
  Check c;
  const SolveConfig cfg;
  const Scenario field = load_scenario(fixtures::scenario_path("field_rate.json"));
  const double bound = solve_p11(field, cfg).plan.objective;

  const auto t0 = std::chrono::steady_clock::now();
  const FiniteResult r20 = solve_finite(field, PlanMode::Rate, FiniteSolver::Sca, cfg);
  const double rate_secs = seconds_since(t0);
  c.require(rate_secs <= kFullRunLimitS, "rate run took " + fmt("%.0f s", rate_secs));
  c.require(trace_nondecreasing(r20.trace), "rate trace decreased");
  c.require(r20.metrics.avg_rate <= bound + kGapTol, "T=20 rate above the bound");
  c.require(r20.metrics.avg_rate >= r20.init_objective - 1e-9, "T=20 rate below its initialization");
  c.require(check_plan(r20.plan, field, 1e-6).empty(), "T=20 plan infeasible");

  std::string long_rates;
  for (double horizon : {100.0, 150.0}) {
    auto doc = bench::sweep_scenario(scenario_to_json(field), bench::SweepParam::Horizon, horizon);
    const Scenario scn = parse_scenario(doc);
    const FiniteResult r = solve_finite(scn, PlanMode::Rate, FiniteSolver::Sca, cfg);
    c.require(trace_nondecreasing(r.trace), "rate trace decreased at T=" + fmt("%.0f", horizon));
    c.require(r.metrics.avg_rate <= bound + kGapTol, "rate above the bound at T=" + fmt("%.0f", horizon));
    c.require(r.metrics.avg_rate >= kLongHorizonFraction * bound,
              "T=" + fmt("%.0f", horizon) + " reaches only " + fmt("%.4f", r.metrics.avg_rate / bound) + " of the bound");
    long_rates += " " + fmt("%.4f", r.metrics.avg_rate / bound);
  }

  const Scenario out = load_scenario(fixtures::scenario_path("field_outage.json"));
  const double out_bound = solve_p21(out, cfg).plan.objective;
  const auto t1 = std::chrono::steady_clock::now();
  const FiniteResult o20 = solve_finite(out, PlanMode::Outage, FiniteSolver::Sca, cfg);
  const double out_secs = seconds_since(t1);
  c.require(out_secs <= kFullRunLimitS, "outage run took " + fmt("%.0f s", out_secs));
  c.require(trace_nondecreasing(o20.trace), "outage surrogate trace decreased");
  c.require(*o20.metrics.outage_prob >= out_bound - kGapTol, "finite outage below the relaxed bound");
  c.require(*o20.metrics.outage_prob <= o20.init_objective, "finite outage above its initialization");
  c.require(check_plan(o20.plan, out, 1e-6).empty(), "outage plan infeasible");

  const FiniteResult traj = solve_finite(out, PlanMode::Outage, FiniteSolver::TrajOnly, cfg);
  c.require(*traj.metrics.outage_prob == 1.0, "trajectory-only outage " + fmt("%.4f", *traj.metrics.outage_prob));

  c.notes << "rate " << fmt("%.4f", r20.metrics.avg_rate) << " <= " << fmt("%.4f", bound) << " (T=20, "
          << fmt("%.1f s", rate_secs) << "), long-T fractions" << long_rates << ", outage "
          << fmt("%.4f", *o20.metrics.outage_prob) << " >= " << fmt("%.4f", out_bound) << " (" << fmt("%.1f s", out_secs)
          << "), traj-only outage " << fmt("%.1f", *traj.metrics.outage_prob);
  return c;
}

Check taylor_fuzz() {
  Check c;
  const Scenario scn = load_scenario(fixtures::scenario_path("field_rate.json"));
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> pos(-100.0, 300.0), pw(0.0, 5.0), amp(0.0, 2.0);
  double worst_amp = -1e300, worst_sq = -1e300;
  for (int i = 0; i < 10000; ++i) {
    const Vec2 q{pos(rng), pos(rng)}, ref{pos(rng), pos(rng)};
    const double p = pw(rng);
    const std::size_t k = static_cast<std::size_t>(i) % scn.num_sensors();
    const double truth = std::sqrt(p) * channel_amplitude(q, k, scn);
    worst_amp = std::max(worst_amp, amplitude_lower_bound(q, ref, p, k, scn) - truth);
    Eigen::VectorXd a(scn.num_sensors()), a_ref(scn.num_sensors());
    for (Eigen::Index j = 0; j < a.size(); ++j) {
      a[j] = amp(rng);
      a_ref[j] = amp(rng);
    }
    worst_sq = std::max(worst_sq, square_sum_lower_bound(a, a_ref) - a.sum() * a.sum());
  }
  c.require(worst_amp <= kTaylorTol, "amplitude bound exceeded truth by " + fmt("%.3g", worst_amp));
  c.require(worst_sq <= kTaylorTol, "square-sum bound exceeded truth by " + fmt("%.3g", worst_sq));
  c.notes << "max excess " << fmt("%.2e", worst_amp) << " / " << fmt("%.2e", worst_sq) << " over 10000 pairs";
  return c;
}

Check closed_forms() {
  Check c;
  const Scenario field = load_scenario(fixtures::scenario_path("field_outage.json"));
  const Vec2 q{60.0, 40.0};
  std::vector<double> g(field.num_sensors());
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = std::pow(channel_amplitude(q, k, field), 2) / field.channel.sigma2;

  // Water level: with weights c = sum G_k / lambda_k, the link transmits
  // only when c > ln 2, reaching SNR c / ln 2 - 1, split as P_k ~ G_k / lambda_k^2.
  for (double scale : {0.01, 0.3, 1.0, 3.0, 10.0, 1e3}) {
    std::vector<double> lambda(g.size());
    double weight = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      lambda[k] = scale * (1.0 + 0.1 * static_cast<double>(k));
      weight += g[k] / lambda[k];
    }
    const InnerSolution s = rate_inner_power(DualVars{lambda}, q, field);
    if (weight <= std::log(2.0)) {
      c.require(s.powers.total() == 0.0, "silent branch transmits at scale " + fmt("%g", scale));
      continue;
    }
    const double expect_snr = weight / std::log(2.0) - 1.0;
    c.require(rel_close(snr(q, s.powers, field), expect_snr, kClosedFormRelTol), "water level SNR at scale " + fmt("%g", scale));
    for (std::size_t k = 1; k < g.size(); ++k) {
      const double ratio = s.powers[k] / s.powers[0];
      const double expect = (g[k] / (lambda[k] * lambda[k])) / (g[0] / (lambda[0] * lambda[0]));
      c.require(rel_close(ratio, expect, kClosedFormRelTol), "power split at scale " + fmt("%g", scale));
    }
  }
  // Just below and above the single-sensor threshold.
  const Scenario one = fixtures::single(10.0);
  const double g1 = std::pow(channel_amplitude(Vec2::Zero(), 0, one), 2) / one.channel.sigma2;
  const double lam_star = g1 / std::log(2.0);
  const InnerSolution below = rate_inner_power(DualVars{{0.5 * lam_star}}, Vec2::Zero(), one);
  c.require(rel_close(below.powers[0], 1.0 / (0.5 * lam_star * std::log(2.0)) - 1.0 / g1, kClosedFormRelTol),
            "single-sensor water level");
  c.require(rate_inner_power(DualVars{{1.0001 * lam_star}}, Vec2::Zero(), one).powers[0] == 0.0, "threshold not silent");

  // Minimum-cost powers meet the SNR threshold with equality.
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> mu(0.01, 10.0), pos(0.0, 200.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> m(field.num_sensors());
    for (auto& v : m) v = mu(rng);
    const Vec2 p{pos(rng), pos(rng)};
    const InnerSolution s = outage_inner_power(DualVars{m}, p, field);
    worst = std::max(worst, std::abs(snr(p, s.powers, field) / *field.gamma_min - 1.0));
  }
  c.require(worst <= kClosedFormRelTol, "threshold equality off by " + fmt("%.3g", worst));

  // K co-located equal sensors give K^2 times the single-link SNR.
  for (int k = 1; k <= 10; ++k) {
    ScenarioSpec s;
    for (int i = 0; i < k; ++i) s.sensors.push_back({{0.0, 0.0}, 1.0});
    s.altitude = 50.0;
    s.v_max = 40.0;
    s.horizon = 1.0;
    s.channel = fixtures::field_channel();
    const Scenario scn = validate_scenario(s);
    const double single = snr({5.0, 5.0}, PowerVector({1.0}), fixtures::single(1.0, 10.0));
    const double all = snr({5.0, 5.0}, PowerVector(std::vector<double>(k, 1.0)), scn);
    c.require(rel_close(all, k * k * single, kClosedFormRelTol), "coherent gain for K=" + std::to_string(k));
  }

  c.require(rel_close(dbm_to_watts(30.0), 1.0, kClosedFormRelTol), "30 dBm");
  c.require(rel_close(dbm_to_watts(-60.0), 1e-9, kClosedFormRelTol), "-60 dBm");
  c.require(rel_close(db_to_linear(-30.0), 1e-3, kClosedFormRelTol), "-30 dB");
  c.require(rel_close(watts_to_dbm(2.0), 30.0 + 10.0 * std::log10(2.0), kClosedFormRelTol), "2 W");
  c.notes << "threshold equality worst " << fmt("%.2e", worst);
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Check()>>> criteria = {
      {"two-sensor relaxed rate plan", rate_example},
      {"two-sensor relaxed outage plan", outage_example},
      {"hovering structure counts", hover_structure},
      {"duality gap and brute-force oracle", duality_gap},
      {"finite-horizon SCA properties", sca_properties},
      {"taylor lower-bound fuzz", taylor_fuzz},
      {"closed-form unit checks", closed_forms},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check c;
    try {
      c = criteria[i].second();
    } catch (const std::exception& e) {
      c.failures.push_back(std::string("threw: ") + e.what());
    }
    const bool ok = c.failures.empty();
    failed += ok ? 0 : 1;
    std::printf("%s criterion %zu: %s (%s)\n", ok ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                ok ? c.notes.str().c_str() : c.failures.front().c_str());
    for (std::size_t j = 1; j < c.failures.size(); ++j) std::printf("    also: %s\n", c.failures[j].c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
