#include <cmath>
#include <limits>
#include <random>

#include <doctest.h>

#include "fixtures.hpp"
#include "uavbf/error.hpp"
#include "uavbf/relaxed_planner.hpp"

using namespace uavbf;

namespace {

double gain_over(const Scenario& scn, const Vec2& q, std::size_t k) {
  const double d2 = (q - scn.sensors[k].position).squaredNorm() + scn.altitude * scn.altitude;
  return scn.channel.beta0 * std::pow(d2, -scn.channel.alpha / 2.0) / scn.channel.sigma2;
}

double lagrangian(const Scenario& scn, const Vec2& q, const std::vector<double>& lambda, const std::vector<double>& p) {
  double v = rate(q, PowerVector(p), scn);
  for (std::size_t k = 0; k < p.size(); ++k) v -= lambda[k] * p[k];
  return v;
}

}  // namespace

TEST_CASE("rate inner power matches a one-dimensional search for a single sensor") {
  const Scenario scn = fixtures::single(10.0);
  const Vec2 q{3.0, 4.0};
  const double g = gain_over(scn, q, 0);
  for (double lambda : {0.05, 0.3, 1.0, 5.0, 0.999 * g / std::log(2.0), 1.001 * g / std::log(2.0), 100.0}) {
    const InnerSolution s = rate_inner_power(DualVars{{lambda}}, q, scn);
    double best = 0.0, best_p = 0.0;
    for (int i = 0; i <= 200000; ++i) {
      const double p = 40.0 * i / 200000.0;
      const double v = std::log2(1.0 + p * g) - lambda * p;
      if (v > best) {
        best = v;
        best_p = p;
      }
    }
    // Second, finer pass around the coarse maximizer.
    const double lo = std::max(0.0, best_p - 2e-4);
    for (int i = 0; i <= 200000; ++i) {
      const double p = lo + 4e-4 * i / 200000.0;
      const double v = std::log2(1.0 + p * g) - lambda * p;
      if (v > best) {
        best = v;
        best_p = p;
      }
    }
    CHECK(s.inner_value >= best - 1e-12);
    CHECK(s.inner_value <= best + 1e-12);
    CHECK(std::abs(s.powers[0] - best_p) <= 1e-5 + 1e-3 * best_p);
    // Water-filling threshold: silent once lambda exceeds g / ln 2.
    if (lambda >= g / std::log(2.0)) CHECK(s.powers[0] == 0.0);
  }
}

TEST_CASE("rate inner power is first-order optimal for several sensors") {
  const Scenario scn = uavbf::load_scenario(fixtures::scenario_path("field_rate.json"));
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> lam(0.05, 3.0), pos(0.0, 200.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> lambda(scn.num_sensors());
    for (auto& l : lambda) l = lam(rng);
    const Vec2 q{pos(rng), pos(rng)};
    const InnerSolution s = rate_inner_power(DualVars{lambda}, q, scn);
    const std::vector<double> p(s.powers.values().begin(), s.powers.values().end());
    const double base = lagrangian(scn, q, lambda, p);
    CHECK(base == doctest::Approx(s.inner_value).epsilon(1e-10));
    CHECK(snr(q, s.powers, scn) == doctest::Approx(s.snr).epsilon(1e-10));
    for (std::size_t k = 0; k < p.size(); ++k) {
      for (double step : {1e-6, -1e-6}) {
        auto moved = p;
        moved[k] = std::max(0.0, moved[k] + step);
        CHECK(lagrangian(scn, q, lambda, moved) <= base + 1e-10);
      }
    }
  }
}

TEST_CASE("outage inner power meets the threshold with equality") {
  const Scenario scn = uavbf::load_scenario(fixtures::scenario_path("field_outage.json"));
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> mu(0.01, 5.0), pos(0.0, 200.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> m(scn.num_sensors());
    for (auto& v : m) v = mu(rng);
    const Vec2 q{pos(rng), pos(rng)};
    const InnerSolution s = outage_inner_power(DualVars{m}, q, scn);
    CHECK(snr(q, s.powers, scn) == doctest::Approx(*scn.gamma_min).epsilon(1e-9));
    double cost = 0.0;
    for (std::size_t k = 0; k < m.size(); ++k) cost += m[k] * s.powers[k];
    CHECK(s.inner_value == doctest::Approx(cost).epsilon(1e-12));
  }
  CHECK_THROWS_AS(outage_inner_power(DualVars{{1.0}}, Vec2::Zero(), fixtures::single(10.0)), Error);
}

TEST_CASE("outage inner power closed forms") {
  const Scenario one = fixtures::single(10.0, 10.0, 30.0, 12.0);
  const Vec2 q{2.0, -1.0};
  for (double m : {0.1, 1.0, 7.0}) {
    const InnerSolution s = outage_inner_power(DualVars{{m}}, q, one);
    CHECK(s.powers[0] == doctest::Approx(*one.gamma_min / gain_over(one, q, 0)).epsilon(1e-12));
  }

  // Equal prices at the midpoint: each sensor carries a quarter of the
  // single-link requirement.
  const Scenario two = fixtures::pair(80.0, 10.0, 30.0, 17.0);
  const InnerSolution s = outage_inner_power(DualVars{{0.8, 0.8}}, Vec2::Zero(), two);
  const double single_need = *two.gamma_min / gain_over(two, Vec2::Zero(), 0);
  CHECK(s.powers[0] == doctest::Approx(single_need / 4.0).epsilon(1e-12));
  CHECK(s.powers[1] == doctest::Approx(single_need / 4.0).epsilon(1e-12));

  // Unequal prices against a scan of the constraint curve
  // sqrt(P1) h1 + sqrt(P2) h2 = sqrt(gamma).
  const Vec2 p{13.0, 7.0};
  const std::vector<double> m{0.7, 1.9};
  const InnerSolution u = outage_inner_power(DualVars{m}, p, two);
  const double h1 = std::sqrt(gain_over(two, p, 0)), h2 = std::sqrt(gain_over(two, p, 1));
  const double root = std::sqrt(*two.gamma_min);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 400000; ++i) {
    const double r1 = root / h1 * i / 400000.0;
    const double r2 = (root - r1 * h1) / h2;
    best = std::min(best, m[0] * r1 * r1 + m[1] * r2 * r2);
  }
  CHECK(u.inner_value <= best + 1e-12);
  CHECK(u.inner_value == doctest::Approx(best).epsilon(1e-6));
}

TEST_CASE("single-sensor rate dual agrees with a grid over lambda") {
  const Scenario scn = fixtures::single(10.0);
  const SolveConfig cfg;
  const double g = gain_over(scn, Vec2::Zero(), 0);
  const double pave = scn.sensors[0].p_avg;
  auto dual = [&](double l) {
    const double p = std::max(0.0, 1.0 / (l * std::log(2.0)) - 1.0 / g);
    return std::log2(1.0 + p * g) - l * p + l * pave;
  };
  double best_l = 0.0, best = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= 400000; ++i) {
    const double l = 2.0 * i / 400000.0;
    if (dual(l) < best) {
      best = dual(l);
      best_l = l;
    }
  }
  const DualSolveReport rep = rate_dual_solve(scn, cfg);
  CHECK(rep.dual_point.values[0] == doctest::Approx(best_l).epsilon(1e-4));
  CHECK(rep.dual_value == doctest::Approx(best).epsilon(1e-8));

  const RelaxedSolution sol = solve_p11(scn, cfg);
  REQUIRE(sol.plan.points.size() == 1);
  CHECK(sol.plan.points[0].location.norm() < 1e-12);
  CHECK(sol.plan.points[0].duration == doctest::Approx(10.0));
  CHECK(sol.plan.objective == doctest::Approx(std::log2(1.0 + pave * g)).epsilon(1e-9));
  CHECK(check_hover_plan(sol.plan, scn, false, 1e-8).empty());
}

TEST_CASE("single-sensor outage dual agrees with a grid over mu") {
  const Scenario scn = fixtures::single(10.0, 10.0, 30.0, 15.0);
  const SolveConfig cfg;
  const double need = *scn.gamma_min / gain_over(scn, Vec2::Zero(), 0);
  const double pave = scn.sensors[0].p_avg;
  REQUIRE(need > pave);
  double best_m = 0.0, best = -1.0;
  for (int i = 1; i <= 400000; ++i) {
    const double m = 2.0 * i / 400000.0;
    const double v = std::min(1.0, m * need) - m * pave;
    if (v > best) {
      best = v;
      best_m = m;
    }
  }
  const DualSolveReport rep = outage_dual_solve(scn, cfg);
  CHECK(std::abs(rep.dual_point.values[0] - best_m) <= 1e-4);
  CHECK(rep.dual_value >= best - 1e-12);
  CHECK(rep.dual_value == doctest::Approx(1.0 - pave / need).epsilon(1e-6));
  CHECK(rep.dual_value >= 0.0);
  CHECK(rep.dual_value <= 1.0);

  const RelaxedSolution sol = solve_p21(scn, cfg);
  CHECK(sol.plan.objective == doctest::Approx(1.0 - pave / need).epsilon(1e-6));
  CHECK(check_hover_plan(sol.plan, scn, true, 1e-8).empty());
}

TEST_CASE("symmetric pair gives symmetric duals") {
  const SolveConfig cfg;
  const DualSolveReport r = rate_dual_solve(fixtures::pair(80.0, 10.0), cfg);
  CHECK(r.dual_point.values[0] == doctest::Approx(r.dual_point.values[1]).epsilon(1e-3));
  const DualSolveReport o = outage_dual_solve(fixtures::pair(80.0, 10.0, 30.0, 17.0), cfg);
  CHECK(o.dual_point.values[0] == doctest::Approx(o.dual_point.values[1]).epsilon(1e-3));
}

TEST_CASE("weak duality holds at every probed multiplier") {
  const SolveConfig cfg;
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> dist(0.05, 3.0);

  const Scenario rate_scn = fixtures::pair(80.0, 10.0);
  const ChannelGrid grid(rate_scn, cfg.grid_step_m);
  const double primal = solve_p11(rate_scn, cfg).plan.objective;
  for (int i = 0; i < 100; ++i) {
    CHECK(primal <= rate_dual_function(DualVars{{dist(rng), dist(rng)}}, grid, rate_scn) + 1e-6);
  }

  const Scenario out_scn = fixtures::pair(80.0, 10.0, 30.0, 17.0);
  const double out_primal = solve_p21(out_scn, cfg).plan.objective;
  for (int i = 0; i < 100; ++i) {
    CHECK(out_primal >= outage_dual_function(DualVars{{dist(rng), dist(rng)}}, grid, out_scn) - 1e-6);
  }
}

TEST_CASE("time sharing keeps a single full-budget point and drops dominated points") {
  const Scenario scn = fixtures::pair(80.0, 10.0);
  const SolveConfig cfg;
  InnerSolution a;
  a.location = {0.0, 0.0};
  a.powers = PowerVector({1.0, 1.0});
  const HoverPlan one = rate_timeshare({a}, scn, cfg);
  REQUIRE(one.points.size() == 1);
  CHECK(one.points[0].duration == doctest::Approx(10.0));
  CHECK(one.objective == doctest::Approx(rate(a.location, a.powers, scn)).epsilon(1e-12));

  InnerSolution worse;
  worse.location = {0.0, 30.0};
  worse.powers = PowerVector({1.0, 1.0});
  const HoverPlan two = rate_timeshare({worse, a}, scn, cfg);
  double worse_time = 0.0;
  for (const auto& p : two.points) {
    if ((p.location - worse.location).norm() < 1e-9) worse_time += p.duration;
  }
  CHECK(worse_time == 0.0);
  CHECK(two.objective == doctest::Approx(one.objective).epsilon(1e-12));
}

TEST_CASE("outage relaxation extremes") {
  const SolveConfig cfg;
  const RelaxedSolution hopeless = solve_p21(fixtures::pair(80.0, 10.0, 30.0, 80.0), cfg);
  CHECK(hopeless.plan.objective == 1.0);
  CHECK(hopeless.plan.outage_duration == doctest::Approx(10.0));
  for (const auto& p : hopeless.plan.points) CHECK(p.powers.total() == 0.0);

  const RelaxedSolution easy = solve_p21(fixtures::pair(80.0, 10.0, 30.0, -20.0), cfg);
  CHECK(easy.plan.objective == 0.0);
  CHECK(easy.plan.outage_duration == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(check_hover_plan(easy.plan, fixtures::pair(80.0, 10.0, 30.0, -20.0), true, 1e-8).empty());
}

TEST_CASE("outage location search cases") {
  const SolveConfig cfg;
  const Scenario scn = fixtures::pair(80.0, 10.0, 30.0, 17.0);
  CHECK(outage_location_search(DualVars{{1e3, 1e3}}, scn, cfg).flag == OutageCase::OutageCheaper);
  CHECK(outage_location_search(DualVars{{1e-3, 1e-3}}, scn, cfg).flag == OutageCase::NonOutageCheaper);
}

TEST_CASE("refining the grid never hurts") {
  SolveConfig coarse;
  coarse.grid_step_m = 2.0;
  const SolveConfig fine;
  const Scenario rate_scn = fixtures::pair(80.0, 10.0);
  CHECK(solve_p11(rate_scn, fine).plan.objective >= solve_p11(rate_scn, coarse).plan.objective - fine.tie_tol);
  const Scenario out_scn = fixtures::pair(80.0, 10.0, 30.0, 17.0);
  CHECK(solve_p21(out_scn, fine).plan.objective <= solve_p21(out_scn, coarse).plan.objective + fine.tie_tol);
}
