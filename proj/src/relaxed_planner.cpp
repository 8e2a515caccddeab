#include "uavbf/relaxed_planner.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <sstream>

#include "uavbf/error.hpp"

namespace uavbf {

namespace {

constexpr double kInvLn2 = 1.0 / std::numbers::ln2;
constexpr double kKappaMin = 1e-6;
// Hover points whose LP duration is below this fraction of T are dropped.
constexpr double kMinDurationFraction = 1e-9;

double weighted_gain(const double* gains, const std::vector<double>& dual) {
  double c = 0.0;
  for (std::size_t k = 0; k < dual.size(); ++k) c += gains[k] / dual[k];
  return c;
}

double rate_value_from_c(double c) {
  const double pt = std::max(0.0, kInvLn2 - 1.0 / c);
  return std::log2(1.0 + pt * c) - pt;
}

void check_dual(const DualVars& dual, const Scenario& scn) {
  if (dual.values.size() != scn.num_sensors()) throw Error(ErrorKind::InvalidParameter, "dual vector has wrong length");
  for (double v : dual.values) {
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorKind::InvalidParameter, "dual variables must be positive");
  }
}

double gamma_of(const Scenario& scn) {
  if (!scn.gamma_min) throw Error(ErrorKind::MissingThreshold, "outage mode needs gamma_min");
  return *scn.gamma_min;
}

InnerSolution rate_inner_from_gains(const std::vector<double>& gains, const DualVars& lambda, const Vec2& q) {
  const auto& lam = lambda.values;
  const double c = weighted_gain(gains.data(), lam);
  InnerSolution s;
  s.location = q;
  s.p_total_tilde = std::max(0.0, kInvLn2 - 1.0 / c);
  std::vector<double> p(lam.size());
  double cost = 0.0;
  for (std::size_t k = 0; k < lam.size(); ++k) {
    p[k] = s.p_total_tilde * gains[k] / (lam[k] * lam[k] * c);
    cost += lam[k] * p[k];
  }
  s.powers = PowerVector(std::move(p));
  s.snr = s.p_total_tilde * c;
  s.inner_value = std::log2(1.0 + s.snr) - cost;
  return s;
}

InnerSolution outage_inner_from_gains(const std::vector<double>& gains, const DualVars& mu, const Vec2& q,
                                      double gamma) {
  const auto& m = mu.values;
  const double c = weighted_gain(gains.data(), m);
  InnerSolution s;
  s.location = q;
  std::vector<double> p(m.size());
  for (std::size_t k = 0; k < m.size(); ++k) p[k] = gamma * gains[k] / (c * c * m[k] * m[k]);
  s.powers = PowerVector(std::move(p));
  s.inner_value = gamma / c;
  s.snr = gamma;
  return s;
}

std::vector<double> grid_gains(const ChannelGrid& grid, std::size_t i) {
  const double* g = grid.gains(i);
  return {g, g + grid.num_sensors()};
}

struct GridArgmax {
  std::size_t index = 0;
  double c = -std::numeric_limits<double>::infinity();
};

// First strict maximum of c(q) = sum G_k / dual_k in node order.
GridArgmax argmax_weighted_gain(const ChannelGrid& grid, const std::vector<double>& dual) {
  GridArgmax best;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double c = weighted_gain(grid.gains(i), dual);
    if (c > best.c) {
      best.c = c;
      best.index = i;
    }
  }
  return best;
}

// Groups the flagged nodes into 8-connected components (distance < 2 steps on
// the lattice) and returns the best node of each, ordered by first node index.
std::vector<std::size_t> cluster_representatives(const ChannelGrid& grid, const std::vector<char>& flagged,
                                                 const std::vector<double>& score) {
  std::vector<char> seen(flagged.size(), 0);
  std::vector<std::size_t> reps;
  const auto nx = static_cast<long>(grid.nx());
  const auto ny = static_cast<long>(grid.ny());
  for (std::size_t start = 0; start < flagged.size(); ++start) {
    if (!flagged[start] || seen[start]) continue;
    std::size_t best = start;
    std::deque<std::size_t> queue{start};
    seen[start] = 1;
    while (!queue.empty()) {
      const std::size_t cur = queue.front();
      queue.pop_front();
      if (score[cur] > score[best] || (score[cur] == score[best] && cur < best)) best = cur;
      const long ix = static_cast<long>(cur) / ny;
      const long iy = static_cast<long>(cur) % ny;
      for (long dx = -1; dx <= 1; ++dx) {
        for (long dy = -1; dy <= 1; ++dy) {
          const long jx = ix + dx, jy = iy + dy;
          if (jx < 0 || jy < 0 || jx >= nx || jy >= ny) continue;
          const auto j = static_cast<std::size_t>(jx * ny + jy);
          if (flagged[j] && !seen[j]) {
            seen[j] = 1;
            queue.push_back(j);
          }
        }
      }
    }
    reps.push_back(best);
  }
  return reps;
}

DualVars initial_dual(const Scenario& scn) {
  DualVars d;
  for (const auto& s : scn.sensors) d.values.push_back(kInvLn2 / s.p_avg);
  return d;
}

DualSolveReport run_dual(const Scenario& scn, const SolveConfig& cfg, const SubgradientOracle& oracle,
                         bool negate_value) {
  const DualVars start = initial_dual(scn);
  const auto k = static_cast<Eigen::Index>(scn.num_sensors());
  Eigen::VectorXd x0(k), floor(k);
  double r0 = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    x0(i) = start.values[static_cast<std::size_t>(i)];
    floor(i) = cfg.dual_floor;
    r0 = std::max(r0, 10.0 * x0(i));
  }
  const int max_iters = cfg.dual_iters_per_dim2 * static_cast<int>(k * k);
  const EllipsoidResult er = ellipsoid_optimize(oracle, x0, r0, floor, cfg.dual_tol, max_iters);
  DualSolveReport rep;
  rep.dual_point.values.assign(er.best_x.data(), er.best_x.data() + k);
  rep.dual_value = negate_value ? -er.best_value : er.best_value;
  rep.iterations = er.iterations;
  rep.subgradient_norm_history = er.subgradient_norm_history;
  rep.converged = er.converged;
  return rep;
}

LpResult timeshare_lp(const std::vector<InnerSolution>& candidates, const Scenario& scn, const SolveConfig& cfg,
                      const std::vector<double>& reward) {
  const std::size_t v = candidates.size();
  LinearProgram lp;
  lp.objective = reward;
  for (std::size_t k = 0; k < scn.num_sensors(); ++k) {
    LinearProgram::Row row;
    row.coeffs.resize(v);
    for (std::size_t j = 0; j < v; ++j) row.coeffs[j] = candidates[j].powers[k];
    row.rhs = scn.horizon * scn.sensors[k].p_avg;
    lp.rows.push_back(std::move(row));
  }
  lp.rows.push_back({std::vector<double>(v, 1.0), scn.horizon});
  LpResult res = solve_lp(lp, cfg);
  if (res.status != LpStatus::Optimal) {
    throw Error(ErrorKind::IterationLimit, "time-sharing LP did not reach optimality");
  }
  return res;
}

Scenario with_scaled_budgets(const Scenario& scn, double kappa) {
  Scenario out = scn;
  for (auto& s : out.sensors) s.p_avg *= kappa;
  return out;
}

}  // namespace

const char* to_string(OutageCase c) {
  switch (c) {
    case OutageCase::NonOutageCheaper: return "NonOutageCheaper";
    case OutageCase::Tie: return "Tie";
    case OutageCase::OutageCheaper: return "OutageCheaper";
  }
  return "Unknown";
}

ChannelGrid::ChannelGrid(const Scenario& scn, double step)
    : x_lo_(scn.region.x_lo), y_lo_(scn.region.y_lo), step_(step), k_(scn.num_sensors()) {
  if (!(step > 0.0)) throw Error(ErrorKind::InvalidParameter, "grid step must be > 0");
  nx_ = static_cast<std::size_t>(std::floor((scn.region.x_hi - scn.region.x_lo) / step + 1e-9)) + 1;
  ny_ = static_cast<std::size_t>(std::floor((scn.region.y_hi - scn.region.y_lo) / step + 1e-9)) + 1;
  gains_.resize(nx_ * ny_ * k_);
  for (std::size_t i = 0; i < nx_ * ny_; ++i) {
    const auto g = normalized_gains(node(i), scn);
    std::copy(g.begin(), g.end(), gains_.begin() + static_cast<std::ptrdiff_t>(i * k_));
  }
}

Vec2 ChannelGrid::node(std::size_t i) const {
  return {x_lo_ + step_ * static_cast<double>(i / ny_), y_lo_ + step_ * static_cast<double>(i % ny_)};
}

std::string check_hover_plan(const HoverPlan& plan, const Scenario& scn, bool outage_mode, double tol_feas) {
  std::ostringstream os;
  double total = plan.outage_duration;
  for (const auto& p : plan.points) {
    if (p.duration < 0.0) return "negative hover duration";
    total += p.duration;
  }
  if (std::abs(total - scn.horizon) > 1e-6) {
    os << "durations sum to " << total << " s instead of " << scn.horizon << " s";
    return os.str();
  }
  if (scn.horizon > 0.0) {
    for (std::size_t k = 0; k < scn.num_sensors(); ++k) {
      double energy = 0.0;
      for (const auto& p : plan.points) energy += p.duration * p.powers[k];
      if (energy / scn.horizon > scn.sensors[k].p_avg + kPowerSlack) {
        os << "sensor " << k << " averages " << energy / scn.horizon << " W over its budget";
        return os.str();
      }
    }
  }
  if (outage_mode) {
    const double gamma = gamma_of(scn);
    for (const auto& p : plan.points) {
      if (snr(p.location, p.powers, scn) < gamma * (1.0 - tol_feas)) return "hover point below the SNR threshold";
    }
  }
  return {};
}

// ---------------------------------------------------------------------------

InnerSolution rate_inner_power(const DualVars& lambda, const Vec2& q, const Scenario& scn) {
  check_dual(lambda, scn);
  return rate_inner_from_gains(normalized_gains(q, scn), lambda, q);
}

std::vector<InnerSolution> rate_location_search(const DualVars& lambda, const Scenario& scn, const SolveConfig& cfg) {
  return rate_location_search(lambda, ChannelGrid(scn, cfg.grid_step_m), scn, cfg);
}

std::vector<InnerSolution> rate_location_search(const DualVars& lambda, const ChannelGrid& grid, const Scenario& scn,
                                                const SolveConfig& cfg) {
  check_dual(lambda, scn);
  std::vector<double> score(grid.size());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    score[i] = rate_value_from_c(weighted_gain(grid.gains(i), lambda.values));
    best = std::max(best, score[i]);
  }
  std::vector<char> flagged(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) flagged[i] = score[i] >= best - cfg.tie_tol;
  std::vector<InnerSolution> out;
  for (std::size_t i : cluster_representatives(grid, flagged, score)) {
    out.push_back(rate_inner_from_gains(grid_gains(grid, i), lambda, grid.node(i)));
  }
  return out;
}

double rate_dual_function(const DualVars& lambda, const ChannelGrid& grid, const Scenario& scn) {
  check_dual(lambda, scn);
  const GridArgmax best = argmax_weighted_gain(grid, lambda.values);
  double value = rate_value_from_c(best.c);
  for (std::size_t k = 0; k < scn.num_sensors(); ++k) value += lambda.values[k] * scn.sensors[k].p_avg;
  return value;
}

DualSolveReport rate_dual_solve(const Scenario& scn, const SolveConfig& cfg) {
  return rate_dual_solve(ChannelGrid(scn, cfg.grid_step_m), scn, cfg);
}

DualSolveReport rate_dual_solve(const ChannelGrid& grid, const Scenario& scn, const SolveConfig& cfg) {
  const std::size_t k = scn.num_sensors();
  auto oracle = [&](const Eigen::VectorXd& x) {
    DualVars lam;
    lam.values.assign(x.data(), x.data() + x.size());
    const GridArgmax best = argmax_weighted_gain(grid, lam.values);
    const InnerSolution s = rate_inner_from_gains(grid_gains(grid, best.index), lam, grid.node(best.index));
    OracleResult r;
    r.value = s.inner_value;
    r.subgradient.resize(static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i) {
      r.value += lam.values[i] * scn.sensors[i].p_avg;
      r.subgradient(static_cast<Eigen::Index>(i)) = scn.sensors[i].p_avg - s.powers[i];
    }
    return r;
  };
  return run_dual(scn, cfg, oracle, false);
}

HoverPlan rate_timeshare(const std::vector<InnerSolution>& candidates, const Scenario& scn, const SolveConfig& cfg) {
  if (candidates.empty()) throw Error(ErrorKind::InvalidParameter, "time sharing needs at least one candidate");
  std::vector<double> rates;
  for (const auto& c : candidates) rates.push_back(rate(c.location, c.powers, scn));
  std::vector<double> reward(rates.size());
  for (std::size_t j = 0; j < rates.size(); ++j) reward[j] = scn.horizon > 0.0 ? rates[j] / scn.horizon : rates[j];
  const LpResult lp = timeshare_lp(candidates, scn, cfg, reward);

  HoverPlan plan;
  double used = 0.0;
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    if (lp.x[j] <= kMinDurationFraction * scn.horizon) continue;
    plan.points.push_back({candidates[j].location, lp.x[j], candidates[j].powers});
    used += lp.x[j];
  }
  if (plan.points.empty()) {
    // Nothing worth transmitting: hover silently at the first candidate.
    plan.points.push_back({candidates.front().location, scn.horizon, PowerVector::zeros(scn.num_sensors())});
    plan.objective = 0.0;
    return plan;
  }
  // Any idle time is absorbed by stretching every hover point and scaling its
  // powers down by the same factor: energy is unchanged and the rate cannot drop.
  if (used < scn.horizon) {
    const double stretch = scn.horizon / used;
    for (auto& p : plan.points) {
      std::vector<double> w(p.powers.values().begin(), p.powers.values().end());
      for (double& x : w) x /= stretch;
      p.powers = PowerVector(std::move(w));
      p.duration *= stretch;
    }
  }
  double total = 0.0;
  for (const auto& p : plan.points) total += p.duration * rate(p.location, p.powers, scn);
  plan.objective = scn.horizon > 0.0 ? total / scn.horizon : 0.0;
  return plan;
}

// ---------------------------------------------------------------------------

InnerSolution outage_inner_power(const DualVars& mu, const Vec2& q, const Scenario& scn) {
  const double gamma = gamma_of(scn);
  check_dual(mu, scn);
  return outage_inner_from_gains(normalized_gains(q, scn), mu, q, gamma);
}

OutageSearchResult outage_location_search(const DualVars& mu, const Scenario& scn, const SolveConfig& cfg) {
  return outage_location_search(mu, ChannelGrid(scn, cfg.grid_step_m), scn, cfg);
}

OutageSearchResult outage_location_search(const DualVars& mu, const ChannelGrid& grid, const Scenario& scn,
                                          const SolveConfig& cfg) {
  const double gamma = gamma_of(scn);
  check_dual(mu, scn);
  std::vector<double> score(grid.size());
  double best_c = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double c = weighted_gain(grid.gains(i), mu.values);
    score[i] = -gamma / c;
    best_c = std::max(best_c, c);
  }
  OutageSearchResult res;
  res.min_value = gamma / best_c;
  std::vector<char> flagged(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) flagged[i] = -score[i] <= res.min_value + cfg.tie_tol;
  for (std::size_t i : cluster_representatives(grid, flagged, score)) {
    res.candidates.push_back(outage_inner_from_gains(grid_gains(grid, i), mu, grid.node(i), gamma));
  }
  if (std::abs(res.min_value - 1.0) <= cfg.tie_tol) {
    res.flag = OutageCase::Tie;
  } else if (res.min_value < 1.0) {
    res.flag = OutageCase::NonOutageCheaper;
  } else {
    res.flag = OutageCase::OutageCheaper;
  }
  return res;
}

double outage_dual_function(const DualVars& mu, const ChannelGrid& grid, const Scenario& scn) {
  const double gamma = gamma_of(scn);
  check_dual(mu, scn);
  const GridArgmax best = argmax_weighted_gain(grid, mu.values);
  double value = std::min(1.0, gamma / best.c);
  for (std::size_t k = 0; k < scn.num_sensors(); ++k) value -= mu.values[k] * scn.sensors[k].p_avg;
  return value;
}

DualSolveReport outage_dual_solve(const Scenario& scn, const SolveConfig& cfg) {
  return outage_dual_solve(ChannelGrid(scn, cfg.grid_step_m), scn, cfg);
}

DualSolveReport outage_dual_solve(const ChannelGrid& grid, const Scenario& scn, const SolveConfig& cfg) {
  const double gamma = gamma_of(scn);
  const std::size_t k = scn.num_sensors();
  // Minimizes -g~(mu); the subgradient is P^ave - P(mu, q), with zero powers
  // when staying in outage is the cheaper branch.
  auto oracle = [&](const Eigen::VectorXd& x) {
    DualVars mu;
    mu.values.assign(x.data(), x.data() + x.size());
    const GridArgmax best = argmax_weighted_gain(grid, mu.values);
    const double inner = gamma / best.c;
    OracleResult r;
    r.subgradient.resize(static_cast<Eigen::Index>(k));
    if (inner < 1.0) {
      const InnerSolution s = outage_inner_from_gains(grid_gains(grid, best.index), mu, grid.node(best.index), gamma);
      for (std::size_t i = 0; i < k; ++i) r.subgradient(static_cast<Eigen::Index>(i)) = scn.sensors[i].p_avg - s.powers[i];
    } else {
      for (std::size_t i = 0; i < k; ++i) r.subgradient(static_cast<Eigen::Index>(i)) = scn.sensors[i].p_avg;
    }
    r.value = -std::min(1.0, inner);
    for (std::size_t i = 0; i < k; ++i) r.value += mu.values[i] * scn.sensors[i].p_avg;
    return r;
  };
  return run_dual(scn, cfg, oracle, true);
}

HoverPlan outage_timeshare(const std::vector<InnerSolution>& candidates, const Scenario& scn, const SolveConfig& cfg) {
  HoverPlan plan;
  if (candidates.empty()) {
    plan.outage_duration = scn.horizon;
    plan.objective = 1.0;
    return plan;
  }
  const LpResult lp = timeshare_lp(candidates, scn, cfg, std::vector<double>(candidates.size(), 1.0));
  double served = 0.0;
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    if (lp.x[j] <= kMinDurationFraction * scn.horizon) continue;
    plan.points.push_back({candidates[j].location, lp.x[j], candidates[j].powers});
    served += lp.x[j];
  }
  plan.outage_duration = std::max(0.0, scn.horizon - served);
  plan.objective = scn.horizon > 0.0 ? plan.outage_duration / scn.horizon : 0.0;
  return plan;
}

ScaleBisectionResult outage_scale_bisection(const Scenario& scn, const SolveConfig& cfg) {
  gamma_of(scn);
  const ChannelGrid grid(scn, cfg.grid_step_m);

  struct Probe {
    OutageSearchResult search;
    double outage = 0.0;
  };
  auto probe = [&](double kappa) {
    const Scenario scaled = with_scaled_budgets(scn, kappa);
    const DualSolveReport rep = outage_dual_solve(grid, scaled, cfg);
    Probe p;
    p.search = outage_location_search(rep.dual_point, grid, scaled, cfg);
    if (p.search.flag == OutageCase::Tie) {
      p.outage = outage_timeshare(p.search.candidates, scaled, cfg).objective;
    } else if (p.search.flag == OutageCase::OutageCheaper) {
      p.outage = 1.0;
    }
    return p;
  };
  auto non_outage = [](const Probe& p) { return p.search.flag == OutageCase::NonOutageCheaper || p.outage <= 0.0; };

  ScaleBisectionResult res;
  Probe chosen;
  Probe at_min = probe(kKappaMin);
  if (non_outage(at_min)) {
    res.degenerate = true;
    res.kappa = kKappaMin;
    chosen = std::move(at_min);
  } else {
    const Bracket b = bisect([&](double kappa) { return non_outage(probe(kappa)); }, kKappaMin, 1.0,
                             cfg.kappa_bisect_tol);
    double lo = b.lo, hi = b.hi;
    chosen = probe(lo);
    while (chosen.outage > cfg.kappa_tol && hi - lo > 1e-12) {
      const double mid = 0.5 * (lo + hi);
      Probe p = probe(mid);
      if (non_outage(p)) {
        hi = mid;
      } else {
        lo = mid;
        chosen = std::move(p);
      }
    }
    res.kappa = lo;
  }
  res.plan = outage_timeshare(chosen.search.candidates, scn, cfg);
  return res;
}

// ---------------------------------------------------------------------------

RelaxedSolution solve_p11(const Scenario& scn, const SolveConfig& cfg) {
  cfg.validate();
  const ChannelGrid grid(scn, cfg.grid_step_m);
  RelaxedSolution sol;
  sol.report = rate_dual_solve(grid, scn, cfg);
  sol.candidates = rate_location_search(sol.report.dual_point, grid, scn, cfg);
  sol.plan = rate_timeshare(sol.candidates, scn, cfg);
  return sol;
}

RelaxedSolution solve_p21(const Scenario& scn, const SolveConfig& cfg) {
  cfg.validate();
  gamma_of(scn);
  const ChannelGrid grid(scn, cfg.grid_step_m);
  RelaxedSolution sol;
  sol.report = outage_dual_solve(grid, scn, cfg);
  OutageSearchResult search = outage_location_search(sol.report.dual_point, grid, scn, cfg);
  sol.outage_case = search.flag;
  sol.candidates = std::move(search.candidates);
  switch (sol.outage_case) {
    case OutageCase::Tie:
      sol.plan = outage_timeshare(sol.candidates, scn, cfg);
      break;
    case OutageCase::NonOutageCheaper: {
      ScaleBisectionResult b = outage_scale_bisection(scn, cfg);
      sol.plan = std::move(b.plan);
      sol.kappa = b.kappa;
      sol.kappa_degenerate = b.degenerate;
      sol.candidates.clear();
      for (const auto& p : sol.plan.points) {
        InnerSolution s;
        s.location = p.location;
        s.powers = p.powers;
        s.snr = snr(p.location, p.powers, scn);
        sol.candidates.push_back(std::move(s));
      }
      break;
    }
    case OutageCase::OutageCheaper:
      sol.plan.outage_duration = scn.horizon;
      sol.plan.objective = 1.0;
      break;
  }
  return sol;
}

}  // namespace uavbf
