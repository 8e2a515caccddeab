#include "uavbf/sca_planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "uavbf/error.hpp"

namespace uavbf {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInvLn2 = 1.0 / std::numbers::ln2;
// Box margin around the flight region for waypoint variables (m).
constexpr double kRegionMargin = 1.0;
// Weight of the always strictly feasible straight-line trajectory when a
// trajectory step needs an interior starting point.
constexpr double kInteriorBlend = 1e-3;
constexpr double kAmplitudeFloor = 1e-4;
constexpr double kBudgetShrink = 1e-4;
constexpr double kInf = std::numeric_limits<double>::infinity();

double gamma_of(const Scenario& scn) {
  if (!scn.gamma_min) throw Error(ErrorKind::MissingThreshold, "outage mode needs gamma_min");
  return *scn.gamma_min;
}

double g0(const Scenario& scn) { return scn.channel.beta0 / scn.channel.sigma2; }

// Normalized amplitude sqrt(G_k(q)) so that SNR = (sum rho_k amp_k)^2.
double norm_amp(const Vec2& q, std::size_t k, const Scenario& scn) {
  const double d2 = (q - scn.sensors[k].position).squaredNorm() + scn.altitude * scn.altitude;
  return std::sqrt(g0(scn) * std::pow(d2, -0.5 * scn.channel.alpha));
}

double sqrt_snr(const Vec2& q, const PowerVector& p, const Scenario& scn) {
  double s = 0.0;
  for (std::size_t k = 0; k < scn.num_sensors(); ++k) {
    if (p[k] > 0.0) s += std::sqrt(p[k]) * norm_amp(q, k, scn);
  }
  return s;
}

// Concave lower bound of sqrt(SNR) in q around q_ref at fixed powers:
// value, gradient and the (isotropic) Hessian scale.
struct AmplitudeModel {
  Vec2 q_ref;
  std::vector<double> c;     // sqrt(P_k G0)
  std::vector<double> base;  // D^-alpha/4
  std::vector<double> w;     // (alpha/2) c D^(-alpha/4 - 1)
  double s_ref = 0.0;        // bound value at q_ref = true sqrt(SNR)

  AmplitudeModel(const Vec2& q, const PowerVector& p, const Scenario& scn) : q_ref(q) {
    const double a = scn.channel.alpha;
    for (std::size_t k = 0; k < scn.num_sensors(); ++k) {
      const double r2 = (q - scn.sensors[k].position).squaredNorm();
      const double d = r2 + scn.altitude * scn.altitude;
      const double ck = std::sqrt(p[k] * g0(scn));
      c.push_back(ck);
      base.push_back(std::pow(d, -a / 4.0));
      w.push_back(0.5 * a * ck * std::pow(d, -a / 4.0 - 1.0));
      s_ref += ck * base.back();
    }
  }

  // Lambda(q) = sum_k c_k D^-a/4 - (w_k / 2)(||q - s_k||^2 - r_k^2).
  double value(const Vec2& q, const Scenario& scn, Vec2* grad, double* hess_scale) const {
    double v = 0.0;
    Vec2 g = Vec2::Zero();
    double h = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) {
      const Vec2& s = scn.sensors[k].position;
      v += c[k] * base[k] - 0.5 * w[k] * ((q - s).squaredNorm() - (q_ref - s).squaredNorm());
      g -= w[k] * (q - s);
      h -= w[k];
    }
    if (grad) *grad = g;
    if (hess_scale) *hess_scale = h;
    return v;
  }
};

void fill_log_term(double scale, double lin, const VectorXd& dlin, const MatrixXd& hlin, TermEval& out) {
  // value = scale * log2(1 + lin)
  out.value = scale * std::log2(1.0 + lin);
  if (out.order == 0) return;
  const double inv = 1.0 / (1.0 + lin);
  out.grad = scale * kInvLn2 * inv * dlin;
  out.hess = scale * kInvLn2 * (inv * hlin - inv * inv * dlin * dlin.transpose());
}

Vec2 direct_point(const Scenario& scn, std::size_t i, std::size_t n) {
  const double frac = static_cast<double>(i + 1) / static_cast<double>(n);
  return scn.q_init + frac * (scn.q_final - scn.q_init);
}

DiscretePlan with_waypoints(const DiscretePlan& plan, std::vector<Vec2> wps) {
  DiscretePlan out = plan;
  out.waypoints = std::move(wps);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

ScaAuxiliary auxiliary_at(const DiscretePlan& plan, const Scenario& scn) {
  const auto n = static_cast<Eigen::Index>(plan.n_slots());
  const auto k = static_cast<Eigen::Index>(scn.num_sensors());
  ScaAuxiliary aux;
  aux.a = MatrixXd::Zero(n, k);
  aux.A = VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& q = plan.waypoints[static_cast<std::size_t>(i)];
    const auto& p = plan.powers[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < k; ++j) {
      aux.a(i, j) = std::sqrt(p[static_cast<std::size_t>(j)]) * channel_amplitude(q, static_cast<std::size_t>(j), scn);
    }
    const double s = aux.a.row(i).sum();
    aux.A(i) = s * s;
  }
  return aux;
}

double amplitude_lower_bound(const Vec2& q, const Vec2& q_ref, double power, std::size_t k, const Scenario& scn) {
  const double a = scn.channel.alpha;
  const Vec2& s = scn.sensors[k].position;
  const double r2 = (q_ref - s).squaredNorm();
  const double d = r2 + scn.altitude * scn.altitude;
  const double c = std::sqrt(power * scn.channel.beta0);
  return c * (std::pow(d, -a / 4.0) - (a / 4.0) * std::pow(d, -a / 4.0 - 1.0) * ((q - s).squaredNorm() - r2));
}

double square_sum_lower_bound(const VectorXd& a, const VectorXd& a_ref) {
  const double s = a_ref.sum();
  return s * s + 2.0 * s * (a.sum() - s);
}

double surrogate_objective(const DiscretePlan& plan, PlanMode mode, const Scenario& scn) {
  const std::size_t n = plan.n_slots();
  if (n == 0) return 0.0;
  double sum = 0.0;
  const double gamma = mode == PlanMode::Outage ? gamma_of(scn) : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = snr(plan.waypoints[i], plan.powers[i], scn);
    sum += mode == PlanMode::Rate ? std::log2(1.0 + s) : std::min(s, gamma);
  }
  return sum / static_cast<double>(n);
}

DiscretePlan uniform_power_plan(const std::vector<Vec2>& waypoints, double slot_len, const Scenario& scn) {
  DiscretePlan plan;
  plan.slot_len = slot_len;
  plan.waypoints = waypoints;
  std::vector<double> p;
  for (const auto& s : scn.sensors) p.push_back(s.p_avg);
  plan.powers.assign(waypoints.size(), PowerVector(p));
  return plan;
}

// ---------------------------------------------------------------------------

SubproblemResult traj_subproblem(const DiscretePlan& plan, PlanMode mode, const Scenario& scn, const SolveConfig& cfg) {
  SubproblemResult res;
  res.plan = plan;
  res.before = surrogate_objective(plan, mode, scn);
  res.after = res.before;
  const std::size_t n = plan.n_slots();
  if (n < 2) return res;

  const bool outage = mode == PlanMode::Outage;
  const double gamma = outage ? gamma_of(scn) : 0.0;
  const std::size_t free = n - 1;  // q[1..N-1]; q[N] = q_F
  const int q_vars = static_cast<int>(2 * free);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double step = scn.v_max * plan.slot_len;
  if (!(step > 0.0)) return res;
  const double inv_step2 = 1.0 / (step * step);

  std::vector<AmplitudeModel> models;
  models.reserve(free);
  for (std::size_t i = 0; i < free; ++i) models.emplace_back(plan.waypoints[i], plan.powers[i], scn);

  SmoothProgram prog;
  prog.dim = q_vars + (outage ? static_cast<int>(free) : 0);
  prog.lower.assign(static_cast<std::size_t>(prog.dim), -kInf);
  prog.upper.assign(static_cast<std::size_t>(prog.dim), kInf);
  for (std::size_t i = 0; i < free; ++i) {
    prog.lower[2 * i] = scn.region.x_lo - kRegionMargin;
    prog.upper[2 * i] = scn.region.x_hi + kRegionMargin;
    prog.lower[2 * i + 1] = scn.region.y_lo - kRegionMargin;
    prog.upper[2 * i + 1] = scn.region.y_hi + kRegionMargin;
    if (outage) prog.upper[static_cast<std::size_t>(q_vars) + i] = gamma;
  }

  for (std::size_t i = 0; i < free; ++i) {
    const AmplitudeModel* m = &models[i];
    const int qx = static_cast<int>(2 * i);
    // L(q) = 2 S Lambda(q) - S^2, a concave lower bound on the SNR.
    auto lower_snr = [m, &scn](const VectorXd& local, Vec2& grad, double& hscale) {
      const Vec2 q(local(0), local(1));
      const double lam = m->value(q, scn, &grad, &hscale);
      grad *= 2.0 * m->s_ref;
      hscale *= 2.0 * m->s_ref;
      return 2.0 * m->s_ref * lam - m->s_ref * m->s_ref;
    };
    if (!outage) {
      prog.objective.push_back({{qx, qx + 1}, [lower_snr, inv_n](const VectorXd& local, TermEval& out) {
                                  Vec2 g;
                                  double h;
                                  const double l = lower_snr(local, g, h);
                                  if (!(1.0 + l > 0.0)) return false;
                                  fill_log_term(inv_n, l, g, h * MatrixXd::Identity(2, 2), out);
                                  return true;
                                }});
    } else {
      const int av = q_vars + static_cast<int>(i);
      prog.objective.push_back({{av}, [inv_n](const VectorXd& local, TermEval& out) {
                                  out.value = inv_n * local(0);
                                  if (out.order > 0) {
                                    out.grad = VectorXd::Constant(1, inv_n);
                                    out.hess = MatrixXd::Zero(1, 1);
                                  }
                                  return true;
                                }});
      prog.constraints.push_back({{qx, qx + 1, av}, [lower_snr](const VectorXd& local, TermEval& out) {
                                    Vec2 g;
                                    double h;
                                    out.value = lower_snr(local, g, h) - local(2);
                                    if (out.order > 0) {
                                      out.grad = VectorXd::Zero(3);
                                      out.grad.head<2>() = g;
                                      out.grad(2) = -1.0;
                                      out.hess = MatrixXd::Zero(3, 3);
                                      out.hess(0, 0) = h;
                                      out.hess(1, 1) = h;
                                    }
                                    return true;
                                  }});
    }
  }

  // Speed limits 1 - ||q[n] - q[n-1]||^2 / (v delta)^2 >= 0 for n = 1..N.
  for (std::size_t i = 0; i < n; ++i) {
    const bool first = i == 0;
    const bool last = i + 1 == n;
    SmoothTerm t;
    const Vec2 fixed_prev = scn.q_init;
    const Vec2 fixed_next = scn.q_final;
    if (!first) t.support.insert(t.support.end(), {static_cast<int>(2 * (i - 1)), static_cast<int>(2 * (i - 1) + 1)});
    if (!last) t.support.insert(t.support.end(), {static_cast<int>(2 * i), static_cast<int>(2 * i + 1)});
    t.eval = [first, last, fixed_prev, fixed_next, inv_step2](const VectorXd& local, TermEval& out) {
      Vec2 prev, cur;
      if (first) {
        prev = fixed_prev;
        cur = Vec2(local(0), local(1));
      } else if (last) {
        prev = Vec2(local(0), local(1));
        cur = fixed_next;
      } else {
        prev = Vec2(local(0), local(1));
        cur = Vec2(local(2), local(3));
      }
      const Vec2 d = cur - prev;
      out.value = 1.0 - d.squaredNorm() * inv_step2;
      if (out.order == 0) return true;
      const auto m = local.size();
      out.grad.resize(m);
      out.hess = MatrixXd::Zero(m, m);
      const double h = -2.0 * inv_step2;
      if (first) {
        out.grad = -2.0 * inv_step2 * d;
        out.hess.diagonal().setConstant(h);
      } else if (last) {
        out.grad = 2.0 * inv_step2 * d;
        out.hess.diagonal().setConstant(h);
      } else {
        out.grad.head<2>() = 2.0 * inv_step2 * d;
        out.grad.tail<2>() = -2.0 * inv_step2 * d;
        out.hess.diagonal().setConstant(h);
        out.hess(0, 2) = out.hess(2, 0) = -h;
        out.hess(1, 3) = out.hess(3, 1) = -h;
      }
      return true;
    };
    if (!t.support.empty()) prog.constraints.push_back(std::move(t));
  }

  // Interior start: nudge toward the straight line, which moves strictly
  // slower than v_max whenever the horizon exceeds the minimum flight time.
  VectorXd x0(prog.dim);
  for (std::size_t i = 0; i < free; ++i) {
    const Vec2 q = (1.0 - kInteriorBlend) * plan.waypoints[i] + kInteriorBlend * direct_point(scn, i, n);
    x0(static_cast<Eigen::Index>(2 * i)) = q.x();
    x0(static_cast<Eigen::Index>(2 * i + 1)) = q.y();
  }
  if (outage) {
    for (std::size_t i = 0; i < free; ++i) {
      const Vec2 q(x0(static_cast<Eigen::Index>(2 * i)), x0(static_cast<Eigen::Index>(2 * i + 1)));
      const double l = 2.0 * models[i].s_ref * models[i].value(q, scn, nullptr, nullptr) - models[i].s_ref * models[i].s_ref;
      x0(q_vars + static_cast<Eigen::Index>(i)) = std::min(l, gamma) - 1e-6 * std::max(1.0, gamma);
    }
  }

  SmoothResult sol;
  try {
    sol = maximize_smooth_from(prog, x0, cfg);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::NoStrictlyFeasibleStart) return res;
    throw;
  }

  std::vector<Vec2> wps = plan.waypoints;
  for (std::size_t i = 0; i < free; ++i) {
    wps[i] = Vec2(sol.x(static_cast<Eigen::Index>(2 * i)), sol.x(static_cast<Eigen::Index>(2 * i + 1)));
  }
  DiscretePlan cand = with_waypoints(plan, std::move(wps));
  const double after = surrogate_objective(cand, mode, scn);
  if (after >= res.before && check_plan(cand, scn, 1e-9).empty()) {
    res.plan = std::move(cand);
    res.after = after;
    res.accepted = true;
  }
  return res;
}

// ---------------------------------------------------------------------------

SubproblemResult power_subproblem(const DiscretePlan& plan, PlanMode mode, const Scenario& scn, const SolveConfig& cfg) {
  SubproblemResult res;
  res.plan = plan;
  res.before = surrogate_objective(plan, mode, scn);
  res.after = res.before;
  const std::size_t n = plan.n_slots();
  const std::size_t kk = scn.num_sensors();
  if (n == 0) return res;

  const bool outage = mode == PlanMode::Outage;
  const double gamma = outage ? gamma_of(scn) : 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<std::size_t> active;
  for (std::size_t k = 0; k < kk; ++k) {
    if (scn.sensors[k].p_avg > 0.0) active.push_back(k);
  }
  const std::size_t ka = active.size();
  if (ka == 0) {
    for (auto& p : res.plan.powers) p = PowerVector::zeros(kk);
    res.after = surrogate_objective(res.plan, mode, scn);
    res.accepted = true;
    return res;
  }
  const int rho_vars = static_cast<int>(n * ka);
  auto var = [ka](std::size_t slot, std::size_t j) { return static_cast<int>(slot * ka + j); };

  // Starting amplitudes: floored away from zero, then scaled into the budgets.
  VectorXd x0(rho_vars + (outage ? static_cast<int>(n) : 0));
  for (std::size_t j = 0; j < ka; ++j) {
    const double pav = scn.sensors[active[j]].p_avg;
    double energy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = std::max(std::sqrt(plan.powers[i][active[j]]), kAmplitudeFloor * std::sqrt(pav));
      x0(var(i, j)) = r;
      energy += r * r;
    }
    const double ratio = energy * inv_n / pav;
    if (ratio > 1.0 - kBudgetShrink) {
      const double scale = std::sqrt((1.0 - kBudgetShrink) / ratio);
      for (std::size_t i = 0; i < n; ++i) x0(var(i, j)) *= scale;
    }
  }

  std::vector<VectorXd> amps(n, VectorXd(static_cast<Eigen::Index>(ka)));
  std::vector<double> s_ref(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < ka; ++j) {
      amps[i](static_cast<Eigen::Index>(j)) = norm_amp(plan.waypoints[i], active[j], scn);
    }
    s_ref[i] = sqrt_snr(plan.waypoints[i], plan.powers[i], scn);
  }

  SmoothProgram prog;
  prog.dim = static_cast<int>(x0.size());
  prog.lower.assign(static_cast<std::size_t>(prog.dim), -kInf);
  prog.upper.assign(static_cast<std::size_t>(prog.dim), kInf);
  for (int v = 0; v < rho_vars; ++v) prog.lower[static_cast<std::size_t>(v)] = 0.0;

  for (std::size_t i = 0; i < n; ++i) {
    std::vector<int> sup;
    for (std::size_t j = 0; j < ka; ++j) sup.push_back(var(i, j));
    const VectorXd* h = &amps[i];
    const double s = s_ref[i];
    // L = S^2 + 2 S (sum rho_k h_k - S), linear in the amplitudes.
    if (!outage) {
      prog.objective.push_back({sup, [h, s, inv_n](const VectorXd& local, TermEval& out) {
                                  const double l = 2.0 * s * local.dot(*h) - s * s;
                                  if (!(1.0 + l > 0.0)) return false;
                                  const auto m = local.size();
                                  fill_log_term(inv_n, l, 2.0 * s * (*h), MatrixXd::Zero(m, m), out);
                                  return true;
                                }});
    } else {
      const int av = rho_vars + static_cast<int>(i);
      prog.upper[static_cast<std::size_t>(av)] = gamma;
      prog.objective.push_back({{av}, [inv_n](const VectorXd& local, TermEval& out) {
                                  out.value = inv_n * local(0);
                                  if (out.order > 0) {
                                    out.grad = VectorXd::Constant(1, inv_n);
                                    out.hess = MatrixXd::Zero(1, 1);
                                  }
                                  return true;
                                }});
      sup.push_back(av);
      prog.constraints.push_back({sup, [h, s](const VectorXd& local, TermEval& out) {
                                    const auto m = local.size() - 1;
                                    out.value = 2.0 * s * local.head(m).dot(*h) - s * s - local(m);
                                    if (out.order > 0) {
                                      out.grad.resize(m + 1);
                                      out.grad.head(m) = 2.0 * s * (*h);
                                      out.grad(m) = -1.0;
                                      out.hess = MatrixXd::Zero(m + 1, m + 1);
                                    }
                                    return true;
                                  }});
      const double l0 = 2.0 * s * x0.segment(var(i, 0), static_cast<Eigen::Index>(ka)).dot(*h) - s * s;
      x0(av) = std::min(l0, gamma) - 1e-6 * std::max(1.0, gamma);
    }
  }

  for (std::size_t j = 0; j < ka; ++j) {
    std::vector<int> sup;
    for (std::size_t i = 0; i < n; ++i) sup.push_back(var(i, j));
    const double scale = inv_n / scn.sensors[active[j]].p_avg;
    prog.constraints.push_back({sup, [scale](const VectorXd& local, TermEval& out) {
                                  out.value = 1.0 - scale * local.squaredNorm();
                                  if (out.order > 0) {
                                    out.grad = -2.0 * scale * local;
                                    out.hess = MatrixXd::Zero(local.size(), local.size());
                                    out.hess.diagonal().setConstant(-2.0 * scale);
                                  }
                                  return true;
                                }});
  }

  SmoothResult sol;
  try {
    sol = maximize_smooth_from(prog, x0, cfg);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::NoStrictlyFeasibleStart) return res;
    throw;
  }

  DiscretePlan cand = plan;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> p(kk, 0.0);
    for (std::size_t j = 0; j < ka; ++j) {
      const double r = std::max(0.0, sol.x(var(i, j)));
      p[active[j]] = r * r;
    }
    cand.powers[i] = PowerVector(std::move(p));
  }
  const double after = surrogate_objective(cand, mode, scn);
  if (after >= res.before && check_plan(cand, scn, 1e-9).empty()) {
    res.plan = std::move(cand);
    res.after = after;
    res.accepted = true;
  }
  return res;
}

DiscretePlan power_only_design(const std::vector<Vec2>& waypoints, double slot_len, PlanMode mode,
                               const Scenario& scn, const SolveConfig& cfg, std::vector<TraceRow>* trace) {
  DiscretePlan plan = uniform_power_plan(waypoints, slot_len, scn);
  double obj = surrogate_objective(plan, mode, scn);
  if (trace) trace->push_back({0, "init", obj});
  for (int round = 1; round <= cfg.sca_max_rounds; ++round) {
    SubproblemResult r = power_subproblem(plan, mode, scn, cfg);
    if (trace) trace->push_back({round, "power", r.after});
    const double gain = r.after - obj;
    plan = std::move(r.plan);
    obj = r.after;
    if (!r.accepted || gain <= cfg.sca_tol * std::max(1e-12, std::abs(obj))) break;
  }
  return plan;
}

// ---------------------------------------------------------------------------

bool served_prefix_feasible(const DiscretePlan& plan, const std::vector<std::size_t>& order, std::size_t n,
                            const Scenario& scn, const SolveConfig& cfg, std::vector<PowerVector>* powers) {
  const double gamma = gamma_of(scn);
  const std::size_t kk = scn.num_sensors();
  const std::size_t total = plan.n_slots();
  std::vector<PowerVector> out(total, PowerVector::zeros(kk));
  if (n == 0) {
    if (powers) *powers = std::move(out);
    return true;
  }

  std::vector<std::size_t> active;
  for (std::size_t k = 0; k < kk; ++k) {
    if (scn.sensors[k].p_avg > 0.0) active.push_back(k);
  }
  const std::size_t ka = active.size();
  if (ka == 0) return false;
  const double root_gamma = std::sqrt(gamma);
  auto var = [ka](std::size_t pos, std::size_t j) { return static_cast<int>(pos * ka + j); };

  std::vector<VectorXd> amps(n, VectorXd(static_cast<Eigen::Index>(ka)));
  SmoothProgram prog;
  prog.dim = static_cast<int>(n * ka);
  prog.lower.assign(static_cast<std::size_t>(prog.dim), 0.0);
  prog.upper.assign(static_cast<std::size_t>(prog.dim), kInf);
  VectorXd guess(prog.dim);
  for (std::size_t pos = 0; pos < n; ++pos) {
    const std::size_t slot = order[pos];
    std::vector<int> sup;
    for (std::size_t j = 0; j < ka; ++j) {
      amps[pos](static_cast<Eigen::Index>(j)) = norm_amp(plan.waypoints[slot], active[j], scn) / root_gamma;
      sup.push_back(var(pos, j));
      guess(var(pos, j)) = std::sqrt(plan.powers[slot][active[j]]);
    }
    const VectorXd* h = &amps[pos];
    // sqrt(SNR / gamma) - 1 >= 0, linear in the amplitudes.
    prog.constraints.push_back({sup, [h](const VectorXd& local, TermEval& out) {
                                  out.value = local.dot(*h) - 1.0;
                                  if (out.order > 0) {
                                    out.grad = *h;
                                    out.hess = MatrixXd::Zero(local.size(), local.size());
                                  }
                                  return true;
                                }});
  }
  const double inv_total = 1.0 / static_cast<double>(total);
  for (std::size_t j = 0; j < ka; ++j) {
    std::vector<int> sup;
    for (std::size_t pos = 0; pos < n; ++pos) sup.push_back(var(pos, j));
    const double scale = inv_total / scn.sensors[active[j]].p_avg;
    prog.constraints.push_back({sup, [scale](const VectorXd& local, TermEval& out) {
                                  out.value = 1.0 - scale * local.squaredNorm();
                                  if (out.order > 0) {
                                    out.grad = -2.0 * scale * local;
                                    out.hess = MatrixXd::Zero(local.size(), local.size());
                                    out.hess.diagonal().setConstant(-2.0 * scale);
                                  }
                                  return true;
                                }});
  }

  const FeasibilityResult feas = find_strictly_feasible(prog, guess, cfg);
  if (!feas.x.allFinite()) return false;

  // Put every served slot exactly on the threshold (slightly above, so the
  // strict outage test never flips on rounding), then verify the budgets.
  std::vector<double> energy(kk, 0.0);
  for (std::size_t pos = 0; pos < n; ++pos) {
    const VectorXd rho = feas.x.segment(var(pos, 0), static_cast<Eigen::Index>(ka)).cwiseMax(0.0);
    const double margin = rho.dot(amps[pos]);
    if (!(margin > 0.0)) return false;
    const double scale = (1.0 + 1e-12) / margin;
    std::vector<double> p(kk, 0.0);
    for (std::size_t j = 0; j < ka; ++j) {
      const double r = rho(static_cast<Eigen::Index>(j)) * scale;
      p[active[j]] = r * r;
      energy[active[j]] += r * r;
    }
    out[order[pos]] = PowerVector(std::move(p));
  }
  for (std::size_t j = 0; j < ka; ++j) {
    if (energy[active[j]] * inv_total > scn.sensors[active[j]].p_avg + kPowerSlack) return false;
  }
  for (std::size_t pos = 0; pos < n; ++pos) {
    const std::size_t slot = order[pos];
    if (snr(plan.waypoints[slot], out[slot], scn) < gamma) return false;
  }
  if (powers) *powers = std::move(out);
  return true;
}

OutagePostResult outage_postprocess(const DiscretePlan& plan, const Scenario& scn, const SolveConfig& cfg) {
  gamma_of(scn);
  const std::size_t total = plan.n_slots();
  OutagePostResult res;
  std::vector<double> snrs(total);
  for (std::size_t i = 0; i < total; ++i) snrs[i] = snr(plan.waypoints[i], plan.powers[i], scn);
  res.order.resize(total);
  for (std::size_t i = 0; i < total; ++i) res.order[i] = i;
  std::stable_sort(res.order.begin(), res.order.end(), [&](std::size_t a, std::size_t b) { return snrs[a] > snrs[b]; });

  const int best = bisect_largest(
      [&](int m) { return served_prefix_feasible(plan, res.order, static_cast<std::size_t>(m), scn, cfg); }, 0,
      static_cast<int>(total));
  res.n_served = static_cast<std::size_t>(best);
  std::vector<PowerVector> powers;
  served_prefix_feasible(plan, res.order, res.n_served, scn, cfg, &powers);

  res.plan = plan;
  res.plan.powers = std::move(powers);
  std::vector<char> served(total, 0);
  for (std::size_t pos = 0; pos < res.n_served; ++pos) served[res.order[pos]] = 1;
  for (std::size_t i = 0; i < total; ++i) {
    if (!served[i]) res.outage_slots.push_back(i);
  }
  res.outage_prob = total > 0 ? 1.0 - static_cast<double>(res.n_served) / static_cast<double>(total) : 1.0;
  return res;
}

// ---------------------------------------------------------------------------

std::vector<InitTrajectory> initial_trajectories(const Scenario& scn, PlanMode mode, const SolveConfig& cfg,
                                                 const HoverPlan* relaxed) {
  std::vector<InitTrajectory> out;
  HoverPlan hover;
  if (relaxed) {
    hover = *relaxed;
  } else {
    hover = (mode == PlanMode::Rate ? solve_p11(scn, cfg) : solve_p21(scn, cfg)).plan;
  }
  auto attempt = [&](auto&& make) {
    try {
      out.push_back(make());
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::InfeasibleHorizon && e.kind() != ErrorKind::InvalidParameter) throw;
    }
  };
  if (!hover.points.empty()) attempt([&] { return init_successive_hover_fly(scn, hover, cfg); });
  attempt([&] { return init_fly_hover_fly(scn, cfg); });
  out.push_back(init_direct(scn, cfg));
  return out;
}

namespace {

// Higher is better in both modes.
double candidate_score(const DiscretePlan& plan, PlanMode mode, const Scenario& scn, const SolveConfig& cfg,
                       double* reported) {
  if (mode == PlanMode::Rate) {
    const double r = evaluate_plan(plan, scn).avg_rate;
    *reported = r;
    return r;
  }
  const OutagePostResult post = outage_postprocess(plan, scn, cfg);
  *reported = post.outage_prob;
  return -post.outage_prob;
}

bool better(double a, double b) { return a > b + 1e-12 * std::max(1.0, std::abs(b)); }

}  // namespace

std::size_t select_init(std::vector<Candidate>& candidates, PlanMode mode, const Scenario& scn,
                        const SolveConfig& cfg) {
  if (candidates.empty()) throw Error(ErrorKind::InvalidParameter, "no initial trajectory to select from");
  std::size_t best = 0;
  double best_score = -kInf;
  double best_surrogate = -kInf;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto& c = candidates[i];
    c.plan = power_only_design(c.init.waypoints, c.init.slot_len, mode, scn, cfg);
    const double score = candidate_score(c.plan, mode, scn, cfg, &c.objective);
    const double surrogate = surrogate_objective(c.plan, mode, scn);
    const bool wins = better(score, best_score) || (!better(best_score, score) && better(surrogate, best_surrogate));
    const bool tied = !better(score, best_score) && !better(best_score, score) &&
                      !better(surrogate, best_surrogate) && !better(best_surrogate, surrogate);
    if (i == 0 || wins || (tied && c.init.kind < candidates[best].init.kind)) {
      best = i;
      best_score = score;
      best_surrogate = surrogate;
    }
  }
  return best;
}

namespace {

ScaResult alternate(DiscretePlan plan, InitKind kind, PlanMode mode, const Scenario& scn, const SolveConfig& cfg,
                    bool optimize_power) {
  ScaResult res;
  res.init_kind = kind;
  double obj = surrogate_objective(plan, mode, scn);
  res.trace.push_back({0, "init", obj});
  for (int round = 1; round <= cfg.sca_max_rounds; ++round) {
    res.rounds = round;
    const double start = obj;
    SubproblemResult t = traj_subproblem(plan, mode, scn, cfg);
    plan = std::move(t.plan);
    obj = t.after;
    res.trace.push_back({round, "traj", obj});
    if (optimize_power) {
      SubproblemResult p = power_subproblem(plan, mode, scn, cfg);
      plan = std::move(p.plan);
      obj = p.after;
      res.trace.push_back({round, "power", obj});
    }
    if (obj - start <= cfg.sca_tol * std::max(1e-12, std::abs(start))) {
      res.converged = true;
      break;
    }
  }
  res.plan = std::move(plan);
  res.objective = obj;
  return res;
}

}  // namespace

ScaResult sca_solve(const Scenario& scn, PlanMode mode, const SolveConfig& cfg) {
  cfg.validate();
  if (mode == PlanMode::Outage) gamma_of(scn);
  std::vector<Candidate> cands;
  for (auto& init : initial_trajectories(scn, mode, cfg)) cands.push_back({std::move(init), {}, 0.0});
  const std::size_t pick = select_init(cands, mode, scn, cfg);
  return alternate(cands[pick].plan, cands[pick].init.kind, mode, scn, cfg, true);
}

ScaResult traj_only_solve(const Scenario& scn, PlanMode mode, const SolveConfig& cfg) {
  cfg.validate();
  if (mode == PlanMode::Outage) gamma_of(scn);
  std::size_t best = 0;
  double best_score = -kInf, best_surrogate = -kInf;
  std::vector<DiscretePlan> plans;
  std::vector<InitKind> kinds;
  for (auto& init : initial_trajectories(scn, mode, cfg)) {
    DiscretePlan p = uniform_power_plan(init.waypoints, init.slot_len, scn);
    const TrajectoryMetrics m = evaluate_plan(p, scn);
    const double score = mode == PlanMode::Rate ? m.avg_rate : -m.outage_prob.value_or(1.0);
    const double surrogate = surrogate_objective(p, mode, scn);
    if (plans.empty() || better(score, best_score) ||
        (!better(best_score, score) && better(surrogate, best_surrogate))) {
      best = plans.size();
      best_score = score;
      best_surrogate = surrogate;
    }
    plans.push_back(std::move(p));
    kinds.push_back(init.kind);
  }
  return alternate(plans[best], kinds[best], mode, scn, cfg, false);
}

}  // namespace uavbf

namespace uavbf {

const char* to_string(FiniteSolver solver) {
  switch (solver) {
    case FiniteSolver::Sca: return "sca";
    case FiniteSolver::InitFlyHoverFly: return "init-fhf";
    case FiniteSolver::InitSuccessiveHoverFly: return "init-shf";
    case FiniteSolver::InitDirect: return "init-direct";
    case FiniteSolver::TrajOnly: return "traj-only";
  }
  return "unknown";
}

FiniteResult solve_finite(const Scenario& scn, PlanMode mode, FiniteSolver solver, const SolveConfig& cfg) {
  cfg.validate();
  if (mode == PlanMode::Outage) gamma_of(scn);
  FiniteResult res;

  if (solver == FiniteSolver::TrajOnly) {
    ScaResult r = traj_only_solve(scn, mode, cfg);
    res.plan = std::move(r.plan);
    res.init_kind = r.init_kind;
    res.trace = std::move(r.trace);
    res.rounds = r.rounds;
    res.converged = r.converged;
    res.metrics = evaluate_plan(res.plan, scn, mode == PlanMode::Outage);
    return res;
  }

  InitTrajectory init;
  if (solver == FiniteSolver::Sca) {
    std::vector<Candidate> cands;
    for (auto& t : initial_trajectories(scn, mode, cfg)) cands.push_back({std::move(t), {}, 0.0});
    const std::size_t pick = select_init(cands, mode, scn, cfg);
    res.init_objective = cands[pick].objective;
    ScaResult r = alternate(cands[pick].plan, cands[pick].init.kind, mode, scn, cfg, true);
    res.init_kind = r.init_kind;
    res.trace = std::move(r.trace);
    res.rounds = r.rounds;
    res.converged = r.converged;
    if (mode == PlanMode::Rate) {
      res.plan = std::move(r.plan);
    } else {
      OutagePostResult post = outage_postprocess(r.plan, scn, cfg);
      if (post.outage_prob > res.init_objective) {
        post = outage_postprocess(cands[pick].plan, scn, cfg);
        res.kept_initialization = true;
      }
      res.plan = post.plan;
      res.post = std::move(post);
    }
    res.metrics = evaluate_plan(res.plan, scn, mode == PlanMode::Outage);
    return res;
  }

  if (solver == FiniteSolver::InitFlyHoverFly) {
    init = init_fly_hover_fly(scn, cfg);
  } else if (solver == FiniteSolver::InitDirect) {
    init = init_direct(scn, cfg);
  } else {
    const HoverPlan hover = (mode == PlanMode::Rate ? solve_p11(scn, cfg) : solve_p21(scn, cfg)).plan;
    init = init_successive_hover_fly(scn, hover, cfg);
  }
  res.init_kind = init.kind;
  DiscretePlan plan = power_only_design(init.waypoints, init.slot_len, mode, scn, cfg, &res.trace);
  res.rounds = res.trace.empty() ? 0 : res.trace.back().round;
  if (mode == PlanMode::Outage) {
    OutagePostResult post = outage_postprocess(plan, scn, cfg);
    res.plan = post.plan;
    res.post = std::move(post);
  } else {
    res.plan = std::move(plan);
  }
  res.metrics = evaluate_plan(res.plan, scn, mode == PlanMode::Outage);
  res.init_objective = mode == PlanMode::Rate ? res.metrics.avg_rate : res.metrics.outage_prob.value_or(1.0);
  return res;
}

}  // namespace uavbf
