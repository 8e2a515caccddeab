#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "uavbf/convex_core.hpp"
#include "uavbf/error.hpp"

namespace uavbf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Constraints touching more variables than this enter the Newton system as
// rank-one Woodbury updates instead of dense outer products.
constexpr std::size_t kLowRankSupport = 32;
constexpr double kBarrierGrowth = 10.0;
constexpr double kCenteringTol = 1e-9;
constexpr int kMaxCenteringSteps = 200;

using Eigen::MatrixXd;
using Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

double bound_at(const std::vector<double>& v, int j, double fallback) {
  return v.empty() ? fallback : v[static_cast<std::size_t>(j)];
}

VectorXd gather(const VectorXd& x, const std::vector<int>& support) {
  VectorXd local(static_cast<Eigen::Index>(support.size()));
  for (std::size_t i = 0; i < support.size(); ++i) local(static_cast<Eigen::Index>(i)) = x(support[i]);
  return local;
}

bool eval_term(const SmoothTerm& term, const VectorXd& x, int order, TermEval& out) {
  out.order = order;
  if (!term.eval(gather(x, term.support), out)) return false;
  return std::isfinite(out.value);
}

struct BarrierOptions {
  std::function<bool(const VectorXd&)> stop_early;
  std::function<bool(const VectorXd&, double gap)> give_up;
};

class BarrierSolver {
 public:
  BarrierSolver(const SmoothProgram& prog, const SolveConfig& cfg, BarrierOptions opts)
      : prog_(prog), cfg_(cfg), opts_(std::move(opts)), n_(prog.dim) {
    obj_evals_.resize(prog.objective.size());
    con_evals_.resize(prog.constraints.size());
    m_total_ = static_cast<double>(prog.constraints.size());
    for (int j = 0; j < n_; ++j) {
      if (std::isfinite(lower(j))) m_total_ += 1.0;
      if (std::isfinite(upper(j))) m_total_ += 1.0;
    }
  }

  SmoothResult run(VectorXd x) {
    SmoothResult res;
    if (!std::isfinite(barrier_value(x, 1.0))) {
      throw Error(ErrorKind::NoStrictlyFeasibleStart, "starting point is not strictly feasible");
    }
    const double f0 = objective_value(x);
    double t = m_total_ > 0.0 ? std::max(1e-6, m_total_ / (1.0 + std::abs(f0))) : 1.0;
    int steps = 0;
    bool stopped = false;
    while (true) {
      const bool ok = center(x, t, steps, stopped);
      if (stopped) break;
      if (!ok) {
        res.status = SmoothStatus::IterationLimit;
        break;
      }
      const double f = objective_value(x);
      const double gap = m_total_ / t;
      if (opts_.give_up && opts_.give_up(x, gap)) break;
      if (gap <= cfg_.tol_obj * std::max(1.0, std::abs(f))) break;
      t *= kBarrierGrowth;
    }
    res.x = x;
    res.objective = objective_value(x);
    res.newton_steps = steps;
    res.barrier_t = t;
    res.multipliers.resize(prog_.constraints.size());
    TermEval e;
    for (std::size_t i = 0; i < prog_.constraints.size(); ++i) {
      eval_term(prog_.constraints[i], x, 0, e);
      res.multipliers[i] = 1.0 / (t * e.value);
    }
    return res;
  }

 private:
  double lower(int j) const { return bound_at(prog_.lower, j, -kInf); }
  double upper(int j) const { return bound_at(prog_.upper, j, kInf); }

  double objective_value(const VectorXd& x) {
    double f = 0.0;
    TermEval e;
    for (const auto& term : prog_.objective) {
      if (!eval_term(term, x, 0, e)) return -kInf;
      f += e.value;
    }
    return f;
  }

  // phi_t(x) = -t f(x) - sum log g_i(x) - sum log box slacks; +inf outside the domain.
  double barrier_value(const VectorXd& x, double t) {
    double phi = 0.0;
    for (int j = 0; j < n_; ++j) {
      const double lo = lower(j), hi = upper(j);
      if (std::isfinite(lo)) {
        if (!(x(j) > lo)) return kInf;
        phi -= std::log(x(j) - lo);
      }
      if (std::isfinite(hi)) {
        if (!(x(j) < hi)) return kInf;
        phi -= std::log(hi - x(j));
      }
    }
    TermEval e;
    for (const auto& term : prog_.constraints) {
      if (!eval_term(term, x, 0, e) || !(e.value > 0.0)) return kInf;
      phi -= std::log(e.value);
    }
    const double f = objective_value(x);
    if (!std::isfinite(f)) return kInf;
    return phi - t * f;
  }

  // Gradient and Newton direction of phi_t at x. Returns false when x is
  // outside the domain.
  bool newton_direction(const VectorXd& x, double t, VectorXd& grad, VectorXd& dir) {
    grad = VectorXd::Zero(n_);
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(n_) * 8);
    std::vector<VectorXd> low_rank;

    for (int j = 0; j < n_; ++j) {
      double h = 0.0;
      const double lo = lower(j), hi = upper(j);
      if (std::isfinite(lo)) {
        const double s = x(j) - lo;
        grad(j) -= 1.0 / s;
        h += 1.0 / (s * s);
      }
      if (std::isfinite(hi)) {
        const double s = hi - x(j);
        grad(j) += 1.0 / s;
        h += 1.0 / (s * s);
      }
      trips.emplace_back(j, j, h);
    }

    for (std::size_t i = 0; i < prog_.objective.size(); ++i) {
      const auto& term = prog_.objective[i];
      TermEval& e = obj_evals_[i];
      if (!eval_term(term, x, 2, e)) return false;
      const auto& sup = term.support;
      for (std::size_t a = 0; a < sup.size(); ++a) {
        grad(sup[a]) -= t * e.grad(static_cast<Eigen::Index>(a));
        for (std::size_t b = 0; b < sup.size(); ++b) {
          const double v = -t * e.hess(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
          if (v != 0.0) trips.emplace_back(sup[a], sup[b], v);
        }
      }
    }

    for (std::size_t i = 0; i < prog_.constraints.size(); ++i) {
      const auto& term = prog_.constraints[i];
      TermEval& e = con_evals_[i];
      if (!eval_term(term, x, 2, e) || !(e.value > 0.0)) return false;
      const auto& sup = term.support;
      const double g = e.value;
      const bool wide = sup.size() > kLowRankSupport;
      VectorXd u;
      if (wide) u = VectorXd::Zero(n_);
      for (std::size_t a = 0; a < sup.size(); ++a) {
        const double ga = e.grad(static_cast<Eigen::Index>(a));
        grad(sup[a]) -= ga / g;
        if (wide) u(sup[a]) = ga / g;
        for (std::size_t b = 0; b < sup.size(); ++b) {
          double v = -e.hess(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) / g;
          if (!wide) v += ga * e.grad(static_cast<Eigen::Index>(b)) / (g * g);
          if (v != 0.0) trips.emplace_back(sup[a], sup[b], v);
        }
      }
      if (wide) low_rank.push_back(std::move(u));
    }

    SparseMatrix hess(n_, n_);
    hess.setFromTriplets(trips.begin(), trips.end());
    VectorXd diag = hess.diagonal();
    double max_diag = diag.cwiseAbs().maxCoeff();
    if (max_diag == 0.0) max_diag = 1.0;

    // The sparsity pattern rarely changes between Newton steps; redo the
    // symbolic analysis only when it does.
    hess.makeCompressed();
    const auto nnz = static_cast<std::size_t>(hess.nonZeros());
    if (!pattern_ready_ || !std::equal(hess.outerIndexPtr(), hess.outerIndexPtr() + n_ + 1, outer_.begin()) ||
        inner_.size() != nnz || !std::equal(hess.innerIndexPtr(), hess.innerIndexPtr() + nnz, inner_.begin())) {
      ldlt_.analyzePattern(hess);
      outer_.assign(hess.outerIndexPtr(), hess.outerIndexPtr() + n_ + 1);
      inner_.assign(hess.innerIndexPtr(), hess.innerIndexPtr() + nnz);
      pattern_ready_ = true;
    }
    auto& ldlt = ldlt_;
    double shift = 0.0;
    for (int attempt = 0; attempt < 12; ++attempt) {
      if (shift > 0.0) {
        for (int j = 0; j < n_; ++j) hess.coeffRef(j, j) = diag(j) + shift;
      }
      ldlt.factorize(hess);
      if (ldlt.info() == Eigen::Success && (ldlt.vectorD().array() > 0.0).all()) break;
      shift = shift == 0.0 ? 1e-12 * max_diag : shift * 100.0;
    }
    if (ldlt.info() != Eigen::Success) return false;

    VectorXd rhs = -grad;
    VectorXd z = ldlt.solve(rhs);
    if (!low_rank.empty()) {
      const auto r = static_cast<Eigen::Index>(low_rank.size());
      MatrixXd u(n_, r);
      for (Eigen::Index c = 0; c < r; ++c) u.col(c) = low_rank[static_cast<std::size_t>(c)];
      MatrixXd y = ldlt.solve(u);
      MatrixXd cap = MatrixXd::Identity(r, r) + u.transpose() * y;
      VectorXd w = cap.ldlt().solve(u.transpose() * z);
      z -= y * w;
    }
    dir = z;
    return dir.allFinite();
  }

  // Damped Newton on phi_t. Returns false when the step budget is exhausted.
  bool center(VectorXd& x, double t, int& steps, bool& stopped) {
    VectorXd grad, dir;
    double phi = barrier_value(x, t);
    for (int it = 0; it < kMaxCenteringSteps; ++it) {
      if (steps >= cfg_.max_iters) return false;
      if (!newton_direction(x, t, grad, dir)) return true;
      ++steps;
      const double decrement = -grad.dot(dir);
      if (!(decrement > 0.0) || 0.5 * decrement <= kCenteringTol) return true;

      double step = 1.0;
      for (int j = 0; j < n_; ++j) {
        const double lo = lower(j), hi = upper(j);
        if (dir(j) < 0.0 && std::isfinite(lo)) step = std::min(step, 0.99 * (lo - x(j)) / dir(j));
        if (dir(j) > 0.0 && std::isfinite(hi)) step = std::min(step, 0.99 * (hi - x(j)) / dir(j));
      }
      bool moved = false;
      const double phi_prev = phi;
      while (step > 1e-14) {
        VectorXd trial = x + step * dir;
        const double phi_trial = barrier_value(trial, t);
        if (std::isfinite(phi_trial) && phi_trial <= phi - 0.25 * step * decrement) {
          x = std::move(trial);
          phi = phi_trial;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (opts_.stop_early && opts_.stop_early(x)) {
        stopped = true;
        return true;
      }
      if (!moved) return true;
      // Decrease at roundoff level: the center is as good as it gets.
      if (phi_prev - phi <= 1e-13 * std::max(1.0, std::abs(phi))) return true;
    }
    return true;
  }

  const SmoothProgram& prog_;
  const SolveConfig& cfg_;
  BarrierOptions opts_;
  int n_;
  double m_total_ = 0.0;
  std::vector<TermEval> obj_evals_;
  std::vector<TermEval> con_evals_;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
  bool pattern_ready_ = false;
  std::vector<int> outer_, inner_;
};

bool strictly_inside_box(const SmoothProgram& prog, const VectorXd& x) {
  for (int j = 0; j < prog.dim; ++j) {
    if (!(x(j) > bound_at(prog.lower, j, -kInf)) || !(x(j) < bound_at(prog.upper, j, kInf))) return false;
  }
  return true;
}

VectorXd clamp_into_box(const SmoothProgram& prog, VectorXd x) {
  for (int j = 0; j < prog.dim; ++j) {
    const double lo = bound_at(prog.lower, j, -kInf);
    const double hi = bound_at(prog.upper, j, kInf);
    if (std::isfinite(lo) && std::isfinite(hi)) {
      const double margin = 1e-3 * (hi - lo);
      x(j) = std::clamp(x(j), lo + margin, hi - margin);
    } else if (std::isfinite(lo)) {
      x(j) = std::max(x(j), lo + std::max(1e-6, 1e-6 * std::abs(lo)));
    } else if (std::isfinite(hi)) {
      x(j) = std::min(x(j), hi - std::max(1e-6, 1e-6 * std::abs(hi)));
    }
  }
  return x;
}

}  // namespace

void SolveConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorKind::InvalidParameter, std::string(name) + " must be > 0");
  };
  positive(tol_obj, "tol_obj");
  positive(tol_feas, "tol_feas");
  positive(grid_step_m, "grid_step_m");
  positive(dual_floor, "dual_floor");
  positive(dual_tol, "dual_tol");
  positive(tie_tol, "tie_tol");
  positive(duality_gap_tol, "duality_gap_tol");
  positive(kappa_tol, "kappa_tol");
  positive(kappa_bisect_tol, "kappa_bisect_tol");
  positive(sca_tol, "sca_tol");
  if (max_iters < 1) throw Error(ErrorKind::InvalidParameter, "max_iters must be >= 1");
  if (dual_iters_per_dim2 < 1) throw Error(ErrorKind::InvalidParameter, "dual_iters_per_dim2 must be >= 1");
  if (sca_max_rounds < 1) throw Error(ErrorKind::InvalidParameter, "sca_max_rounds must be >= 1");
  if (slots < 1) throw Error(ErrorKind::InvalidParameter, "slots must be >= 1");
  if (tsp_exhaustive_limit < 1) throw Error(ErrorKind::InvalidParameter, "tsp_exhaustive_limit must be >= 1");
}

double evaluate_objective(const SmoothProgram& prog, const VectorXd& x) {
  double f = 0.0;
  TermEval e;
  for (const auto& term : prog.objective) {
    if (!eval_term(term, x, 0, e)) return -kInf;
    f += e.value;
  }
  return f;
}

double min_constraint(const SmoothProgram& prog, const VectorXd& x) {
  double m = kInf;
  TermEval e;
  for (const auto& term : prog.constraints) {
    if (!eval_term(term, x, 0, e)) return -kInf;
    m = std::min(m, e.value);
  }
  return m;
}

SmoothResult maximize_smooth(const SmoothProgram& prog, const VectorXd& x0, const SolveConfig& cfg) {
  if (x0.size() != prog.dim) throw Error(ErrorKind::InvalidParameter, "starting point has wrong dimension");
  if (!strictly_inside_box(prog, x0) || !(min_constraint(prog, x0) > 0.0)) {
    throw Error(ErrorKind::NoStrictlyFeasibleStart, "starting point is not strictly feasible");
  }
  BarrierSolver solver(prog, cfg, {});
  return solver.run(x0);
}

FeasibilityResult find_strictly_feasible(const SmoothProgram& prog, const VectorXd& guess, const SolveConfig& cfg) {
  FeasibilityResult out;
  for (int j = 0; j < prog.dim; ++j) {
    if (!(bound_at(prog.lower, j, -kInf) < bound_at(prog.upper, j, kInf))) {
      out.x = guess;
      out.min_slack = -kInf;
      return out;
    }
  }
  VectorXd x = clamp_into_box(prog, guess);
  const double slack0 = min_constraint(prog, x);
  if (!std::isfinite(slack0) && slack0 < 0.0) {
    out.x = x;
    out.min_slack = slack0;
    return out;
  }
  if (slack0 > 0.0) {
    out.strictly_feasible = true;
    out.x = x;
    out.min_slack = slack0;
    return out;
  }

  // Augmented problem in (x, s): maximize s  s.t.  g_i(x) - s >= 0.
  const int n = prog.dim;
  SmoothProgram aug;
  aug.dim = n + 1;
  aug.lower = prog.lower.empty() ? std::vector<double>(static_cast<std::size_t>(n), -kInf) : prog.lower;
  aug.upper = prog.upper.empty() ? std::vector<double>(static_cast<std::size_t>(n), kInf) : prog.upper;
  aug.lower.push_back(-kInf);
  aug.upper.push_back(kInf);
  aug.objective.push_back({{n}, [](const VectorXd& local, TermEval& e) {
                             e.value = local(0);
                             if (e.order > 0) {
                               e.grad = VectorXd::Ones(1);
                               e.hess = MatrixXd::Zero(1, 1);
                             }
                             return true;
                           }});
  for (const auto& term : prog.constraints) {
    SmoothTerm wrapped;
    wrapped.support = term.support;
    wrapped.support.push_back(n);
    const SmoothTerm* inner = &term;
    wrapped.eval = [inner](const VectorXd& local, TermEval& e) {
      const auto m = local.size() - 1;
      TermEval ie;
      ie.order = e.order;
      if (!inner->eval(local.head(m), ie)) return false;
      e.value = ie.value - local(m);
      if (e.order > 0) {
        e.grad.resize(m + 1);
        e.grad.head(m) = ie.grad;
        e.grad(m) = -1.0;
        e.hess = MatrixXd::Zero(m + 1, m + 1);
        e.hess.topLeftCorner(m, m) = ie.hess;
      }
      return true;
    };
    aug.constraints.push_back(std::move(wrapped));
  }

  VectorXd xs(n + 1);
  xs.head(n) = x;
  xs(n) = slack0 - std::max(1.0, std::abs(slack0));

  BarrierOptions opts;
  opts.stop_early = [n](const VectorXd& z) { return z(n) > 0.0; };
  opts.give_up = [n](const VectorXd& z, double gap) { return z(n) + gap < 0.0; };
  BarrierSolver solver(aug, cfg, opts);
  const SmoothResult res = solver.run(xs);

  out.x = res.x.head(n);
  out.min_slack = min_constraint(prog, out.x);
  out.strictly_feasible = out.min_slack > 0.0 && strictly_inside_box(prog, out.x);
  return out;
}

SmoothResult maximize_smooth_from(const SmoothProgram& prog, const VectorXd& guess, const SolveConfig& cfg) {
  VectorXd start = guess;
  if (!strictly_inside_box(prog, start) || !(min_constraint(prog, start) > 0.0) ||
      !std::isfinite(evaluate_objective(prog, start))) {
    const FeasibilityResult feas = find_strictly_feasible(prog, guess, cfg);
    if (!feas.strictly_feasible) {
      throw Error(ErrorKind::NoStrictlyFeasibleStart, "feasibility phase found no strictly feasible point");
    }
    start = feas.x;
  }
  BarrierSolver solver(prog, cfg, {});
  return solver.run(start);
}

}  // namespace uavbf
