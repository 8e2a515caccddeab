#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "uavbf/error.hpp"
#include "uavbf/sca_planner.hpp"

namespace uavbf {

namespace {

struct RouteStop {
  Vec2 point;
  double hover = 0.0;  // s
};

// Position at time t along q_I -> stops -> q_F, flying at v_max between
// consecutive points and hovering at each stop.
Vec2 route_position(const Vec2& start, const std::vector<RouteStop>& stops, const Vec2& end, double v_max, double t) {
  Vec2 cur = start;
  auto fly = [&](const Vec2& to) -> bool {
    const double len = (to - cur).norm();
    const double dt = len / v_max;
    if (t <= dt) {
      if (len > 0.0) cur += (to - cur) * (t / dt);
      return true;
    }
    t -= dt;
    cur = to;
    return false;
  };
  for (const auto& s : stops) {
    if (fly(s.point)) return cur;
    if (t <= s.hover) return cur;
    t -= s.hover;
  }
  fly(end);
  return cur;
}

std::vector<Vec2> sample_route(const Scenario& scn, const std::vector<RouteStop>& stops, std::size_t n,
                               double slot_len) {
  std::vector<Vec2> wps(n);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    wps[i] = route_position(scn.q_init, stops, scn.q_final, scn.v_max, slot_len * static_cast<double>(i + 1));
  }
  if (n > 0) wps[n - 1] = scn.q_final;
  return wps;
}

std::size_t slot_count(const SolveConfig& cfg) {
  if (cfg.slots < 1) throw Error(ErrorKind::InvalidParameter, "slot count must be >= 1");
  return static_cast<std::size_t>(cfg.slots);
}

void require_time(double needed, const Scenario& scn, const char* what) {
  if (needed > scn.horizon * (1.0 + 1e-12) + 1e-12) {
    throw Error(ErrorKind::InfeasibleHorizon, std::string(what) + " needs " + std::to_string(needed) +
                                                  " s of flight but the horizon is " + std::to_string(scn.horizon) +
                                                  " s");
  }
}

}  // namespace

const char* to_string(PlanMode mode) { return mode == PlanMode::Rate ? "rate" : "outage"; }

const char* to_string(InitKind kind) {
  switch (kind) {
    case InitKind::SuccessiveHoverFly: return "successive-hover-fly";
    case InitKind::FlyHoverFly: return "fly-hover-fly";
    case InitKind::Direct: return "direct";
  }
  return "unknown";
}

Vec2 max_snr_location(const Scenario& scn, const SolveConfig& cfg) {
  const ChannelGrid grid(scn, cfg.grid_step_m);
  std::size_t best = 0;
  double best_amp = -1.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double* g = grid.gains(i);
    double amp = 0.0;
    for (std::size_t k = 0; k < grid.num_sensors(); ++k) amp += std::sqrt(scn.sensors[k].p_avg * g[k]);
    if (amp > best_amp) {
      best_amp = amp;
      best = i;
    }
  }
  return grid.node(best);
}

double tour_length(const Vec2& start, const std::vector<Vec2>& points, const std::vector<std::size_t>& order,
                   const Vec2& end) {
  double len = 0.0;
  Vec2 cur = start;
  for (std::size_t i : order) {
    len += (points[i] - cur).norm();
    cur = points[i];
  }
  return len + (end - cur).norm();
}

std::vector<std::size_t> shortest_visit_order(const Vec2& start, const std::vector<Vec2>& points, const Vec2& end,
                                              std::size_t limit, bool& exhaustive) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  if (points.size() <= limit) {
    exhaustive = true;
    std::vector<std::size_t> best = order;
    double best_len = tour_length(start, points, order, end);
    while (std::next_permutation(order.begin(), order.end())) {
      const double len = tour_length(start, points, order, end);
      if (len < best_len) {
        best_len = len;
        best = order;
      }
    }
    return best;
  }

  exhaustive = false;
  std::vector<std::size_t> tour;
  std::vector<char> used(points.size(), 0);
  Vec2 cur = start;
  for (std::size_t step = 0; step < points.size(); ++step) {
    std::size_t pick = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (used[i]) continue;
      const double d = (points[i] - cur).norm();
      if (d < best) {
        best = d;
        pick = i;
      }
    }
    used[pick] = 1;
    tour.push_back(pick);
    cur = points[pick];
  }
  bool improved = true;
  while (improved) {
    improved = false;
    double cur_len = tour_length(start, points, tour, end);
    for (std::size_t i = 0; i + 1 < tour.size(); ++i) {
      for (std::size_t j = i + 1; j < tour.size(); ++j) {
        std::vector<std::size_t> cand = tour;
        std::reverse(cand.begin() + static_cast<std::ptrdiff_t>(i), cand.begin() + static_cast<std::ptrdiff_t>(j) + 1);
        const double len = tour_length(start, points, cand, end);
        if (len < cur_len - 1e-12) {
          tour = std::move(cand);
          cur_len = len;
          improved = true;
        }
      }
    }
  }
  return tour;
}

InitTrajectory init_fly_hover_fly(const Scenario& scn, const SolveConfig& cfg) {
  const std::size_t n = slot_count(cfg);
  InitTrajectory init;
  init.kind = InitKind::FlyHoverFly;
  init.slot_len = scn.horizon / static_cast<double>(n);
  const Vec2 fix = max_snr_location(scn, cfg);
  init.fly_time = ((fix - scn.q_init).norm() + (scn.q_final - fix).norm()) / scn.v_max;
  require_time(init.fly_time, scn, "fly-hover-fly");
  const double hover = std::max(0.0, scn.horizon - init.fly_time);
  init.hover_points = {fix};
  init.hover_times = {hover};
  init.waypoints = sample_route(scn, {{fix, hover}}, n, init.slot_len);
  return init;
}

InitTrajectory init_successive_hover_fly(const Scenario& scn, const HoverPlan& hover, const SolveConfig& cfg) {
  if (hover.points.empty()) throw Error(ErrorKind::InvalidParameter, "hover plan has no hover points");
  const std::size_t n = slot_count(cfg);
  InitTrajectory init;
  init.kind = InitKind::SuccessiveHoverFly;
  init.slot_len = scn.horizon / static_cast<double>(n);

  std::vector<Vec2> pts;
  double relaxed_total = 0.0;
  for (const auto& p : hover.points) {
    pts.push_back(p.location);
    relaxed_total += p.duration;
  }
  bool exhaustive = true;
  const auto order = shortest_visit_order(scn.q_init, pts, scn.q_final,
                                          static_cast<std::size_t>(cfg.tsp_exhaustive_limit), exhaustive);
  init.order_exhaustive = exhaustive;
  init.fly_time = tour_length(scn.q_init, pts, order, scn.q_final) / scn.v_max;
  require_time(init.fly_time, scn, "successive hover-and-fly");

  const double available = std::max(0.0, scn.horizon - init.fly_time);
  std::vector<RouteStop> stops;
  for (std::size_t i : order) {
    const double share = relaxed_total > 0.0 ? hover.points[i].duration / relaxed_total
                                             : 1.0 / static_cast<double>(order.size());
    stops.push_back({pts[i], available * share});
    init.hover_points.push_back(pts[i]);
    init.hover_times.push_back(available * share);
  }
  init.waypoints = sample_route(scn, stops, n, init.slot_len);
  return init;
}

InitTrajectory init_direct(const Scenario& scn, const SolveConfig& cfg) {
  const std::size_t n = slot_count(cfg);
  InitTrajectory init;
  init.kind = InitKind::Direct;
  init.slot_len = scn.horizon / static_cast<double>(n);
  init.fly_time = scn.horizon;
  init.waypoints.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double frac = static_cast<double>(i + 1) / static_cast<double>(n);
    init.waypoints[i] = scn.q_init + frac * (scn.q_final - scn.q_init);
  }
  init.waypoints[n - 1] = scn.q_final;
  return init;
}

}  // namespace uavbf
