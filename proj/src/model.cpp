#include "uavbf/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "uavbf/error.hpp"

namespace uavbf {

namespace {

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    std::ostringstream os;
    os << name << " must be positive and finite, got " << value;
    throw Error(ErrorKind::NonPositiveParameter, os.str());
  }
}

}  // namespace

Region bounding_region(const ScenarioSpec& spec) {
  Region r{spec.q_init.x(), spec.q_init.x(), spec.q_init.y(), spec.q_init.y()};
  auto grow = [&r](const Vec2& p) {
    r.x_lo = std::min(r.x_lo, p.x());
    r.x_hi = std::max(r.x_hi, p.x());
    r.y_lo = std::min(r.y_lo, p.y());
    r.y_hi = std::max(r.y_hi, p.y());
  };
  grow(spec.q_final);
  for (const auto& s : spec.sensors) grow(s.position);
  return r;
}

Scenario validate_scenario(const ScenarioSpec& raw) {
  if (raw.sensors.empty()) throw Error(ErrorKind::InvalidParameter, "scenario needs at least one sensor");
  for (std::size_t k = 0; k < raw.sensors.size(); ++k) {
    const auto& s = raw.sensors[k];
    if (!s.position.allFinite()) throw Error(ErrorKind::InvalidParameter, "sensor position must be finite");
    require_positive(s.p_avg, "sensor p_avg");
  }
  require_positive(raw.altitude, "altitude");
  require_positive(raw.v_max, "v_max");
  require_positive(raw.channel.beta0, "beta0");
  require_positive(raw.channel.sigma2, "sigma2");
  if (!std::isfinite(raw.channel.alpha) || raw.channel.alpha < 2.0) {
    throw Error(ErrorKind::InvalidParameter, "path-loss exponent must be >= 2");
  }
  if (!std::isfinite(raw.horizon) || raw.horizon < 0.0) {
    throw Error(ErrorKind::NonPositiveParameter, "horizon must be nonnegative");
  }
  if (!raw.q_init.allFinite() || !raw.q_final.allFinite()) {
    throw Error(ErrorKind::InvalidParameter, "endpoints must be finite");
  }
  if (raw.gamma_min) require_positive(*raw.gamma_min, "gamma_min");

  const double min_time = (raw.q_final - raw.q_init).norm() / raw.v_max;
  if (raw.horizon < min_time * (1.0 - 1e-12)) {
    std::ostringstream os;
    os << "horizon " << raw.horizon << " s is shorter than the minimum flight time " << min_time << " s";
    throw Error(ErrorKind::InfeasibleHorizon, os.str());
  }

  Scenario scn;
  scn.sensors = raw.sensors;
  scn.altitude = raw.altitude;
  scn.v_max = raw.v_max;
  scn.horizon = raw.horizon;
  scn.q_init = raw.q_init;
  scn.q_final = raw.q_final;
  scn.channel = raw.channel;
  scn.gamma_min = raw.gamma_min;
  scn.region = raw.region.value_or(bounding_region(raw));

  const Region& z = scn.region;
  if (!(z.x_lo <= z.x_hi && z.y_lo <= z.y_hi)) throw Error(ErrorKind::InvalidParameter, "region bounds are inverted");
  if (!z.contains(scn.q_init) || !z.contains(scn.q_final)) {
    throw Error(ErrorKind::InvalidParameter, "region must contain both endpoints");
  }
  for (const auto& s : scn.sensors) {
    if (!z.contains(s.position)) throw Error(ErrorKind::InvalidParameter, "region must contain every sensor");
  }
  return scn;
}

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
double watts_to_dbm(double watts) { return 10.0 * std::log10(watts) + 30.0; }
double linear_to_db(double linear) { return 10.0 * std::log10(linear); }

PowerVector::PowerVector(std::vector<double> watts) : watts_(std::move(watts)) {
  for (double w : watts_) {
    if (!std::isfinite(w) || w < 0.0) throw Error(ErrorKind::InvalidParameter, "powers must be finite and >= 0");
  }
}

double PowerVector::total() const {
  double sum = 0.0;
  for (double w : watts_) sum += w;
  return sum;
}

double distance(const Vec2& q, std::size_t k, const Scenario& scn) {
  const double h = scn.altitude;
  return std::sqrt((q - scn.sensors[k].position).squaredNorm() + h * h);
}

double channel_amplitude(const Vec2& q, std::size_t k, const Scenario& scn) {
  const double d = distance(q, k, scn);
  return std::sqrt(scn.channel.beta0 * std::pow(d, -scn.channel.alpha));
}

double snr(const Vec2& q, const PowerVector& p, const Scenario& scn) {
  double amp = 0.0;
  for (std::size_t k = 0; k < scn.num_sensors(); ++k) {
    if (p[k] > 0.0) amp += std::sqrt(p[k]) * channel_amplitude(q, k, scn);
  }
  return amp * amp / scn.channel.sigma2;
}

double rate(const Vec2& q, const PowerVector& p, const Scenario& scn) { return std::log2(1.0 + snr(q, p, scn)); }

int outage_indicator_from_snr(double snr_value, const Scenario& scn) {
  if (!scn.gamma_min) throw Error(ErrorKind::MissingThreshold, "scenario has no gamma_min");
  return snr_value < *scn.gamma_min ? 1 : 0;
}

int outage_indicator(const Vec2& q, const PowerVector& p, const Scenario& scn) {
  if (!scn.gamma_min) throw Error(ErrorKind::MissingThreshold, "scenario has no gamma_min");
  return outage_indicator_from_snr(snr(q, p, scn), scn);
}

std::vector<double> normalized_gains(const Vec2& q, const Scenario& scn) {
  std::vector<double> g(scn.num_sensors());
  const double h2 = scn.altitude * scn.altitude;
  const double scale = scn.channel.beta0 / scn.channel.sigma2;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double d2 = (q - scn.sensors[k].position).squaredNorm() + h2;
    g[k] = scale * std::pow(d2, -0.5 * scn.channel.alpha);
  }
  return g;
}

TrajectoryMetrics evaluate_plan(const DiscretePlan& plan, const Scenario& scn, bool require_outage) {
  if (require_outage && !scn.gamma_min) throw Error(ErrorKind::MissingThreshold, "scenario has no gamma_min");
  TrajectoryMetrics m;
  const std::size_t n = plan.n_slots();
  m.per_slot_snr.reserve(n);
  double rate_sum = 0.0;
  std::size_t outages = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = snr(plan.waypoints[i], plan.powers[i], scn);
    m.per_slot_snr.push_back(s);
    rate_sum += std::log2(1.0 + s);
    if (scn.gamma_min && s < *scn.gamma_min) ++outages;
  }
  if (n > 0) m.avg_rate = rate_sum / static_cast<double>(n);
  if (scn.gamma_min) m.outage_prob = n > 0 ? static_cast<double>(outages) / static_cast<double>(n) : 1.0;
  return m;
}

std::string check_plan(const DiscretePlan& plan, const Scenario& scn, double tol) {
  std::ostringstream os;
  const std::size_t n = plan.n_slots();
  if (n == 0) return "plan has no slots";
  if (plan.powers.size() != n) return "powers and waypoints disagree in length";
  const double step = scn.v_max * plan.slot_len * (1.0 + tol) + tol;
  Vec2 prev = scn.q_init;
  for (std::size_t i = 0; i < n; ++i) {
    const double len = (plan.waypoints[i] - prev).norm();
    if (len > step) {
      os << "slot " << i + 1 << " moves " << len << " m > " << scn.v_max * plan.slot_len << " m";
      return os.str();
    }
    prev = plan.waypoints[i];
  }
  if ((plan.waypoints.back() - scn.q_final).norm() > tol) return "final waypoint differs from q_final";
  for (std::size_t k = 0; k < scn.num_sensors(); ++k) {
    double sum = 0.0;
    for (const auto& p : plan.powers) {
      if (p.size() != scn.num_sensors()) return "power vector has wrong size";
      sum += p[k];
    }
    if (sum / static_cast<double>(n) > scn.sensors[k].p_avg + kPowerSlack) {
      os << "sensor " << k << " exceeds its average power budget: " << sum / static_cast<double>(n) << " W";
      return os.str();
    }
  }
  return {};
}

}  // namespace uavbf
