#pragma once

// Scenario description and the physical-layer formulas shared by every planner.
//
// All quantities are linear (watts, linear gains, meters, seconds). Decibel
// values only appear in the scenario file and are converted on load.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace uavbf {

using Vec2 = Eigen::Vector2d;

/// Absolute slack (watts) tolerated on average-power checks.
inline constexpr double kPowerSlack = 1e-9;

struct SensorSpec {
  Vec2 position = Vec2::Zero();
  double p_avg = 0.0;  // W
};

struct ChannelParams {
  double beta0 = 1e-3;   // linear gain at 1 m
  double sigma2 = 1e-9;  // W
  double alpha = 2.8;    // path-loss exponent
};

struct Region {
  double x_lo = 0.0, x_hi = 0.0, y_lo = 0.0, y_hi = 0.0;

  bool contains(const Vec2& p, double tol = 1e-9) const {
    return p.x() >= x_lo - tol && p.x() <= x_hi + tol && p.y() >= y_lo - tol && p.y() <= y_hi + tol;
  }
};

/// Unvalidated scenario as read from configuration.
struct ScenarioSpec {
  std::vector<SensorSpec> sensors;
  double altitude = 0.0;
  double v_max = 0.0;
  double horizon = 0.0;
  Vec2 q_init = Vec2::Zero();
  Vec2 q_final = Vec2::Zero();
  ChannelParams channel;
  std::optional<double> gamma_min;  // linear SNR threshold
  std::optional<Region> region;
};

/// Validated, immutable scenario. Construct through validate_scenario().
struct Scenario {
  std::vector<SensorSpec> sensors;
  double altitude = 0.0;
  double v_max = 0.0;
  double horizon = 0.0;
  Vec2 q_init = Vec2::Zero();
  Vec2 q_final = Vec2::Zero();
  ChannelParams channel;
  std::optional<double> gamma_min;
  Region region;

  std::size_t num_sensors() const { return sensors.size(); }
  double min_flight_time() const { return (q_final - q_init).norm() / v_max; }
};

/// Bounding box of the sensors and both endpoints.
Region bounding_region(const ScenarioSpec& spec);

/// Enforces the scenario invariants; defaults the region to the bounding box.
/// Throws Error(InfeasibleHorizon | NonPositiveParameter | InvalidParameter).
Scenario validate_scenario(const ScenarioSpec& raw);

double dbm_to_watts(double dbm);
double db_to_linear(double db);
double watts_to_dbm(double watts);
double linear_to_db(double linear);

/// Nonnegative, finite per-sensor transmit powers in watts.
class PowerVector {
 public:
  PowerVector() = default;
  explicit PowerVector(std::vector<double> watts);
  static PowerVector zeros(std::size_t k) { return PowerVector(std::vector<double>(k, 0.0)); }

  std::size_t size() const { return watts_.size(); }
  double operator[](std::size_t k) const { return watts_[k]; }
  std::span<const double> values() const { return watts_; }
  double total() const;

 private:
  std::vector<double> watts_;
};

double distance(const Vec2& q, std::size_t k, const Scenario& scn);
/// sqrt(beta0 * d^-alpha), the real channel amplitude after phase alignment.
double channel_amplitude(const Vec2& q, std::size_t k, const Scenario& scn);
/// Coherent-combining SNR, (sum_k sqrt(P_k) h_k)^2 / sigma^2.
double snr(const Vec2& q, const PowerVector& p, const Scenario& scn);
double rate(const Vec2& q, const PowerVector& p, const Scenario& scn);
/// 1 if snr < gamma_min, else 0. Throws MissingThreshold without a threshold.
int outage_indicator(const Vec2& q, const PowerVector& p, const Scenario& scn);
int outage_indicator_from_snr(double snr_value, const Scenario& scn);

/// Per-sensor channel gains beta0 d^-alpha / sigma^2 at q (SNR-normalized).
std::vector<double> normalized_gains(const Vec2& q, const Scenario& scn);

struct DiscretePlan {
  double slot_len = 0.0;             // s
  std::vector<Vec2> waypoints;       // q[1..N]
  std::vector<PowerVector> powers;   // P[1..N], each of size K

  std::size_t n_slots() const { return waypoints.size(); }
};

struct TrajectoryMetrics {
  double avg_rate = 0.0;               // bps/Hz
  std::optional<double> outage_prob;   // present when the scenario has a threshold
  std::vector<double> per_slot_snr;
};

/// Time averages of rate and outage over the slots. With require_outage the
/// call throws MissingThreshold when the scenario has no gamma_min.
TrajectoryMetrics evaluate_plan(const DiscretePlan& plan, const Scenario& scn, bool require_outage = false);

/// Speed, endpoint and budget checks of a discrete plan. Returns an empty
/// string when the plan is valid, otherwise a description of the first violation.
std::string check_plan(const DiscretePlan& plan, const Scenario& scn, double tol = 1e-6);

}  // namespace uavbf
