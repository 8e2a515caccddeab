#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "uavbf/model.hpp"
#include "uavbf/scenario_io.hpp"

namespace fixtures {

inline std::filesystem::path scenario_path(const char* name) {
  return std::filesystem::path(UAVBF_SOURCE_DIR) / "scenarios" / name;
}

inline uavbf::ChannelParams field_channel() {
  return {uavbf::db_to_linear(-30.0), uavbf::dbm_to_watts(-60.0), 2.8};
}

/// Sensors at (+-d/2, 0); the UAV flies between them inside the square
/// region of half-width d/2.
inline uavbf::Scenario pair(double d, double horizon, double p_dbm = 30.0, std::optional<double> gamma_db = {}) {
  uavbf::ScenarioSpec s;
  s.sensors = {{{-d / 2, 0.0}, uavbf::dbm_to_watts(p_dbm)}, {{d / 2, 0.0}, uavbf::dbm_to_watts(p_dbm)}};
  s.altitude = 50.0;
  s.v_max = 40.0;
  s.horizon = horizon;
  s.q_init = {-d / 2, 0.0};
  s.q_final = {d / 2, 0.0};
  s.channel = field_channel();
  if (gamma_db) s.gamma_min = uavbf::db_to_linear(*gamma_db);
  s.region = uavbf::Region{-d / 2, d / 2, -d / 2, d / 2};
  return uavbf::validate_scenario(s);
}

/// One sensor at the origin, region [-half, half]^2.
inline uavbf::Scenario single(double horizon, double half = 10.0, double p_dbm = 30.0,
                              std::optional<double> gamma_db = {}) {
  uavbf::ScenarioSpec s;
  s.sensors = {{{0.0, 0.0}, uavbf::dbm_to_watts(p_dbm)}};
  s.altitude = 50.0;
  s.v_max = 40.0;
  s.horizon = horizon;
  s.q_init = {-half, 0.0};
  s.q_final = {half, 0.0};
  s.channel = field_channel();
  if (gamma_db) s.gamma_min = uavbf::db_to_linear(*gamma_db);
  s.region = uavbf::Region{-half, half, -half, half};
  return uavbf::validate_scenario(s);
}

}  // namespace fixtures
