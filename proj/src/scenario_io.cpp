#include "uavbf/scenario_io.hpp"

#include <fstream>
#include <sstream>

#include "uavbf/error.hpp"

namespace uavbf {

namespace {

using nlohmann::json;

const json& require(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) throw Error(ErrorKind::ConfigError, std::string("missing key '") + key + "'");
  return obj.at(key);
}

double number(const json& obj, const char* key) {
  const json& v = require(obj, key);
  if (!v.is_number()) throw Error(ErrorKind::ConfigError, std::string("key '") + key + "' must be a number");
  return v.get<double>();
}

Vec2 point(const json& obj, const char* key) {
  const json& v = require(obj, key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw Error(ErrorKind::ConfigError, std::string("key '") + key + "' must be [x, y]");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

}  // namespace

ScenarioSpec parse_scenario_spec(const json& doc) {
  ScenarioSpec spec;
  const json& sensors = require(doc, "sensors");
  if (!sensors.is_array()) throw Error(ErrorKind::ConfigError, "'sensors' must be an array");
  for (const auto& s : sensors) {
    SensorSpec sensor;
    sensor.position = {number(s, "x_m"), number(s, "y_m")};
    sensor.p_avg = dbm_to_watts(number(s, "p_avg_dbm"));
    spec.sensors.push_back(sensor);
  }

  const json& uav = require(doc, "uav");
  spec.altitude = number(uav, "altitude_m");
  spec.v_max = number(uav, "v_max_mps");
  spec.horizon = number(uav, "horizon_s");
  spec.q_init = point(uav, "q_init_m");
  spec.q_final = point(uav, "q_final_m");

  const json& channel = require(doc, "channel");
  spec.channel.beta0 = db_to_linear(number(channel, "beta0_db"));
  spec.channel.sigma2 = dbm_to_watts(number(channel, "sigma2_dbm"));
  spec.channel.alpha = number(channel, "alpha");

  if (doc.contains("gamma_min_db") && !doc.at("gamma_min_db").is_null()) {
    spec.gamma_min = db_to_linear(number(doc, "gamma_min_db"));
  }
  if (doc.contains("region_m") && !doc.at("region_m").is_null()) {
    const json& r = doc.at("region_m");
    if (!r.is_array() || r.size() != 4) throw Error(ErrorKind::ConfigError, "'region_m' must be [x_lo, x_hi, y_lo, y_hi]");
    for (const auto& v : r) {
      if (!v.is_number()) throw Error(ErrorKind::ConfigError, "'region_m' entries must be numbers");
    }
    spec.region = Region{r[0].get<double>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>()};
  }
  return spec;
}

Scenario parse_scenario(const json& doc) { return validate_scenario(parse_scenario_spec(doc)); }

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot open scenario file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, "malformed scenario file " + path.string() + ": " + e.what());
  }
  return parse_scenario(doc);
}

json scenario_to_json(const Scenario& scn) {
  json doc;
  json sensors = json::array();
  for (const auto& s : scn.sensors) {
    sensors.push_back({{"x_m", s.position.x()}, {"y_m", s.position.y()}, {"p_avg_dbm", watts_to_dbm(s.p_avg)}});
  }
  doc["sensors"] = sensors;
  doc["uav"] = {{"altitude_m", scn.altitude},
                {"v_max_mps", scn.v_max},
                {"horizon_s", scn.horizon},
                {"q_init_m", {scn.q_init.x(), scn.q_init.y()}},
                {"q_final_m", {scn.q_final.x(), scn.q_final.y()}}};
  doc["channel"] = {{"beta0_db", linear_to_db(scn.channel.beta0)},
                    {"sigma2_dbm", watts_to_dbm(scn.channel.sigma2)},
                    {"alpha", scn.channel.alpha}};
  if (scn.gamma_min) doc["gamma_min_db"] = linear_to_db(*scn.gamma_min);
  doc["region_m"] = {scn.region.x_lo, scn.region.x_hi, scn.region.y_lo, scn.region.y_hi};
  return doc;
}

}  // namespace uavbf
