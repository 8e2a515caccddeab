#include <cstdio>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>

#include <openssl/evp.h>

#include "uavbf/bench.hpp"

namespace uavbf::bench {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_num(const std::string& field, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(field, &used);
    if (used != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::ConfigError, "line " + std::to_string(line_no) + ": bad number '" + field + "'");
  }
}

// Data rows of a CSV stream with the header checked against `expected`.
std::vector<std::vector<std::string>> read_rows(std::istream& is, const std::vector<std::string>& expected) {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorKind::ConfigError, "empty plan file");
  if (split_csv(line) != expected) throw Error(ErrorKind::ConfigError, "unexpected plan header '" + line + "'");
  std::vector<std::vector<std::string>> rows;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv(line);
    if (fields.size() != expected.size()) {
      throw Error(ErrorKind::ConfigError, "line " + std::to_string(line_no) + ": expected " +
                                              std::to_string(expected.size()) + " fields");
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

std::vector<std::string> hover_header(std::size_t k) {
  std::vector<std::string> h{"x_m", "y_m", "duration_s"};
  for (std::size_t i = 0; i < k; ++i) h.push_back("p" + std::to_string(i + 1) + "_w");
  return h;
}

std::vector<std::string> discrete_header(std::size_t k) {
  std::vector<std::string> h{"n", "t_s", "x_m", "y_m"};
  for (std::size_t i = 0; i < k; ++i) h.push_back("p" + std::to_string(i + 1) + "_w");
  h.insert(h.end(), {"snr_linear", "rate_bpshz", "outage_flag"});
  return h;
}

void write_header(const std::vector<std::string>& h, std::ostream& os) {
  for (std::size_t i = 0; i < h.size(); ++i) os << (i ? "," : "") << h[i];
  os << '\n';
}

}  // namespace

void write_hover_plan_csv(const HoverPlan& plan, std::size_t num_sensors, std::ostream& os) {
  write_header(hover_header(num_sensors), os);
  for (const auto& p : plan.points) {
    os << num(p.location.x()) << ',' << num(p.location.y()) << ',' << num(p.duration);
    for (std::size_t k = 0; k < num_sensors; ++k) os << ',' << num(p.powers[k]);
    os << '\n';
  }
  // The outage row carries only a duration.
  os << ",," << num(plan.outage_duration);
  for (std::size_t k = 0; k < num_sensors; ++k) os << ',';
  os << '\n';
}

HoverPlan read_hover_plan_csv(std::istream& is, std::size_t num_sensors) {
  HoverPlan plan;
  bool seen_outage = false;
  std::size_t line_no = 1;
  for (const auto& row : read_rows(is, hover_header(num_sensors))) {
    ++line_no;
    if (row[0].empty() && row[1].empty()) {
      if (seen_outage) throw Error(ErrorKind::ConfigError, "more than one outage row");
      plan.outage_duration = parse_num(row[2], line_no);
      seen_outage = true;
      continue;
    }
    HoverPoint p;
    p.location = {parse_num(row[0], line_no), parse_num(row[1], line_no)};
    p.duration = parse_num(row[2], line_no);
    std::vector<double> w;
    for (std::size_t k = 0; k < num_sensors; ++k) w.push_back(parse_num(row[3 + k], line_no));
    p.powers = PowerVector(std::move(w));
    plan.points.push_back(std::move(p));
  }
  return plan;
}

double hover_plan_objective(const HoverPlan& plan, const Scenario& scn, bool outage_mode) {
  if (outage_mode) return plan.outage_duration / scn.horizon;
  double total = 0.0;
  for (const auto& p : plan.points) total += p.duration * rate(p.location, p.powers, scn);
  return total / scn.horizon;
}

void write_discrete_plan_csv(const DiscretePlan& plan, const Scenario& scn, std::ostream& os) {
  const std::size_t k = scn.num_sensors();
  write_header(discrete_header(k), os);
  for (std::size_t n = 0; n < plan.n_slots(); ++n) {
    const double s = snr(plan.waypoints[n], plan.powers[n], scn);
    os << n + 1 << ',' << num(plan.slot_len * static_cast<double>(n + 1)) << ',' << num(plan.waypoints[n].x()) << ','
       << num(plan.waypoints[n].y());
    for (std::size_t i = 0; i < k; ++i) os << ',' << num(plan.powers[n][i]);
    os << ',' << num(s) << ',' << num(std::log2(1.0 + s)) << ',';
    if (scn.gamma_min) os << outage_indicator_from_snr(s, scn);
    os << '\n';
  }
}

DiscretePlan read_discrete_plan_csv(std::istream& is, const Scenario& scn) {
  const std::size_t k = scn.num_sensors();
  DiscretePlan plan;
  std::size_t line_no = 1;
  for (const auto& row : read_rows(is, discrete_header(k))) {
    ++line_no;
    if (parse_num(row[0], line_no) != static_cast<double>(plan.n_slots() + 1)) {
      throw Error(ErrorKind::ConfigError, "line " + std::to_string(line_no) + ": slots out of order");
    }
    plan.waypoints.push_back({parse_num(row[2], line_no), parse_num(row[3], line_no)});
    std::vector<double> w;
    for (std::size_t i = 0; i < k; ++i) w.push_back(parse_num(row[4 + i], line_no));
    plan.powers.emplace_back(std::move(w));
  }
  if (plan.n_slots() == 0) throw Error(ErrorKind::ConfigError, "plan file has no slots");
  plan.slot_len = scn.horizon / static_cast<double>(plan.n_slots());
  return plan;
}

void write_trace_csv(const std::vector<TraceRow>& trace, std::ostream& os) {
  os << "round,phase,objective\n";
  for (const auto& r : trace) os << r.round << ',' << r.phase << ',' << num(r.objective) << '\n';
}

std::string sha256_hex(const std::string& bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md, &len) != 1) {
    throw Error(ErrorKind::IoError, "sha256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

}  // namespace uavbf::bench
