#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "uavbf/bench.hpp"

namespace uavbf::bench {

double brute_force_oracle(const Scenario& scn, PlanMode mode, const OracleGrid& g) {
  const std::size_t k = scn.num_sensors();
  if (k == 0 || k > 2) throw Error(ErrorKind::InvalidParameter, "brute-force oracle needs 1 or 2 sensors");
  if (g.power_levels < 1 || g.time_fractions < 1 || !(g.power_cap >= 0.0)) {
    throw Error(ErrorKind::InvalidParameter, "oracle grid needs >= 1 power level and time fraction");
  }
  const bool outage = mode == PlanMode::Outage;
  if (outage && !scn.gamma_min) throw Error(ErrorKind::MissingThreshold, "outage oracle needs gamma_min");

  const ChannelGrid grid(scn, g.step_m);
  const std::size_t nodes = grid.size();
  const auto levels = static_cast<std::size_t>(g.power_levels);
  std::size_t combos = 1;
  for (std::size_t i = 0; i < k; ++i) combos *= levels;
  const auto f = static_cast<std::size_t>(g.time_fractions);
  const double shares = outage ? static_cast<double>((f + 1) * (f + 2) / 2) : static_cast<double>(f + 1);
  const double count = static_cast<double>(nodes) * static_cast<double>(nodes + 1) / 2.0 *
                       static_cast<double>(combos) * static_cast<double>(combos) * shares;
  if (count > 1e6) {
    throw Error(ErrorKind::BudgetExceeded, "oracle would enumerate " + std::to_string(count) + " combinations");
  }

  // Power combination c sets sensor i to level (c / levels^i) % levels.
  std::vector<std::vector<double>> watts(combos, std::vector<double>(k));
  for (std::size_t c = 0; c < combos; ++c) {
    std::size_t rest = c;
    for (std::size_t i = 0; i < k; ++i) {
      const double step = levels > 1 ? g.power_cap * scn.sensors[i].p_avg / static_cast<double>(levels - 1) : 0.0;
      watts[c][i] = step * static_cast<double>(rest % levels);
      rest /= levels;
    }
  }
  // Per (node, combo): achieved rate, or 1 if the threshold is met.
  std::vector<double> value(nodes * combos);
  for (std::size_t n = 0; n < nodes; ++n) {
    for (std::size_t c = 0; c < combos; ++c) {
      const double s = snr(grid.node(n), PowerVector(watts[c]), scn);
      value[n * combos + c] = outage ? (s >= *scn.gamma_min ? 1.0 : 0.0) : std::log2(1.0 + s);
    }
  }

  auto within_budget = [&](std::size_t c1, double f1, std::size_t c2, double f2) {
    for (std::size_t i = 0; i < k; ++i) {
      const double avg = f1 * watts[c1][i] + f2 * watts[c2][i];
      if (avg > scn.sensors[i].p_avg * (1.0 + 1e-12) + kPowerSlack) return false;
    }
    return true;
  };

  double best = outage ? 1.0 : 0.0;
  const double fd = static_cast<double>(f);
  for (std::size_t n1 = 0; n1 < nodes; ++n1) {
    for (std::size_t n2 = n1; n2 < nodes; ++n2) {
      for (std::size_t c1 = 0; c1 < combos; ++c1) {
        const double v1 = value[n1 * combos + c1];
        for (std::size_t c2 = 0; c2 < combos; ++c2) {
          const double v2 = value[n2 * combos + c2];
          if (!outage) {
            for (std::size_t a = 0; a <= f; ++a) {
              const double f1 = static_cast<double>(a) / fd;
              const double f2 = 1.0 - f1;
              const double obj = f1 * v1 + f2 * v2;
              if (obj > best && within_budget(c1, f1, c2, f2)) best = obj;
            }
            continue;
          }
          for (std::size_t a = 0; a <= f; ++a) {
            for (std::size_t b = 0; a + b <= f; ++b) {
              const double f1 = static_cast<double>(a) / fd;
              const double f2 = static_cast<double>(b) / fd;
              // Only time spent meeting the threshold counts as served.
              if ((a > 0 && v1 == 0.0) || (b > 0 && v2 == 0.0)) continue;
              const double obj = 1.0 - f1 - f2;
              if (obj < best && within_budget(c1, f1, c2, f2)) best = obj;
            }
          }
        }
      }
    }
  }
  return std::max(best, 0.0);
}

}  // namespace uavbf::bench
