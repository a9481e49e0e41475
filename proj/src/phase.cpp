#include "adsbae/phase.hpp"

#include <algorithm>
#include <cmath>

#include "adsbae/error.hpp"
#include "adsbae/geo.hpp"

namespace adsbae {

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::Climb:
      return "CLIMB";
    case Phase::Cruise:
      return "CRUISE";
    case Phase::Descent:
      return "DESCENT";
  }
  throw ContractError("unknown phase value " + std::to_string(static_cast<int>(phase)));
}

Phase parse_phase(std::string_view text) {
  if (text == "CLIMB") return Phase::Climb;
  if (text == "CRUISE") return Phase::Cruise;
  if (text == "DESCENT") return Phase::Descent;
  throw ContractError("unknown phase tag '" + std::string(text) + "'");
}

}  // namespace adsbae

namespace adsbae::phase {

namespace {

// 0 at or below lo, 1 at or above hi.
double ramp(double x, double lo, double hi) {
  if (x <= lo) return 0.0;
  if (x >= hi) return 1.0;
  return (x - lo) / (hi - lo);
}

}  // namespace

Memberships memberships(const TrajectoryPoint& p, const PhaseConfig& c) {
  const double band = c.level_band_fpm;
  const double up = ramp(p.vertical_rate, band, 2.0 * band);
  const double down = ramp(-p.vertical_rate, band, 2.0 * band);
  const double level = 1.0 - std::max(up, down);
  const double high = ramp(p.altitude, c.altitude_low_ft, c.altitude_high_ft);
  const double fast = ramp(p.groundspeed, c.cruise_speed_kt - c.speed_ramp_kt, c.cruise_speed_kt);
  return {up, std::min({level, high, fast}), down};
}

std::vector<Phase> majority_smooth(const std::vector<Phase>& phases, std::size_t window) {
  if (window <= 1 || phases.size() < 2) return phases;
  const std::size_t half = window / 2;
  std::vector<Phase> out(phases.size());
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(phases.size(), i + half + 1);
    std::array<int, kPhaseCount> count{};
    for (std::size_t j = lo; j < hi; ++j) ++count[index_of(phases[j])];
    const int best = *std::max_element(count.begin(), count.end());
    if (count[index_of(phases[i])] == best) {
      out[i] = phases[i];
      continue;
    }
    for (std::size_t j = lo; j < hi; ++j) {
      if (count[index_of(phases[j])] == best) {
        out[i] = phases[j];
        break;
      }
    }
  }
  return out;
}

std::vector<Phase> segment_phases(const Trajectory& traj, const PhaseConfig& config) {
  const std::size_t n = traj.points.size();
  std::vector<int> raw(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto m = memberships(traj.points[i], config);
    const std::array<double, kPhaseCount> score = {m.climb, m.cruise, m.descent};
    const auto it = std::max_element(score.begin(), score.end());
    if (*it >= 0.5) raw[i] = static_cast<int>(it - score.begin());
  }
  const auto first = std::find_if(raw.begin(), raw.end(), [](int v) { return v >= 0; });
  const int seed = first == raw.end() ? index_of(Phase::Cruise) : *first;
  int previous = seed;
  std::vector<Phase> decided(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (raw[i] >= 0) previous = raw[i];
    decided[i] = static_cast<Phase>(previous);
  }
  return majority_smooth(decided, config.smoothing_window);
}

std::vector<Phase> apply_cruise_override(std::vector<Phase> phases, const Trajectory& traj,
                                         double threshold_km) {
  if (phases.size() != traj.points.size()) {
    throw ContractError("phase count " + std::to_string(phases.size()) + " does not match trajectory length " +
                        std::to_string(traj.points.size()));
  }
  const auto dep = geo::position(traj.departure);
  const auto arr = geo::position(traj.arrival);
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const auto p = geo::position(traj.points[i]);
    if (geo::vincenty_distance(p, dep) > threshold_km && geo::vincenty_distance(p, arr) > threshold_km) {
      phases[i] = Phase::Cruise;
    }
  }
  return phases;
}

std::vector<Phase> label_phases(const Trajectory& traj, const PhaseConfig& config) {
  return apply_cruise_override(segment_phases(traj, config), traj, config.cruise_override_km);
}

}  // namespace adsbae::phase
