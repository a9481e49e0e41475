#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "adsbae/trajectory.hpp"

namespace adsbae::synth {

struct SynthConfig {
  std::size_t flights = 200;
  std::uint64_t seed = 0;
  std::size_t routes = 12;
  double min_route_km = 1100.0;
  double max_route_km = 1600.0;
  double cruise_altitude_min_ft = 35000.0;
  double cruise_altitude_max_ft = 37000.0;
  double cruise_speed_min_kt = 440.0;
  double cruise_speed_max_kt = 470.0;
  double max_wind_kt = 25.0;
  double waypoint_spread_km = 40.0;  // std of the lateral offset of the two en-route waypoints
  double turn_rate_deg_s = 2.0;
  double drop_rate = 0.05;            // fraction of 1 s messages lost
  double outlier_rate = 0.0005;       // messages with a corrupted position
  double start_time = 1.6e9;
};

/// Major European airports used as route endpoints.
const std::vector<Airport>& european_airports();

/// Routes (departure, arrival) with great-circle lengths inside the configured
/// range, drawn deterministically from the seed.
std::vector<std::pair<Airport, Airport>> pick_routes(const SynthConfig& config);

/// Raw 1 s ADS-B-like tracks: climb by altitude band, level cruise, descent on
/// a 3-to-1 profile, two laterally offset waypoints per flight, quantized and
/// noisy reports, dropped messages and rare position glitches.
std::vector<Trajectory> generate(const SynthConfig& config);

}  // namespace adsbae::synth
