#pragma once

#include <string>
#include <vector>

namespace adsbae {

// One decoded ADS-B observation.
struct TrajectoryPoint {
  double timestamp = 0.0;      // seconds since epoch
  double latitude = 0.0;       // degrees, [-90, 90]
  double longitude = 0.0;      // degrees, [-180, 180]
  double altitude = 0.0;       // feet
  double groundspeed = 0.0;    // knots
  double vertical_rate = 0.0;  // feet per minute
  double track = 0.0;          // degrees, [0, 360)
  std::string callsign;
  std::string icao24;

  bool operator==(const TrajectoryPoint&) const = default;
};

struct Airport {
  std::string icao_code;
  double latitude = 0.0;
  double longitude = 0.0;

  bool operator==(const Airport&) const = default;
};

// An ordered flight track; timestamps strictly increasing.
struct Trajectory {
  std::string flight_id;
  Airport departure;
  Airport arrival;
  std::vector<TrajectoryPoint> points;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
  bool operator==(const Trajectory&) const = default;
};

bool valid_coordinates(double latitude, double longitude) noexcept;

}  // namespace adsbae
