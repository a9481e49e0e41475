#include "adsbae/eval/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "adsbae/error.hpp"
#include "adsbae/geo.hpp"

namespace adsbae::synth {

namespace {

constexpr double kFieldAltitudeFt = 1500.0;
constexpr double kArrivalRadiusKm = 8.0;
constexpr double kWaypointCaptureKm = 10.0;
constexpr double kVrLagS = 20.0;
constexpr double kSpeedLagS = 30.0;

struct FlightParams {
  double cruise_altitude;
  double cruise_speed;
  double wind;
  double climb_factor;
  std::vector<geo::GeoPoint> waypoints;  // en-route points, then the arrival airport
};

// 2600 ft/min at the field, falling linearly to 1000 ft/min at FL360.
double climb_rate(double altitude, double factor) {
  const double rate = 2600.0 - 1600.0 * (altitude - kFieldAltitudeFt) / (36000.0 - kFieldAltitudeFt);
  return std::max(rate, 800.0) * factor;
}

double remaining_km(geo::GeoPoint at, const std::vector<geo::GeoPoint>& waypoints, std::size_t next) {
  double total = 0.0;
  geo::GeoPoint from = at;
  for (std::size_t i = next; i < waypoints.size(); ++i) {
    total += geo::vincenty_distance(from, waypoints[i]);
    from = waypoints[i];
  }
  return total;
}

double signed_turn(double from, double to) {
  return std::fmod(to - from + 540.0, 360.0) - 180.0;
}

Trajectory fly(const std::string& id, std::size_t index, const Airport& dep, const Airport& arr, const FlightParams& fp,
               double t0, const SynthConfig& config, std::mt19937_64& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  enum class Stage { Climb, Cruise, Descent };
  Stage stage = Stage::Climb;
  geo::GeoPoint pos = geo::position(dep);
  std::size_t next = 0;
  double track = geo::initial_bearing(pos, fp.waypoints[0]);
  double altitude = kFieldAltitudeFt;
  double vr = climb_rate(altitude, fp.climb_factor);
  double airspeed = 180.0;

  Trajectory traj;
  traj.flight_id = id;
  traj.departure = dep;
  traj.arrival = arr;

  char callsign[16];
  std::snprintf(callsign, sizeof callsign, "SYN%04zu", index % 10000);
  char icao[8];
  std::snprintf(icao, sizeof icao, "%06zx", (0x400000 + index) & 0xffffff);

  const std::size_t max_steps = 6 * 3600;
  for (std::size_t step = 0; step < max_steps; ++step) {
    const double remaining = remaining_km(pos, fp.waypoints, next);
    if (remaining < kArrivalRadiusKm || (stage == Stage::Descent && altitude <= kFieldAltitudeFt)) break;

    // Vertical profile.
    double vr_target = 0.0;
    double speed_target = fp.cruise_speed;
    if (stage == Stage::Climb) {
      vr_target = climb_rate(altitude, fp.climb_factor);
      const double to_go = fp.cruise_altitude - altitude;
      if (to_go < 1000.0) vr_target = std::min(vr_target, std::max(to_go * 1.5, 100.0));
      if (to_go <= 15.0) {
        stage = Stage::Cruise;
        altitude = fp.cruise_altitude;
        vr_target = 0.0;
      }
      speed_target = std::min(fp.cruise_speed, 200.0 + altitude / 1000.0 * 9.0);
    }
    if (stage == Stage::Cruise) {
      vr_target = (fp.cruise_altitude - altitude) * 2.0;
      const double descent_km = (altitude - kFieldAltitudeFt) / 1000.0 * 3.0 * 1.852 + 15.0;
      if (remaining <= descent_km) stage = Stage::Descent;
    }
    if (stage == Stage::Descent) {
      const double gs_km_per_min = std::max(airspeed + fp.wind, 120.0) * geo::kKnotsToKmPerSecond * 60.0;
      const double minutes_left = std::max(remaining - kArrivalRadiusKm, 1.0) / gs_km_per_min;
      vr_target = std::clamp(-(altitude - kFieldAltitudeFt) / minutes_left, -3000.0, -500.0);
      speed_target = std::min(fp.cruise_speed, 170.0 + altitude / 1000.0 * 9.0);
    }
    if (altitude < 10000.0) speed_target = std::min(speed_target, 250.0);

    vr += (vr_target - vr) / kVrLagS;
    airspeed += (speed_target - airspeed) / kSpeedLagS;
    altitude = std::max(altitude + vr / 60.0, 0.0);
    const double gs = airspeed + fp.wind;

    // Lateral guidance toward the next waypoint.
    if (next + 1 < fp.waypoints.size() && geo::vincenty_distance(pos, fp.waypoints[next]) < kWaypointCaptureKm) ++next;
    const double wanted = geo::initial_bearing(pos, fp.waypoints[next]);
    track = geo::normalize_degrees(track + std::clamp(signed_turn(track, wanted), -config.turn_rate_deg_s, config.turn_rate_deg_s));
    pos = geo::destination(pos, track, gs * geo::kKnotsToKmPerSecond);

    if (uniform(rng) < config.drop_rate) continue;
    TrajectoryPoint p;
    p.timestamp = t0 + static_cast<double>(step);
    p.latitude = pos.latitude + 5e-5 * unit(rng);
    p.longitude = pos.longitude + 5e-5 * unit(rng);
    p.altitude = std::round((altitude + 10.0 * unit(rng)) / 25.0) * 25.0;
    p.vertical_rate = std::round((vr + 40.0 * unit(rng)) / 64.0) * 64.0;
    p.groundspeed = std::max(gs + 1.5 * unit(rng), 0.0);
    p.track = geo::normalize_degrees(track + 0.3 * unit(rng));
    p.callsign = callsign;
    p.icao24 = icao;
    if (uniform(rng) < config.outlier_rate) {
      const double jump = 2.0 + 3.0 * uniform(rng);
      p.latitude = std::clamp(p.latitude + (uniform(rng) < 0.5 ? -jump : jump), -89.0, 89.0);
    }
    traj.points.push_back(std::move(p));
  }
  return traj;
}

}  // namespace

const std::vector<Airport>& european_airports() {
  static const std::vector<Airport> airports = {
      {"EGLL", 51.4700, -0.4543}, {"LFPG", 49.0097, 2.5479},  {"EDDF", 50.0379, 8.5622},
      {"EHAM", 52.3105, 4.7683},  {"LEMD", 40.4983, -3.5676}, {"LIRF", 41.8003, 12.2389},
      {"EDDM", 48.3538, 11.7861}, {"LSZH", 47.4647, 8.5492},  {"LOWW", 48.1103, 16.5697},
      {"EKCH", 55.6180, 12.6560}, {"ESSA", 59.6519, 17.9186}, {"ENGM", 60.1976, 11.1004},
      {"EPWA", 52.1657, 20.9671}, {"LKPR", 50.1008, 14.2600}, {"LHBP", 47.4298, 19.2611},
      {"LEBL", 41.2974, 2.0833},  {"LPPT", 38.7813, -9.1359}, {"EIDW", 53.4213, -6.2701},
      {"LGAV", 37.9364, 23.9445}, {"LROP", 44.5711, 26.0850}, {"EFHK", 60.3172, 24.9633},
      {"LIMC", 45.6300, 8.7231},  {"EBBR", 50.9014, 4.4844},  {"LFMN", 43.6584, 7.2159},
  };
  return airports;
}

std::vector<std::pair<Airport, Airport>> pick_routes(const SynthConfig& config) {
  if (config.routes == 0) throw ConfigError("synth: routes must be >= 1");
  const auto& airports = european_airports();
  std::vector<std::pair<Airport, Airport>> candidates;
  for (const auto& a : airports) {
    for (const auto& b : airports) {
      if (a.icao_code == b.icao_code) continue;
      const double d = geo::vincenty_distance(geo::position(a), geo::position(b));
      if (d >= config.min_route_km && d <= config.max_route_km) candidates.emplace_back(a, b);
    }
  }
  if (candidates.size() < config.routes) {
    throw ConfigError("synth: only " + std::to_string(candidates.size()) + " airport pairs lie in the route length range");
  }
  std::mt19937_64 rng(config.seed ^ 0x5eed0f0aULL);
  for (std::size_t i = 0; i < config.routes; ++i) {
    std::uniform_int_distribution<std::size_t> u(i, candidates.size() - 1);
    std::swap(candidates[i], candidates[u(rng)]);
  }
  candidates.resize(config.routes);
  return candidates;
}

std::vector<Trajectory> generate(const SynthConfig& config) {
  if (!(config.cruise_altitude_max_ft >= config.cruise_altitude_min_ft) ||
      !(config.cruise_speed_max_kt >= config.cruise_speed_min_kt) || config.drop_rate < 0.0 || config.drop_rate >= 1.0 ||
      !(config.turn_rate_deg_s > 0.0)) {
    throw ConfigError("synth: inconsistent ranges");
  }
  const auto routes = pick_routes(config);
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> unit(0.0, 1.0);

  std::vector<Trajectory> out;
  out.reserve(config.flights);
  for (std::size_t f = 0; f < config.flights; ++f) {
    const auto& [dep, arr] = routes[f % routes.size()];
    FlightParams fp;
    const double levels = std::floor((config.cruise_altitude_max_ft - config.cruise_altitude_min_ft) / 1000.0);
    fp.cruise_altitude = config.cruise_altitude_min_ft + 1000.0 * std::floor(uniform(rng) * (levels + 1.0));
    fp.cruise_altitude = std::min(fp.cruise_altitude, config.cruise_altitude_max_ft);
    fp.cruise_speed = config.cruise_speed_min_kt + uniform(rng) * (config.cruise_speed_max_kt - config.cruise_speed_min_kt);
    fp.wind = (2.0 * uniform(rng) - 1.0) * config.max_wind_kt;
    fp.climb_factor = 0.85 + 0.3 * uniform(rng);

    const geo::GeoPoint a = geo::position(dep), b = geo::position(arr);
    const double length = geo::vincenty_distance(a, b);
    const double course = geo::initial_bearing(a, b);
    for (double fraction : {1.0 / 3.0, 2.0 / 3.0}) {
      const geo::GeoPoint along = geo::destination(a, course, length * fraction);
      const double offset = config.waypoint_spread_km * unit(rng);
      fp.waypoints.push_back(geo::destination(along, course + (offset >= 0.0 ? 90.0 : -90.0), std::abs(offset)));
    }
    fp.waypoints.push_back(b);

    char id[64];
    std::snprintf(id, sizeof id, "%s-%s-%04zu", dep.icao_code.c_str(), arr.icao_code.c_str(), f);
    const double t0 = config.start_time + 86400.0 * static_cast<double>(f);
    out.push_back(fly(id, f, dep, arr, fp, t0, config, rng));
  }
  return out;
}

}  // namespace adsbae::synth
