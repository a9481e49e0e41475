#pragma once

#include <vector>

#include "adsbae/trajectory.hpp"

namespace adsbae::geo {

struct GeoPoint {
  double latitude = 0.0;
  double longitude = 0.0;
};

inline GeoPoint position(const TrajectoryPoint& p) { return {p.latitude, p.longitude}; }
inline GeoPoint position(const Airport& a) { return {a.latitude, a.longitude}; }

// WGS84 ellipsoid.
inline constexpr double kSemiMajorAxisM = 6378137.0;
inline constexpr double kFlattening = 1.0 / 298.257223563;
inline constexpr double kMeanRadiusKm = 6371.0088;

inline constexpr double kKnotsToKmPerSecond = 1.852 / 3600.0;

struct InverseSolution {
  double distance_km = 0.0;
  double initial_azimuth_deg = 0.0;  // [0, 360)
  bool converged = true;             // false when the fallback was used
};

/// Inverse geodesic problem on WGS84 by Vincenty's iteration (tolerance 1e-12 rad,
/// at most 200 iterations). When the iteration does not converge (near-antipodal
/// pairs) the distance falls back to Lambert's long-line formula, and then to a
/// mean-radius great circle if Lambert's terms are singular; the azimuth falls
/// back to the spherical forward azimuth. Throws NumericError if every route
/// yields a non-finite value.
InverseSolution vincenty_inverse(GeoPoint a, GeoPoint b);

/// Geodesic distance in kilometres. Symmetric, non-negative, 0 for a == b.
double vincenty_distance(GeoPoint a, GeoPoint b);

/// Forward azimuth at `from` toward `to`, degrees in [0, 360). Uses the
/// ellipsoidal azimuth from the inverse solution. Throws UndefinedBearingError
/// for coincident points.
double initial_bearing(GeoPoint from, GeoPoint to);

/// Spherical forward azimuth, degrees in [0, 360).
double great_circle_bearing(GeoPoint from, GeoPoint to);

/// Signed smallest angle from `track` to `bearing_to_arrival`, in (-180, 180].
/// Inputs may be any finite angle; they are reduced modulo 360 first.
double tracking_delta(double track, double bearing_to_arrival);

/// Distance (km) from each point to its predecessor; element 0 is 0.
std::vector<double> consecutive_delta(const Trajectory& traj);

/// Point reached after travelling `distance_km` from `start` on a constant
/// initial bearing over the mean-radius sphere. Used for dead reckoning.
GeoPoint destination(GeoPoint start, double bearing_deg, double distance_km);

/// Reduces an angle to [0, 360).
double normalize_degrees(double deg);

}  // namespace adsbae::geo
