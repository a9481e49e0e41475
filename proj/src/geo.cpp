#include "adsbae/geo.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "adsbae/error.hpp"

namespace adsbae {

bool valid_coordinates(double latitude, double longitude) noexcept {
  return std::isfinite(latitude) && std::isfinite(longitude) && latitude >= -90.0 &&
         latitude <= 90.0 && longitude >= -180.0 && longitude <= 180.0;
}

}  // namespace adsbae

namespace adsbae::geo {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDegToRad = kPi / 180.0;
constexpr double kRadToDeg = 180.0 / kPi;
constexpr double kSemiMinorAxisM = kSemiMajorAxisM * (1.0 - kFlattening);
constexpr double kTolerance = 1e-12;
constexpr int kMaxIterations = 200;

std::string describe(GeoPoint a, GeoPoint b) {
  std::ostringstream os;
  os.precision(12);
  os << "(" << a.latitude << ", " << a.longitude << ") -> (" << b.latitude << ", "
     << b.longitude << ")";
  return os.str();
}

double wrap_longitude_rad(double lon) {
  lon = std::fmod(lon + kPi, 2.0 * kPi);
  if (lon < 0) lon += 2.0 * kPi;
  return lon - kPi;
}

double central_angle(double lat1, double lon1, double lat2, double lon2) {
  const double dlat = lat2 - lat1;
  const double dlon = lon2 - lon1;
  const double h = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(lat1) * std::cos(lat2) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * std::atan2(std::sqrt(h), std::sqrt(std::max(0.0, 1.0 - h)));
}

// Lambert's formula on reduced latitudes; accurate to ~10 m over thousands of km.
double lambert_distance_km(GeoPoint a, GeoPoint b) {
  const double f = kFlattening;
  const double beta1 = std::atan((1.0 - f) * std::tan(a.latitude * kDegToRad));
  const double beta2 = std::atan((1.0 - f) * std::tan(b.latitude * kDegToRad));
  const double sigma =
      central_angle(beta1, a.longitude * kDegToRad, beta2, b.longitude * kDegToRad);
  const double p = (beta1 + beta2) / 2.0;
  const double q = (beta2 - beta1) / 2.0;
  const double cos_half = std::cos(sigma / 2.0);
  const double sin_half = std::sin(sigma / 2.0);
  if (cos_half * cos_half < 1e-12 || sin_half * sin_half < 1e-12) {
    return kMeanRadiusKm * central_angle(a.latitude * kDegToRad, a.longitude * kDegToRad,
                                         b.latitude * kDegToRad, b.longitude * kDegToRad);
  }
  const double x = (sigma - std::sin(sigma)) * std::pow(std::sin(p) * std::cos(q), 2) /
                   (cos_half * cos_half);
  const double y = (sigma + std::sin(sigma)) * std::pow(std::cos(p) * std::sin(q), 2) /
                   (sin_half * sin_half);
  return kSemiMajorAxisM * (sigma - f / 2.0 * (x + y)) / 1000.0;
}

}  // namespace

double normalize_degrees(double deg) {
  double r = std::fmod(deg, 360.0);
  if (r < 0) r += 360.0;
  if (r >= 360.0) r -= 360.0;
  return r;
}

double great_circle_bearing(GeoPoint from, GeoPoint to) {
  const double lat1 = from.latitude * kDegToRad;
  const double lat2 = to.latitude * kDegToRad;
  const double dlon = (to.longitude - from.longitude) * kDegToRad;
  const double y = std::sin(dlon) * std::cos(lat2);
  const double x = std::cos(lat1) * std::sin(lat2) - std::sin(lat1) * std::cos(lat2) * std::cos(dlon);
  return normalize_degrees(std::atan2(y, x) * kRadToDeg);
}

InverseSolution vincenty_inverse(GeoPoint a, GeoPoint b) {
  if (!valid_coordinates(a.latitude, a.longitude) || !valid_coordinates(b.latitude, b.longitude)) {
    throw ContractError("invalid coordinates " + describe(a, b));
  }
  const double f = kFlattening;
  const double l = wrap_longitude_rad((b.longitude - a.longitude) * kDegToRad);
  const double u1 = std::atan((1.0 - f) * std::tan(a.latitude * kDegToRad));
  const double u2 = std::atan((1.0 - f) * std::tan(b.latitude * kDegToRad));
  const double sin_u1 = std::sin(u1), cos_u1 = std::cos(u1);
  const double sin_u2 = std::sin(u2), cos_u2 = std::cos(u2);

  double lambda = l;
  double sin_sigma = 0, cos_sigma = 0, sigma = 0, cos_sq_alpha = 0, cos_2sigma_m = 0;
  double sin_lambda = 0, cos_lambda = 0;
  bool converged = false;
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    sin_lambda = std::sin(lambda);
    cos_lambda = std::cos(lambda);
    const double t1 = cos_u2 * sin_lambda;
    const double t2 = cos_u1 * sin_u2 - sin_u1 * cos_u2 * cos_lambda;
    sin_sigma = std::sqrt(t1 * t1 + t2 * t2);
    if (sin_sigma == 0.0) {
      // Coincident points (or exact poles pair).
      return {0.0, 0.0, true};
    }
    cos_sigma = sin_u1 * sin_u2 + cos_u1 * cos_u2 * cos_lambda;
    sigma = std::atan2(sin_sigma, cos_sigma);
    const double sin_alpha = cos_u1 * cos_u2 * sin_lambda / sin_sigma;
    cos_sq_alpha = 1.0 - sin_alpha * sin_alpha;
    cos_2sigma_m = cos_sq_alpha != 0.0 ? cos_sigma - 2.0 * sin_u1 * sin_u2 / cos_sq_alpha : 0.0;
    const double c = f / 16.0 * cos_sq_alpha * (4.0 + f * (4.0 - 3.0 * cos_sq_alpha));
    const double previous = lambda;
    lambda = l + (1.0 - c) * f * sin_alpha *
                     (sigma + c * sin_sigma *
                                  (cos_2sigma_m + c * cos_sigma * (-1.0 + 2.0 * cos_2sigma_m * cos_2sigma_m)));
    if (std::abs(lambda) > kPi) break;
    if (std::abs(lambda - previous) < kTolerance) {
      converged = true;
      break;
    }
  }

  if (!converged) {
    InverseSolution fallback{lambert_distance_km(a, b), great_circle_bearing(a, b), false};
    if (!std::isfinite(fallback.distance_km) || !std::isfinite(fallback.initial_azimuth_deg)) {
      throw NumericError("geodesic inverse failed for " + describe(a, b));
    }
    return fallback;
  }

  constexpr double a2 = kSemiMajorAxisM * kSemiMajorAxisM;
  constexpr double b2 = kSemiMinorAxisM * kSemiMinorAxisM;
  const double u_sq = cos_sq_alpha * (a2 - b2) / b2;
  const double big_a = 1.0 + u_sq / 16384.0 * (4096.0 + u_sq * (-768.0 + u_sq * (320.0 - 175.0 * u_sq)));
  const double big_b = u_sq / 1024.0 * (256.0 + u_sq * (-128.0 + u_sq * (74.0 - 47.0 * u_sq)));
  const double c2sm2 = cos_2sigma_m * cos_2sigma_m;
  const double delta_sigma =
      big_b * sin_sigma *
      (cos_2sigma_m + big_b / 4.0 *
                          (cos_sigma * (-1.0 + 2.0 * c2sm2) -
                           big_b / 6.0 * cos_2sigma_m * (-3.0 + 4.0 * sin_sigma * sin_sigma) *
                               (-3.0 + 4.0 * c2sm2)));
  const double s = kSemiMinorAxisM * big_a * (sigma - delta_sigma);
  const double alpha1 =
      std::atan2(cos_u2 * sin_lambda, cos_u1 * sin_u2 - sin_u1 * cos_u2 * cos_lambda);
  InverseSolution out{s / 1000.0, normalize_degrees(alpha1 * kRadToDeg), true};
  if (!std::isfinite(out.distance_km)) {
    throw NumericError("geodesic inverse produced a non-finite distance for " + describe(a, b));
  }
  return out;
}

double vincenty_distance(GeoPoint a, GeoPoint b) { return vincenty_inverse(a, b).distance_km; }

double initial_bearing(GeoPoint from, GeoPoint to) {
  if (from.latitude == to.latitude && from.longitude == to.longitude) {
    throw UndefinedBearingError("bearing undefined between coincident points " + describe(from, to));
  }
  const InverseSolution sol = vincenty_inverse(from, to);
  if (sol.distance_km == 0.0) {
    throw UndefinedBearingError("bearing undefined between coincident points " + describe(from, to));
  }
  return sol.initial_azimuth_deg;
}

double tracking_delta(double track, double bearing_to_arrival) {
  double d = normalize_degrees(bearing_to_arrival) - normalize_degrees(track);
  if (d > 180.0) d -= 360.0;
  if (d <= -180.0) d += 360.0;
  return d;
}

std::vector<double> consecutive_delta(const Trajectory& traj) {
  std::vector<double> out(traj.points.size(), 0.0);
  for (std::size_t i = 1; i < traj.points.size(); ++i) {
    out[i] = vincenty_distance(position(traj.points[i - 1]), position(traj.points[i]));
  }
  return out;
}

GeoPoint destination(GeoPoint start, double bearing_deg, double distance_km) {
  const double delta = distance_km / kMeanRadiusKm;
  const double theta = bearing_deg * kDegToRad;
  const double lat1 = start.latitude * kDegToRad;
  const double lon1 = start.longitude * kDegToRad;
  const double sin_lat2 = std::sin(lat1) * std::cos(delta) + std::cos(lat1) * std::sin(delta) * std::cos(theta);
  const double lat2 = std::asin(std::clamp(sin_lat2, -1.0, 1.0));
  const double lon2 = lon1 + std::atan2(std::sin(theta) * std::sin(delta) * std::cos(lat1),
                                        std::cos(delta) - std::sin(lat1) * sin_lat2);
  return {lat2 * kRadToDeg, wrap_longitude_rad(lon2) * kRadToDeg};
}

}  // namespace adsbae::geo
