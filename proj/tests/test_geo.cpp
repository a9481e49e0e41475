#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "adsbae/error.hpp"
#include "adsbae/geo.hpp"

using namespace adsbae;
using namespace adsbae::geo;

namespace {

struct OraclePair {
  GeoPoint a, b;
  double distance_km, azimuth_deg;
};

std::vector<OraclePair> load_oracle() {
  std::ifstream in(std::string(ADSBAE_TEST_DATA_DIR) + "/geodesic_pairs.csv");
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);
  std::vector<OraclePair> out;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    out.push_back({{v[0], v[1]}, {v[2], v[3]}, v[4], v[5]});
  }
  return out;
}

double angle_gap(double a, double b) {
  const double d = std::fmod(std::abs(a - b), 360.0);
  return std::min(d, 360.0 - d);
}

}  // namespace

TEST_CASE("vincenty distance special cases") {
  CHECK(vincenty_distance({48.0, 8.0}, {48.0, 8.0}) == 0.0);
  CHECK(vincenty_distance({0.0, 0.0}, {1.0, 0.0}) == doctest::Approx(110.57438855779878).epsilon(1e-8));
  const double offset = vincenty_distance({50.0, 10.0}, {51.0, 11.0});
  CHECK(offset == doctest::Approx(131.93596278050404).epsilon(1e-8));
  CHECK(std::abs(offset - 132.0) <= 2.0);
  CHECK_THROWS_AS(vincenty_distance({91.0, 0.0}, {0.0, 0.0}), ContractError);
}

TEST_CASE("vincenty agrees with the reference geodesic on 1000 pairs") {
  const auto pairs = load_oracle();
  REQUIRE(pairs.size() == 1000);
  double worst = 0.0, worst_az = 0.0;
  for (const auto& p : pairs) {
    const auto sol = vincenty_inverse(p.a, p.b);
    worst = std::max(worst, std::abs(sol.distance_km - p.distance_km));
    worst_az = std::max(worst_az, angle_gap(sol.initial_azimuth_deg, p.azimuth_deg));
  }
  CHECK(worst < 1e-3);
  CHECK(worst_az < 1e-6);
}

TEST_CASE("vincenty symmetry and triangle inequality") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lat(-80.0, 80.0), lon(-180.0, 180.0);
  for (int i = 0; i < 300; ++i) {
    const GeoPoint a{lat(rng), lon(rng)}, b{lat(rng), lon(rng)}, c{lat(rng), lon(rng)};
    const double ab = vincenty_distance(a, b);
    CHECK(std::abs(ab - vincenty_distance(b, a)) < 1e-9);
    CHECK(ab >= 0.0);
    if (ab < 15000.0 && vincenty_distance(b, c) < 15000.0 && vincenty_distance(a, c) < 15000.0) {
      CHECK(vincenty_distance(a, c) <= ab + vincenty_distance(b, c) + 1e-6);
    }
  }
}

TEST_CASE("near-antipodal pairs fall back without failing") {
  const auto sol = vincenty_inverse({0.0, 0.0}, {0.5, 179.7});
  CHECK(std::isfinite(sol.distance_km));
  CHECK(sol.distance_km > 19900.0);
  CHECK(sol.distance_km < 20040.0);
}

TEST_CASE("initial bearing") {
  CHECK(initial_bearing({10.0, 20.0}, {11.0, 20.0}) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(initial_bearing({0.0, 0.0}, {0.0, 1.0}) == doctest::Approx(90.0).epsilon(1e-12));
  CHECK(std::abs(initial_bearing({48.8566, 2.3522}, {55.7558, 37.6173}) - 58.6952795785521) < 0.1);
  CHECK(std::abs(great_circle_bearing({48.8566, 2.3522}, {55.7558, 37.6173}) - 58.6952795785521) < 0.5);
  CHECK_THROWS_AS(initial_bearing({1.0, 1.0}, {1.0, 1.0}), UndefinedBearingError);
}

TEST_CASE("tracking delta") {
  CHECK(tracking_delta(270.0, 270.0) == 0.0);
  CHECK(tracking_delta(350.0, 10.0) == doctest::Approx(20.0));
  CHECK(tracking_delta(10.0, 350.0) == doctest::Approx(-20.0));
  CHECK(tracking_delta(0.0, 180.0) == 180.0);
  CHECK(tracking_delta(180.0, 0.0) == 180.0);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ang(0.0, 360.0);
  for (int i = 0; i < 500; ++i) {
    const double t = ang(rng), b = ang(rng);
    CHECK(tracking_delta(t, t) == 0.0);
    const double d = tracking_delta(t, b);
    CHECK(std::abs(d) <= 180.0);
    CHECK(tracking_delta(t + 720.0, b) == doctest::Approx(d).epsilon(1e-9));
    CHECK(tracking_delta(t - 360.0, b) == doctest::Approx(d).epsilon(1e-9));
  }
}

TEST_CASE("consecutive delta") {
  Trajectory still;
  still.points.assign(4, TrajectoryPoint{0.0, 45.0, 5.0});
  for (double d : consecutive_delta(still)) CHECK(d == 0.0);

  Trajectory equator;
  for (int k = 0; k < 3; ++k) equator.points.push_back({static_cast<double>(k), 0.0, static_cast<double>(k)});
  const auto d = consecutive_delta(equator);
  REQUIRE(d.size() == 3);
  CHECK(d[0] == 0.0);
  CHECK(d[1] == doctest::Approx(111.31949079327357).epsilon(1e-9));
  CHECK(d[2] == doctest::Approx(d[1]).epsilon(1e-12));

  const double step = 480.0 * kKnotsToKmPerSecond * 2.0;
  Trajectory cruise;
  GeoPoint p{47.0, 3.0};
  for (int k = 0; k < 5; ++k) {
    cruise.points.push_back({2.0 * k, p.latitude, p.longitude});
    p = destination(p, 75.0, step);
  }
  for (std::size_t k = 1; k < 5; ++k) CHECK(std::abs(consecutive_delta(cruise)[k] - 0.494) < 0.003);
  CHECK(consecutive_delta(Trajectory{}).empty());
}

TEST_CASE("destination and angle normalization") {
  const GeoPoint end = destination({0.0, 0.0}, 90.0, kMeanRadiusKm * M_PI / 180.0);
  CHECK(end.latitude == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(end.longitude == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(normalize_degrees(-90.0) == 270.0);
  CHECK(normalize_degrees(720.0) == 0.0);
  CHECK(normalize_degrees(359.5) == 359.5);
}
