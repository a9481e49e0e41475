#include <doctest.h>

#include <vector>

#include "adsbae/error.hpp"
#include "adsbae/geo.hpp"
#include "adsbae/phase.hpp"

using namespace adsbae;
using namespace adsbae::phase;

namespace {

TrajectoryPoint obs(double alt, double vr, double gs) {
  TrajectoryPoint p;
  p.altitude = alt;
  p.vertical_rate = vr;
  p.groundspeed = gs;
  return p;
}

Trajectory constant_track(const TrajectoryPoint& p, std::size_t n) {
  Trajectory t;
  t.departure = {"AAAA", 0.0, 0.0};
  t.arrival = {"BBBB", 0.0, 0.0};
  for (std::size_t k = 0; k < n; ++k) {
    auto q = p;
    q.timestamp = 2.0 * static_cast<double>(k);
    t.points.push_back(q);
  }
  return t;
}

}  // namespace

TEST_CASE("phase names") {
  CHECK(to_string(Phase::Climb) == "CLIMB");
  CHECK(parse_phase("DESCENT") == Phase::Descent);
  CHECK_THROWS_AS(parse_phase("TAXI"), ContractError);
}

TEST_CASE("membership evaluation") {
  const auto climb = memberships(obs(10000.0, 2000.0, 280.0));
  CHECK(climb.climb == 1.0);
  CHECK(climb.cruise == 0.0);
  CHECK(climb.descent == 0.0);

  const auto cruise = memberships(obs(36000.0, 100.0, 460.0));
  CHECK(cruise.cruise == 1.0);
  CHECK(cruise.climb == 0.0);
  const auto cruise_neg = memberships(obs(36000.0, -100.0, 460.0));
  CHECK(cruise_neg.cruise == 1.0);

  const auto descent = memberships(obs(8000.0, -1800.0, 240.0));
  CHECK(descent.descent == 1.0);
  CHECK(descent.cruise == 0.0);

  // halfway points of each ramp
  CHECK(memberships(obs(36000.0, 450.0, 460.0)).climb == doctest::Approx(0.5));
  CHECK(memberships(obs(36000.0, 450.0, 460.0)).cruise == doctest::Approx(0.5));
  CHECK(memberships(obs(17500.0, 0.0, 460.0)).cruise == doctest::Approx(0.5));
  CHECK(memberships(obs(36000.0, 0.0, 200.0)).cruise == doctest::Approx(0.5));
}

TEST_CASE("segmentation of constant regimes") {
  for (auto [p, expected] : {std::pair{obs(10000.0, 2000.0, 280.0), Phase::Climb},
                             std::pair{obs(36000.0, 50.0, 460.0), Phase::Cruise},
                             std::pair{obs(8000.0, -1800.0, 240.0), Phase::Descent}}) {
    const auto phases = segment_phases(constant_track(p, 12));
    REQUIRE(phases.size() == 12);
    for (Phase ph : phases) CHECK(ph == expected);
  }
  // level flight below cruise altitude with nothing decided anywhere
  for (Phase ph : segment_phases(constant_track(obs(5000.0, 0.0, 200.0), 6))) CHECK(ph == Phase::Cruise);
  CHECK(segment_phases(Trajectory{}).empty());
}

TEST_CASE("undecided points inherit the previous phase") {
  Trajectory t = constant_track(obs(9000.0, 2000.0, 250.0), 20);
  for (std::size_t k = 10; k < 20; ++k) t.points[k].vertical_rate = 0.0;  // level-off below cruise
  const auto phases = segment_phases(t);
  for (Phase ph : phases) CHECK(ph == Phase::Climb);
}

TEST_CASE("majority smoothing removes single-point flicker") {
  using P = Phase;
  const std::vector<P> in{P::Climb, P::Climb, P::Cruise, P::Climb, P::Climb, P::Cruise, P::Cruise, P::Cruise};
  const auto out = majority_smooth(in, 5);
  CHECK(out[2] == P::Climb);
  CHECK(out.back() == P::Cruise);
  CHECK(majority_smooth(in, 1) == in);
  CHECK(majority_smooth({}, 5).empty());
}

TEST_CASE("cruise override") {
  Trajectory t;
  t.departure = {"DEP", 48.0, 2.0};
  t.arrival = {"ARR", 48.0, 16.0};
  const geo::GeoPoint far = geo::destination({48.0, 2.0}, 90.0, 520.0);  // about 520 km from both
  t.points.push_back({0.0, far.latitude, far.longitude});
  const geo::GeoPoint near_dep = geo::destination({48.0, 2.0}, 90.0, 100.0);
  t.points.push_back({2.0, near_dep.latitude, near_dep.longitude});
  REQUIRE(geo::vincenty_distance(far, geo::position(t.arrival)) > 300.0);

  const std::vector<Phase> fuzzy{Phase::Descent, Phase::Climb};
  const auto once = apply_cruise_override(fuzzy, t);
  CHECK(once[0] == Phase::Cruise);
  CHECK(once[1] == Phase::Climb);
  CHECK(apply_cruise_override(once, t) == once);
  CHECK_THROWS_AS(apply_cruise_override({Phase::Climb}, t), ContractError);
}

TEST_CASE("label_phases forces cruise far from both airports") {
  Trajectory t;
  t.departure = {"DEP", 40.0, -10.0};
  t.arrival = {"ARR", 40.0, 20.0};
  geo::GeoPoint p{40.5, 5.0};
  double alt = 36000.0;
  for (int k = 0; k < 40; ++k) {
    t.points.push_back({2.0 * k, p.latitude, p.longitude, alt, 430.0, -3000.0, 90.0});
    alt -= 100.0;
    p = geo::destination(p, 90.0, 0.45);
  }
  for (Phase ph : label_phases(t)) CHECK(ph == Phase::Cruise);
  for (Phase ph : segment_phases(t)) CHECK(ph == Phase::Descent);
}
