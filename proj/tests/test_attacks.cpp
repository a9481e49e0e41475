#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "adsbae/attacks.hpp"
#include "adsbae/error.hpp"
#include "adsbae/geo.hpp"
#include "adsbae/ingest.hpp"
#include "support.hpp"

using namespace adsbae;
using namespace adsbae::attacks;

namespace {

// Straight eastbound cruise between two airports about 1500 km apart.
Trajectory long_flight(const std::string& id, std::size_t n, double lat = 47.0) {
  Trajectory t;
  t.flight_id = id;
  t.departure = {"DEPT", lat, -8.0};
  t.arrival = {"ARRV", lat, 12.0};
  geo::GeoPoint p{lat, -8.0};
  const double bearing = geo::initial_bearing(p, geo::position(t.arrival));
  for (std::size_t k = 0; k < n; ++k) {
    t.points.push_back({2.0 * static_cast<double>(k), p.latitude, p.longitude, 36000.0, 450.0, 0.0, bearing,
                        "TST" + id, "abcdef"});
    p = geo::destination(p, bearing, 450.0 * geo::kKnotsToKmPerSecond * 2.0);
  }
  return t;
}

AttackScenario drift(std::size_t s, std::size_t e, double step, DriftTarget target = DriftTarget::Altitude) {
  AttackScenario sc;
  sc.kind = AttackKind::Drift;
  sc.target = target;
  sc.step_magnitude = step;
  sc.start_index = s;
  sc.end_index = e;
  return sc;
}

AttackScenario offset(std::size_t s, std::size_t e, double deg) {
  AttackScenario sc;
  sc.kind = AttackKind::Offset;
  sc.offset_deg = deg;
  sc.start_index = s;
  sc.end_index = e;
  return sc;
}

}  // namespace

TEST_CASE("altitude drift example") {
  Trajectory t = long_flight("a", 4);
  for (auto& p : t.points) p.altitude = 10000.0;
  const auto r = apply_drift(t, drift(0, 4, -25.0));
  std::vector<double> alts;
  for (const auto& p : r.trajectory.points) alts.push_back(p.altitude);
  CHECK(alts == std::vector<double>{9975, 9950, 9925, 9900});
  CHECK(r.labels == std::vector<std::uint8_t>{1, 1, 1, 1});
}

TEST_CASE("drift edge cases") {
  const Trajectory t = long_flight("a", 30);
  const auto zero = apply_drift(t, drift(5, 15, 0.0));
  CHECK(zero.trajectory == t);
  for (std::size_t k = 0; k < 30; ++k) CHECK(zero.labels[k] == (k >= 5 && k < 15 ? 1 : 0));

  const auto gs = apply_drift(t, drift(10, 20, 5.0, DriftTarget::Groundspeed));
  CHECK(gs.trajectory.points[19].groundspeed == t.points[19].groundspeed + 50.0);
  CHECK(gs.trajectory.points[20] == t.points[20]);
  CHECK(gs.trajectory.points[9] == t.points[9]);

  CHECK_THROWS_AS(apply_drift(t, drift(5, 31, 1.0)), ContractError);
  CHECK_THROWS_AS(apply_drift(t, drift(5, 5, 1.0)), ContractError);
}

TEST_CASE("offset displacement and boundaries") {
  Trajectory t = long_flight("a", 200, 50.0);
  const auto r = apply_offset(t, offset(60, 140, 1.0));
  const double shift = geo::vincenty_distance(geo::position(t.points[100]), geo::position(r.trajectory.points[100]));
  CHECK(std::abs(shift - 132.0) <= 2.0);

  const auto before = geo::consecutive_delta(t);
  const auto after = geo::consecutive_delta(r.trajectory);
  for (std::size_t k = 1; k < t.size(); ++k) {
    if (k == 60 || k == 140) {
      CHECK(after[k] > 100.0);
    } else {
      CHECK(std::abs(after[k] - before[k]) < 0.05);
    }
  }
  CHECK(apply_offset(t, offset(60, 140, 0.0)).trajectory == t);

  Trajectory polar = t;
  polar.points[70].latitude = 89.5;
  CHECK_THROWS_AS(apply_offset(polar, offset(60, 140, 1.0)), ContractError);
}

TEST_CASE("offset negation restores coordinates") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> lat(35.0, 60.0), lon(-10.0, 30.0);
  Trajectory t = long_flight("a", 300);
  for (auto& p : t.points) {
    p.latitude = lat(rng);
    p.longitude = lon(rng);
  }
  const auto there = apply_offset(t, offset(0, 300, 1.0));
  const auto back = apply_offset(there.trajectory, offset(0, 300, -1.0));
  for (std::size_t k = 0; k < t.size(); ++k) {
    const auto& a = t.points[k];
    const auto& b = back.trajectory.points[k];
    // exact whenever the shift stays within one binade
    if (std::ilogb(a.latitude) == std::ilogb(a.latitude + 1.0)) CHECK(a.latitude == b.latitude);
    CHECK(std::abs(a.latitude - b.latitude) <= 1e-12);
    CHECK(std::abs(a.longitude - b.longitude) <= 1e-12);
  }
}

TEST_CASE("crash from 36000 ft stops after 360 messages") {
  const Trajectory t = long_flight("c", 1200);
  AttackScenario sc;
  sc.kind = AttackKind::Crash;
  sc.start_index = 400;
  const auto r = apply_crash(t, sc);
  CHECK(r.reached_ground);
  CHECK(r.warnings.empty());
  CHECK(r.trajectory.size() == 400 + 360);
  CHECK(crash_length(36000.0, sc.crash) == 360);
  CHECK(r.trajectory.points.back().altitude == 0.0);
  for (std::size_t k = 0; k < 400; ++k) {
    CHECK(r.trajectory.points[k] == t.points[k]);
    CHECK(r.labels[k] == 0);
  }
  for (std::size_t k = 400; k < r.trajectory.size(); ++k) {
    const auto& p = r.trajectory.points[k];
    const auto& prev = r.trajectory.points[k - 1];
    CHECK(r.labels[k] == 1);
    CHECK(p.altitude - prev.altitude == doctest::Approx(-3000.0 * 2.0 / 60.0));
    CHECK(p.vertical_rate == -3000.0);
    CHECK(p.groundspeed == std::max(120.0, 450.0 - 2.0 * static_cast<double>(k - 399)));
    CHECK(p.track == t.points[399].track);
    const double moved = geo::vincenty_distance(geo::position(prev), geo::position(p));
    CHECK(moved == doctest::Approx(p.groundspeed * geo::kKnotsToKmPerSecond * 2.0).epsilon(5e-3));
  }
}

TEST_CASE("crash that cannot reach the ground warns") {
  const Trajectory t = long_flight("c", 500);
  AttackScenario sc;
  sc.kind = AttackKind::Crash;
  sc.start_index = 300;
  const auto r = apply_crash(t, sc);
  CHECK_FALSE(r.reached_ground);
  CHECK(r.warnings.size() == 1);
  CHECK(r.trajectory.size() == 500);
  for (std::size_t k = 300; k < 500; ++k) CHECK(r.labels[k] == 1);
  sc.start_index = 0;
  CHECK_THROWS_AS(apply_crash(t, sc), ContractError);
}

TEST_CASE("scenario json roundtrip") {
  for (const auto& sc : {drift(3, 9, -25.0), offset(1, 4, 0.5)}) CHECK(scenario_from_json(to_json(sc)) == sc);
  AttackScenario c;
  c.kind = AttackKind::Crash;
  c.start_index = 17;
  c.crash.vertical_rate_fpm = -2500.0;
  CHECK(scenario_from_json(to_json(c)) == c);
}

TEST_CASE("suite config parsing") {
  const auto j = nlohmann::json::parse(R"({
    "seed": 11,
    "datasets": [
      {"name": "DRIFT", "kind": "drift", "step": [-10, -25], "length": 100},
      {"name": "CRASH", "kind": "crash", "crash": {"vertical_rate_fpm": -2000}}
    ]})");
  const auto cfg = parse_suite_config(j);
  CHECK(cfg.seed == 11);
  REQUIRE(cfg.datasets.size() == 3);
  CHECK(cfg.datasets[0].name == "DRIFT@-10");
  CHECK(cfg.datasets[1].step_magnitude == -25.0);
  CHECK(cfg.datasets[2].crash.vertical_rate_fpm == -2000.0);
  CHECK_THROWS_AS(parse_suite_config(nlohmann::json::parse(R"({"datasets":[{"kind":"jam"}]})")), ContractError);
}

TEST_CASE("evaluation suite") {
  std::vector<Trajectory> clean;
  for (int i = 0; i < 6; ++i) clean.push_back(long_flight("f" + std::to_string(i), 1700, 44.0 + i));
  clean.push_back(long_flight("short", 200));
  const auto cfg = default_suite_config(5);
  const auto suite = build_eval_suite(clean, cfg);
  REQUIRE(suite.datasets.size() == 4);
  CHECK(suite.datasets[0].name == "WORLD");
  for (const auto& f : suite.datasets[0].flights) {
    for (auto l : f.labels) CHECK(l == 0);
  }
  for (std::size_t d = 1; d < 4; ++d) {
    const auto& ds = suite.datasets[d];
    CHECK(ds.flights.size() == 6);
    CHECK(ds.manifest.back().skipped);
    for (const auto& f : ds.flights) {
      std::size_t positives = 0;
      for (auto l : f.labels) positives += l;
      CHECK(positives > 0);
    }
  }
  // crash segments stay far from both airports
  for (const auto& f : suite.datasets[3].flights) {
    for (std::size_t k = 0; k < f.labels.size(); ++k) {
      if (!f.labels[k]) continue;
      const auto p = geo::position(f.trajectory.points[k]);
      CHECK(geo::vincenty_distance(p, geo::position(f.trajectory.departure)) > 300.0);
      CHECK(geo::vincenty_distance(p, geo::position(f.trajectory.arrival)) > 300.0);
    }
  }

  const auto again = build_eval_suite(clean, cfg);
  CHECK(manifest_json(again) == manifest_json(suite));

  const auto replayed = replay_manifest(clean, manifest_json(suite));
  REQUIRE(replayed.datasets.size() == suite.datasets.size());
  for (std::size_t d = 0; d < suite.datasets.size(); ++d) {
    REQUIRE(replayed.datasets[d].flights.size() == suite.datasets[d].flights.size());
    for (std::size_t i = 0; i < suite.datasets[d].flights.size(); ++i) {
      CHECK(replayed.datasets[d].flights[i].labels == suite.datasets[d].flights[i].labels);
      CHECK(replayed.datasets[d].flights[i].trajectory == suite.datasets[d].flights[i].trajectory);
    }
  }

  const auto dir = testsupport::temp_dir("suite");
  write_suite(suite, dir);
  const auto imported = import_labeled(dir / "DRIFT.csv", "DRIFT-FILE");
  REQUIRE(imported.flights.size() == suite.datasets[1].flights.size());
  for (std::size_t i = 0; i < imported.flights.size(); ++i) {
    CHECK(imported.flights[i].labels == suite.datasets[1].flights[i].labels);
  }
  CHECK(std::filesystem::exists(dir / "manifest.json"));
}
