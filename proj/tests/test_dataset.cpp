#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <vector>

#include "adsbae/dataset.hpp"
#include "adsbae/error.hpp"
#include "adsbae/geo.hpp"
#include "support.hpp"

using namespace adsbae;
using namespace adsbae::dataset;

namespace {

std::vector<FeatureRow> rows(std::size_t n, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<FeatureRow> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    out[k].features = {30000.0 + 100 * nd(rng), 0.5 + 0.01 * nd(rng), nd(rng), 50 * nd(rng), 450 + nd(rng)};
    out[k].phase = kAllPhases[k % 3];
    out[k].timestamp = 2.0 * static_cast<double>(k);
  }
  return out;
}

std::vector<FeatureWindow> random_windows(std::size_t n, std::uint64_t seed) {
  std::vector<FeatureWindow> out;
  const auto r = rows(n + kWindowLength, seed);
  auto w = make_windows(r, "F" + std::to_string(seed));
  w.resize(n);
  return w;
}

}  // namespace

TEST_CASE("feature extraction") {
  Trajectory t;
  t.departure = {"DEP", 45.0, 0.0};
  t.arrival = {"ARR", 45.0, 10.0};
  geo::GeoPoint p{45.0, 3.0};
  for (int k = 0; k < 3; ++k) {
    const double bearing = geo::initial_bearing(p, geo::position(t.arrival));
    t.points.push_back({2.0 * k, p.latitude, p.longitude, 34000.0 + k, 450.0, 64.0, bearing});
    p = geo::destination(p, bearing, 0.46);
  }
  const std::vector<Phase> ph(3, Phase::Cruise);
  const auto f = extract_features(t, ph, {0, 1, 0});
  REQUIRE(f.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(f[k].features.tracking_delta == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(f[k].features.altitude == 34000.0 + static_cast<double>(k));
    CHECK(f[k].features.vertical_rate == 64.0);
    CHECK(f[k].features.groundspeed == 450.0);
    CHECK(f[k].timestamp == 2.0 * static_cast<double>(k));
  }
  CHECK(f[0].features.consecutive_delta == 0.0);
  CHECK(f[1].features.consecutive_delta == doctest::Approx(0.46).epsilon(1e-3));
  CHECK(f[1].altered == 1);

  t.points[2].track = geo::normalize_degrees(t.points[2].track - 30.0);
  CHECK(extract_features(t, ph)[2].features.tracking_delta == doctest::Approx(30.0).epsilon(1e-9));

  Trajectory still;
  still.arrival = {"ARR", 45.0, 10.0};
  still.points.assign(4, TrajectoryPoint{0.0, 45.0, 5.0});
  for (const auto& r : extract_features(still, std::vector<Phase>(4, Phase::Climb))) {
    CHECK(r.features.consecutive_delta == 0.0);
  }
  CHECK_THROWS_AS(extract_features(still, ph), ContractError);
}

TEST_CASE("window counts and tags") {
  CHECK(make_windows(rows(30), "a").size() == 1);
  CHECK(make_windows(rows(32), "a").size() == 3);
  CHECK(make_windows(rows(29), "a").empty());
  const auto w = make_windows(rows(90), "a", 30, 30);
  REQUIRE(w.size() == 3);
  CHECK(w[1].start_timestamp == 60.0);
  CHECK(w[2].values[0] == rows(90)[60].features.altitude);
  for (std::size_t n : {30u, 31u, 59u, 100u, 257u}) {
    for (std::size_t s : {1u, 2u, 5u, 7u}) {
      CHECK(make_windows(rows(n), "a", 30, s).size() == window_count(n, 30, s));
      CHECK(window_count(n, 30, s) == (n - 30) / s + 1);
    }
  }
  auto r = rows(40);
  r[35].altered = 1;
  const auto tagged = make_windows(r, "a");
  for (std::size_t i = 0; i < tagged.size(); ++i) {
    CHECK(tagged[i].phase == r[i + 29].phase);
    CHECK(tagged[i].label == (i >= 6 ? 1 : 0));
    CHECK(tagged[i].values.size() == 150);
  }
  CHECK_THROWS_AS(make_windows(rows(40), "a", 30, 0), ContractError);
}

TEST_CASE("standardizer") {
  const auto w = random_windows(200, 3);
  const auto s = fit_standardizer(w);
  const auto z = apply_standardizer(s, w);
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    double mean = 0.0, sq = 0.0, n = 0.0;
    for (const auto& win : z) {
      for (std::size_t t = 0; t < kWindowLength; ++t) {
        mean += win.values[t * kFeatureCount + f];
        n += 1.0;
      }
    }
    mean /= n;
    for (const auto& win : z) {
      for (std::size_t t = 0; t < kWindowLength; ++t) sq += std::pow(win.values[t * kFeatureCount + f] - mean, 2);
    }
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(std::sqrt(sq / n) - 1.0) < 1e-6);
  }
  auto eval = random_windows(1, 4);
  const auto ze = apply_standardizer(s, eval);
  CHECK(ze[0].values[7] == doctest::Approx((eval[0].values[7] - s.mean[2]) / s.stddev[2]).epsilon(1e-15));

  auto flat = w;
  for (auto& win : flat) {
    for (std::size_t t = 0; t < kWindowLength; ++t) win.values[t * kFeatureCount + 3] = 0.0;
  }
  try {
    fit_standardizer(flat);
    FAIL("expected a degenerate feature");
  } catch (const DegenerateFeatureError& e) {
    CHECK(e.feature() == "vertical_rate");
  }
}

TEST_CASE("sorting into mini-batches") {
  using P = Phase;
  const std::vector<P> phases{P::Cruise, P::Descent, P::Cruise, P::Climb};
  const auto perm = sort_into_minibatches(phases);
  CHECK(perm.indices[0].size() == 1);
  CHECK(perm.indices[1] == std::vector<std::size_t>{0, 2});
  CHECK(perm.indices[2].size() == 1);
  const auto groups = gather<P>(phases, perm);
  CHECK(restore_order(groups, perm) == phases);

  const auto empty = sort_into_minibatches(std::span<const Phase>{});
  for (const auto& g : empty.indices) CHECK(g.empty());

  auto broken = groups;
  broken[1].pop_back();
  CHECK_THROWS_AS(restore_order(broken, perm), ContractError);
}

TEST_CASE("restore_order inverts sort_into_minibatches on random batches") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> pick(0, 2), size(0, 300);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Phase> phases(static_cast<std::size_t>(size(rng)));
    std::vector<int> ids(phases.size());
    for (std::size_t i = 0; i < phases.size(); ++i) {
      phases[i] = kAllPhases[static_cast<std::size_t>(pick(rng))];
      ids[i] = static_cast<int>(i);
    }
    const auto perm = sort_into_minibatches(phases);
    const auto back = restore_order(gather<int>(ids, perm), perm);
    REQUIRE(back == ids);
  }
}

TEST_CASE("record roundtrip, shards and corruption") {
  const auto dir = testsupport::temp_dir("records");
  std::vector<FeatureWindow> w;
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto part = random_windows(100, 10 + s);
    w.insert(w.end(), part.begin(), part.end());
  }
  w[3].label = 1;
  w[4].values[17] = 1.0 / 3.0;
  write_records(w, dir / "all.jsonl");
  CHECK(read_records(dir / "all.jsonl") == w);

  const auto paths = write_sharded(w, dir, "train", 4);
  REQUIRE(paths.size() == 4);
  CHECK(paths[2].filename() == "train-2-of-4.jsonl");
  CHECK(read_sharded(dir, "train") == w);

  {
    std::ifstream in(dir / "all.jsonl");
    std::ofstream out(dir / "cut.jsonl");
    std::string line;
    for (int i = 0; i < 5 && std::getline(in, line); ++i) out << line << "\n";
    std::getline(in, line);
    out << line.substr(0, line.size() / 2) << "\n";
  }
  try {
    read_records(dir / "cut.jsonl");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.record_index() == 5);
  }
  CHECK_THROWS_AS(read_records(dir / "nothing.jsonl"), IoError);
}
