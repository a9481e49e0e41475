#include "adsbae/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "adsbae/error.hpp"
#include "adsbae/geo.hpp"
#include "adsbae/ingest.hpp"

namespace adsbae::attacks {

using json = nlohmann::json;

namespace {

constexpr const char* kManifestFormat = "adsbae.suite-manifest";
constexpr int kManifestVersion = 1;
constexpr int kPlacementAttempts = 20;

void require_range(const Trajectory& traj, const AttackScenario& s) {
  if (!(s.start_index < s.end_index && s.end_index <= traj.size())) {
    std::ostringstream os;
    os << to_string(s.kind) << " range [" << s.start_index << ", " << s.end_index << ") is invalid for "
       << traj.size() << " messages of " << traj.flight_id;
    throw ContractError(os.str());
  }
}

AttackResult untouched(const Trajectory& traj) {
  return {traj, std::vector<std::uint8_t>(traj.size(), 0), true, {}};
}

std::string format_step(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

std::string to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::Drift: return "drift";
    case AttackKind::Offset: return "offset";
    case AttackKind::Crash: return "crash";
  }
  return "unknown";
}

AttackKind parse_attack_kind(const std::string& text) {
  if (text == "drift") return AttackKind::Drift;
  if (text == "offset") return AttackKind::Offset;
  if (text == "crash") return AttackKind::Crash;
  throw ContractError("unknown attack kind '" + text + "'");
}

std::string to_string(DriftTarget target) {
  return target == DriftTarget::Altitude ? "altitude" : "groundspeed";
}

DriftTarget parse_drift_target(const std::string& text) {
  if (text == "altitude") return DriftTarget::Altitude;
  if (text == "groundspeed") return DriftTarget::Groundspeed;
  throw ContractError("unsupported drift target '" + text + "'");
}

json to_json(const AttackScenario& s) {
  json j{{"kind", to_string(s.kind)}, {"start_index", s.start_index}};
  switch (s.kind) {
    case AttackKind::Drift:
      j["target"] = to_string(s.target);
      j["step_magnitude"] = s.step_magnitude;
      j["end_index"] = s.end_index;
      break;
    case AttackKind::Offset:
      j["offset_deg"] = s.offset_deg;
      j["end_index"] = s.end_index;
      break;
    case AttackKind::Crash:
      j["crash"] = {{"vertical_rate_fpm", s.crash.vertical_rate_fpm},
                    {"groundspeed_decay_kt", s.crash.groundspeed_decay_kt},
                    {"ground_altitude_ft", s.crash.ground_altitude_ft},
                    {"min_groundspeed_kt", s.crash.min_groundspeed_kt}};
      break;
  }
  return j;
}

AttackScenario scenario_from_json(const json& j) {
  AttackScenario s;
  s.kind = parse_attack_kind(j.at("kind").get<std::string>());
  s.start_index = j.at("start_index").get<std::size_t>();
  s.end_index = j.value("end_index", std::size_t{0});
  if (j.contains("target")) s.target = parse_drift_target(j["target"].get<std::string>());
  s.step_magnitude = j.value("step_magnitude", s.step_magnitude);
  s.offset_deg = j.value("offset_deg", s.offset_deg);
  if (j.contains("crash")) {
    const auto& c = j["crash"];
    s.crash.vertical_rate_fpm = c.value("vertical_rate_fpm", s.crash.vertical_rate_fpm);
    s.crash.groundspeed_decay_kt = c.value("groundspeed_decay_kt", s.crash.groundspeed_decay_kt);
    s.crash.ground_altitude_ft = c.value("ground_altitude_ft", s.crash.ground_altitude_ft);
    s.crash.min_groundspeed_kt = c.value("min_groundspeed_kt", s.crash.min_groundspeed_kt);
  }
  return s;
}

AttackResult apply_drift(const Trajectory& traj, const AttackScenario& s) {
  require_range(traj, s);
  if (!std::isfinite(s.step_magnitude)) throw ContractError("drift step must be finite");
  AttackResult r = untouched(traj);
  for (std::size_t k = s.start_index; k < s.end_index; ++k) {
    const double shift = static_cast<double>(k - s.start_index + 1) * s.step_magnitude;
    auto& p = r.trajectory.points[k];
    if (s.target == DriftTarget::Altitude) {
      p.altitude += shift;
    } else {
      p.groundspeed += shift;
    }
    r.labels[k] = 1;
  }
  return r;
}

AttackResult apply_offset(const Trajectory& traj, const AttackScenario& s) {
  require_range(traj, s);
  if (!std::isfinite(s.offset_deg)) throw ContractError("offset must be finite");
  AttackResult r = untouched(traj);
  for (std::size_t k = s.start_index; k < s.end_index; ++k) {
    auto& p = r.trajectory.points[k];
    const double lat = p.latitude + s.offset_deg;
    const double lon = p.longitude + s.offset_deg;
    if (!valid_coordinates(lat, lon)) {
      std::ostringstream os;
      os << "offset moves message " << k << " of " << traj.flight_id << " out of range (" << lat << ", " << lon
         << ")";
      throw ContractError(os.str());
    }
    p.latitude = lat;
    p.longitude = lon;
    r.labels[k] = 1;
  }
  return r;
}

std::size_t crash_length(double altitude_ft, const CrashParams& params, double period_s) {
  const double per_step = -params.vertical_rate_fpm * period_s / 60.0;
  if (!(per_step > 0.0)) throw ContractError("crash vertical rate must be negative");
  const double drop = altitude_ft - params.ground_altitude_ft;
  if (drop <= 0.0) return 1;
  return static_cast<std::size_t>(std::ceil(drop / per_step - 1e-9));
}

AttackResult apply_crash(const Trajectory& traj, const AttackScenario& s) {
  const auto& c = s.crash;
  if (s.start_index == 0 || s.start_index >= traj.size()) {
    throw ContractError("crash start must be in [1, " + std::to_string(traj.size()) + ") for " + traj.flight_id);
  }
  if (!(c.vertical_rate_fpm < 0.0) || !std::isfinite(c.vertical_rate_fpm)) {
    throw ContractError("crash vertical rate must be negative and finite");
  }
  if (!std::isfinite(c.groundspeed_decay_kt) || !std::isfinite(c.ground_altitude_ft) ||
      !std::isfinite(c.min_groundspeed_kt)) {
    throw ContractError("crash parameters must be finite");
  }
  AttackResult r = untouched(traj);
  const TrajectoryPoint base = traj.points[s.start_index - 1];
  const double floor = std::min(c.min_groundspeed_kt, base.groundspeed);
  double altitude = base.altitude;
  geo::GeoPoint pos = geo::position(base);
  r.reached_ground = false;
  std::size_t last = traj.size() - 1;
  for (std::size_t k = s.start_index; k < traj.size(); ++k) {
    const double dt = traj.points[k].timestamp - traj.points[k - 1].timestamp;
    const double step = static_cast<double>(k - s.start_index + 1);
    altitude += c.vertical_rate_fpm * dt / 60.0;
    const double gs = std::max(floor, base.groundspeed - step * c.groundspeed_decay_kt);
    pos = geo::destination(pos, base.track, gs * geo::kKnotsToKmPerSecond * dt);
    auto& p = r.trajectory.points[k];
    p.latitude = pos.latitude;
    p.longitude = pos.longitude;
    p.altitude = std::max(altitude, c.ground_altitude_ft);
    p.vertical_rate = c.vertical_rate_fpm;
    p.groundspeed = gs;
    p.track = base.track;
    r.labels[k] = 1;
    if (altitude <= c.ground_altitude_ft) {
      r.reached_ground = true;
      last = k;
      break;
    }
  }
  r.trajectory.points.resize(last + 1);
  r.labels.resize(last + 1);
  if (!r.reached_ground) {
    r.warnings.push_back("crash on " + traj.flight_id + " ends at " + std::to_string(altitude) +
                         " ft without reaching the ground");
  }
  return r;
}

AttackResult apply(const Trajectory& traj, const AttackScenario& s) {
  switch (s.kind) {
    case AttackKind::Drift: return apply_drift(traj, s);
    case AttackKind::Offset: return apply_offset(traj, s);
    case AttackKind::Crash: return apply_crash(traj, s);
  }
  throw ContractError("unknown attack kind");
}

// ---------------------------------------------------------------------------
// Suites

SuiteConfig parse_suite_config(const json& j) {
  SuiteConfig cfg;
  cfg.seed = j.value("seed", cfg.seed);
  cfg.include_world = j.value("include_world", cfg.include_world);
  cfg.cruise_margin_km = j.value("cruise_margin_km", cfg.cruise_margin_km);
  for (const auto& d : j.value("datasets", json::array())) {
    DatasetSpec spec;
    spec.kind = parse_attack_kind(d.at("kind").get<std::string>());
    spec.name = d.value("name", to_string(spec.kind));
    if (d.contains("target")) spec.target = parse_drift_target(d["target"].get<std::string>());
    spec.offset_deg = d.value("offset_deg", spec.offset_deg);
    spec.length = d.value("length", spec.length);
    if (d.contains("crash")) {
      const auto& c = d["crash"];
      spec.crash.vertical_rate_fpm = c.value("vertical_rate_fpm", spec.crash.vertical_rate_fpm);
      spec.crash.groundspeed_decay_kt = c.value("groundspeed_decay_kt", spec.crash.groundspeed_decay_kt);
      spec.crash.ground_altitude_ft = c.value("ground_altitude_ft", spec.crash.ground_altitude_ft);
      spec.crash.min_groundspeed_kt = c.value("min_groundspeed_kt", spec.crash.min_groundspeed_kt);
    }
    if (d.contains("step") && d["step"].is_array()) {
      for (const auto& v : d["step"]) {
        DatasetSpec swept = spec;
        swept.step_magnitude = v.get<double>();
        swept.name = spec.name + "@" + format_step(swept.step_magnitude);
        cfg.datasets.push_back(swept);
      }
      continue;
    }
    spec.step_magnitude = d.value("step", spec.step_magnitude);
    cfg.datasets.push_back(spec);
  }
  return cfg;
}

SuiteConfig default_suite_config(std::uint64_t seed) {
  SuiteConfig cfg;
  cfg.seed = seed;
  DatasetSpec drift;
  drift.name = "DRIFT";
  drift.kind = AttackKind::Drift;
  DatasetSpec offset;
  offset.name = "OFFSET";
  offset.kind = AttackKind::Offset;
  offset.length = 300;
  DatasetSpec crash;
  crash.name = "CRASH";
  crash.kind = AttackKind::Crash;
  cfg.datasets = {drift, offset, crash};
  return cfg;
}

std::pair<std::size_t, std::size_t> far_cruise_range(const Trajectory& traj, double margin_km) {
  const auto dep = geo::position(traj.departure);
  const auto arr = geo::position(traj.arrival);
  std::pair<std::size_t, std::size_t> best{0, 0};
  std::size_t run_start = 0;
  bool in_run = false;
  for (std::size_t k = 0; k <= traj.size(); ++k) {
    bool far = false;
    if (k < traj.size()) {
      const auto p = geo::position(traj.points[k]);
      far = geo::vincenty_distance(p, dep) > margin_km && geo::vincenty_distance(p, arr) > margin_km;
    }
    if (far && !in_run) {
      run_start = k;
      in_run = true;
    } else if (!far && in_run) {
      if (k - run_start > best.second - best.first) best = {run_start, k};
      in_run = false;
    }
  }
  return best;
}

namespace {

bool stays_far(const AttackResult& r, const Trajectory& traj, std::size_t from, double margin_km) {
  const auto dep = geo::position(traj.departure);
  const auto arr = geo::position(traj.arrival);
  for (std::size_t k = from; k < r.trajectory.size(); ++k) {
    if (!r.labels[k]) continue;
    const auto p = geo::position(r.trajectory.points[k]);
    if (geo::vincenty_distance(p, dep) <= margin_km || geo::vincenty_distance(p, arr) <= margin_km) return false;
  }
  return true;
}

SuiteDataset world_dataset(const std::vector<Trajectory>& clean) {
  SuiteDataset ds;
  ds.name = "WORLD";
  for (const auto& t : clean) {
    ds.flights.push_back({t, std::vector<std::uint8_t>(t.size(), 0)});
    ds.manifest.push_back({t.flight_id, std::nullopt, false, true});
  }
  return ds;
}

SuiteDataset attacked_dataset(const std::vector<Trajectory>& clean, const DatasetSpec& spec, std::mt19937_64& rng,
                              double margin_km) {
  SuiteDataset ds;
  ds.name = spec.name;
  ds.kind = spec.kind;
  for (const auto& t : clean) {
    const auto [first, last] = far_cruise_range(t, margin_km);
    std::optional<AttackResult> placed;
    AttackScenario scenario;
    scenario.kind = spec.kind;
    scenario.target = spec.target;
    scenario.step_magnitude = spec.step_magnitude;
    scenario.offset_deg = spec.offset_deg;
    scenario.crash = spec.crash;
    const std::size_t lo = std::max<std::size_t>(first, 1);
    for (int attempt = 0; attempt < kPlacementAttempts && last > lo; ++attempt) {
      std::size_t need = spec.length;
      if (spec.kind == AttackKind::Crash) {
        double top = 0.0;
        for (std::size_t k = lo; k < last; ++k) top = std::max(top, t.points[k].altitude);
        need = crash_length(top, spec.crash);
      }
      if (need == 0 || last - lo < need) break;
      std::uniform_int_distribution<std::size_t> pick(lo, last - need);
      scenario.start_index = pick(rng);
      scenario.end_index = spec.kind == AttackKind::Crash ? 0 : scenario.start_index + need;
      auto r = apply(t, scenario);
      if (spec.kind != AttackKind::Crash || (r.reached_ground && stays_far(r, t, scenario.start_index, margin_km))) {
        placed = std::move(r);
        break;
      }
    }
    if (!placed) {
      ds.manifest.push_back({t.flight_id, std::nullopt, true, false});
      continue;
    }
    ds.manifest.push_back({t.flight_id, scenario, false, placed->reached_ground});
    ds.flights.push_back({std::move(placed->trajectory), std::move(placed->labels)});
  }
  return ds;
}

}  // namespace

Suite build_eval_suite(const std::vector<Trajectory>& clean, const SuiteConfig& config) {
  Suite suite;
  suite.seed = config.seed;
  if (config.include_world) suite.datasets.push_back(world_dataset(clean));
  for (std::size_t d = 0; d < config.datasets.size(); ++d) {
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(d)};
    std::mt19937_64 rng(seq);
    suite.datasets.push_back(attacked_dataset(clean, config.datasets[d], rng, config.cruise_margin_km));
  }
  return suite;
}

json manifest_json(const Suite& suite) {
  json datasets = json::array();
  for (const auto& ds : suite.datasets) {
    json flights = json::array();
    for (const auto& f : ds.manifest) {
      json entry{{"flight_id", f.flight_id}, {"skipped", f.skipped}, {"reached_ground", f.reached_ground}};
      entry["scenario"] = f.scenario ? to_json(*f.scenario) : json(nullptr);
      flights.push_back(std::move(entry));
    }
    json d{{"name", ds.name}, {"kind", ds.kind ? json(to_string(*ds.kind)) : json(nullptr)}, {"flights", flights}};
    if (!ds.source.empty()) d["source"] = ds.source;
    datasets.push_back(std::move(d));
  }
  return json{{"format", kManifestFormat}, {"version", kManifestVersion}, {"seed", suite.seed}, {"datasets", datasets}};
}

Suite replay_manifest(const std::vector<Trajectory>& clean, const json& manifest) {
  if (manifest.value("format", std::string{}) != kManifestFormat) throw ContractError("not a suite manifest");
  std::map<std::string, const Trajectory*> by_id;
  for (const auto& t : clean) by_id[t.flight_id] = &t;
  Suite suite;
  suite.seed = manifest.at("seed").get<std::uint64_t>();
  for (const auto& d : manifest.at("datasets")) {
    if (d.contains("source")) {
      suite.datasets.push_back(import_labeled(d["source"].get<std::string>(), d.at("name").get<std::string>()));
      continue;
    }
    SuiteDataset ds;
    ds.name = d.at("name").get<std::string>();
    if (!d.at("kind").is_null()) ds.kind = parse_attack_kind(d["kind"].get<std::string>());
    for (const auto& f : d.at("flights")) {
      SuiteFlight entry;
      entry.flight_id = f.at("flight_id").get<std::string>();
      entry.skipped = f.value("skipped", false);
      entry.reached_ground = f.value("reached_ground", true);
      if (!f.at("scenario").is_null()) entry.scenario = scenario_from_json(f["scenario"]);
      ds.manifest.push_back(entry);
      if (entry.skipped) continue;
      const auto it = by_id.find(entry.flight_id);
      if (it == by_id.end()) throw ContractError("manifest flight " + entry.flight_id + " is not in the clean set");
      if (entry.scenario) {
        auto r = apply(*it->second, *entry.scenario);
        ds.flights.push_back({std::move(r.trajectory), std::move(r.labels)});
      } else {
        ds.flights.push_back({*it->second, std::vector<std::uint8_t>(it->second->size(), 0)});
      }
    }
    suite.datasets.push_back(std::move(ds));
  }
  return suite;
}

SuiteDataset import_labeled(const std::filesystem::path& path, const std::string& name) {
  auto loaded = ingest::load_trajectories(path, ingest::InputFormat::Csv);
  SuiteDataset ds;
  ds.name = name;
  ds.source = path.string();
  for (std::size_t i = 0; i < loaded.trajectories.size(); ++i) {
    auto& t = loaded.trajectories[i];
    auto labels = i < loaded.labels.size() ? loaded.labels[i] : std::vector<std::uint8_t>{};
    if (labels.size() != t.size()) labels.assign(t.size(), 0);
    ds.manifest.push_back({t.flight_id, std::nullopt, false, true});
    ds.flights.push_back({std::move(t), std::move(labels)});
  }
  return ds;
}

void write_suite(const Suite& suite, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& ds : suite.datasets) {
    std::vector<Trajectory> trajs;
    std::vector<std::vector<std::uint8_t>> labels;
    for (const auto& f : ds.flights) {
      trajs.push_back(f.trajectory);
      labels.push_back(f.labels);
    }
    ingest::write_trajectories_csv(dir / (ds.name + ".csv"), trajs, labels);
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << manifest_json(suite).dump(2) << '\n';
}

}  // namespace adsbae::attacks
