#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "adsbae/trajectory.hpp"

namespace adsbae::attacks {

enum class AttackKind { Drift, Offset, Crash };
enum class DriftTarget { Altitude, Groundspeed };

std::string to_string(AttackKind kind);
AttackKind parse_attack_kind(const std::string& text);
std::string to_string(DriftTarget target);
DriftTarget parse_drift_target(const std::string& text);

struct CrashParams {
  double vertical_rate_fpm = -3000.0;
  double groundspeed_decay_kt = 2.0;  // per message
  double ground_altitude_ft = 0.0;
  double min_groundspeed_kt = 120.0;  // decay floor

  bool operator==(const CrashParams&) const = default;
};

struct AttackScenario {
  AttackKind kind = AttackKind::Drift;
  DriftTarget target = DriftTarget::Altitude;
  double step_magnitude = -25.0;  // ft or kt per message
  double offset_deg = 1.0;        // added to latitude and longitude
  std::size_t start_index = 0;
  std::size_t end_index = 0;      // exclusive; unused by crash, which runs to the ground
  CrashParams crash;

  bool operator==(const AttackScenario&) const = default;
};

nlohmann::json to_json(const AttackScenario& s);
AttackScenario scenario_from_json(const nlohmann::json& j);

struct AttackResult {
  Trajectory trajectory;
  std::vector<std::uint8_t> labels;  // one per output message
  bool reached_ground = true;        // crash only
  std::vector<std::string> warnings;
};

/// Message k in [start, end) gets its target shifted by (k - start + 1) * step.
AttackResult apply_drift(const Trajectory& traj, const AttackScenario& scenario);

/// Constant shift of latitude and longitude inside [start, end). Throws
/// ContractError when a shifted coordinate leaves the valid range.
AttackResult apply_offset(const Trajectory& traj, const AttackScenario& scenario);

/// Steady dive from start_index: altitude follows the vertical rate over each
/// message interval, groundspeed decays linearly down to a floor, the track of
/// the message before the attack is held and positions are dead-reckoned. The
/// signal stops at the message that reaches ground altitude. When the track
/// ends first, a warning is recorded and reached_ground is false.
AttackResult apply_crash(const Trajectory& traj, const AttackScenario& scenario);

AttackResult apply(const Trajectory& traj, const AttackScenario& scenario);

/// Messages needed to descend from altitude_ft to the ground with a period_s cadence.
std::size_t crash_length(double altitude_ft, const CrashParams& params, double period_s = 2.0);

// ---------------------------------------------------------------------------
// Evaluation suites

struct DatasetSpec {
  std::string name;
  AttackKind kind = AttackKind::Drift;
  DriftTarget target = DriftTarget::Altitude;
  double step_magnitude = -25.0;
  double offset_deg = 1.0;
  std::size_t length = 600;  // altered messages for drift and offset
  CrashParams crash;
};

struct SuiteConfig {
  std::uint64_t seed = 0;
  bool include_world = true;
  // Attacks are placed where every altered message is farther than this from
  // both airports, so the phase override tags them CRUISE.
  double cruise_margin_km = 330.0;
  std::vector<DatasetSpec> datasets;
};

/// Parses the suite JSON. A drift dataset whose "step" is an array expands
/// into one dataset per value, named "<name>@<step>".
SuiteConfig parse_suite_config(const nlohmann::json& j);
/// WORLD plus DRIFT (-25 ft altitude), OFFSET (+1 degree) and CRASH defaults.
SuiteConfig default_suite_config(std::uint64_t seed);

struct LabeledTrajectory {
  Trajectory trajectory;
  std::vector<std::uint8_t> labels;
};

struct SuiteFlight {
  std::string flight_id;
  std::optional<AttackScenario> scenario;  // empty for WORLD and skipped flights
  bool skipped = false;                    // no room for the attack on this flight
  bool reached_ground = true;
};

struct SuiteDataset {
  std::string name;
  std::optional<AttackKind> kind;  // empty for WORLD and imported recordings
  std::string source;              // file of an imported recording
  std::vector<LabeledTrajectory> flights;
  std::vector<SuiteFlight> manifest;
};

struct Suite {
  std::uint64_t seed = 0;
  std::vector<SuiteDataset> datasets;
};

/// Index range [first, last) of the longest run of messages farther than
/// margin_km from both airports; {0, 0} when there is none.
std::pair<std::size_t, std::size_t> far_cruise_range(const Trajectory& traj, double margin_km);

/// WORLD holds the clean flights unchanged (all labels 0); every other dataset
/// holds one attacked copy of each flight that has room for the attack, with
/// the start drawn from a generator seeded by the suite seed and dataset index.
Suite build_eval_suite(const std::vector<Trajectory>& clean, const SuiteConfig& config);

nlohmann::json manifest_json(const Suite& suite);
/// Re-applies the concrete scenarios of a manifest to the same clean flights.
Suite replay_manifest(const std::vector<Trajectory>& clean, const nlohmann::json& manifest);

/// Externally labeled recording (CSV with a `label` column), e.g. a real hijack.
SuiteDataset import_labeled(const std::filesystem::path& path, const std::string& name);

/// One labeled trajectory CSV per dataset plus manifest.json.
void write_suite(const Suite& suite, const std::filesystem::path& dir);

}  // namespace adsbae::attacks
