#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adsbae/trajectory.hpp"

namespace adsbae::ingest {

enum class InputFormat { Csv, JsonLines };

InputFormat parse_format(const std::string& tag);

struct LoadOptions {
  char delimiter = ',';
  // icao -> airport; used when the inline airport columns are absent or empty.
  std::map<std::string, Airport> airports;
};

struct LoadResult {
  std::vector<Trajectory> trajectories;
  // Optional per-message ground-truth labels (column `label`), aligned with
  // trajectories[i].points. Empty inner vector when the column is absent.
  std::vector<std::vector<std::uint8_t>> labels;
  std::size_t dropped_rows = 0;
};

/// Reads one record per message and groups them into one trajectory per
/// flight_id (the `flight_id` column when present, otherwise icao24 + callsign).
/// Rows with a missing or invalid mandatory field are dropped and counted.
/// Throws IoError when the file cannot be read, EmptyInputError when no valid
/// row remains.
LoadResult load_trajectories(const std::filesystem::path& path, InputFormat format,
                             const LoadOptions& options = {});

/// Airports sidecar: delimiter-separated `icao,latitude,longitude` with a header.
std::map<std::string, Airport> load_airports(const std::filesystem::path& path, char delimiter = ',');

/// Writes trajectories in the CSV input schema (plus `flight_id`, and `label`
/// when labels are given). load_trajectories reads it back unchanged.
void write_trajectories_csv(const std::filesystem::path& path, const std::vector<Trajectory>& trajectories,
                            const std::vector<std::vector<std::uint8_t>>& labels = {});

struct ResampleOptions {
  double period = 2.0;   // seconds
  double max_gap = 30.0;  // seconds; longer gaps split the track
};

/// Last-observation-carried-forward resampling onto t0 + k * period. Gaps
/// longer than max_gap split the trajectory and only the longest segment is
/// kept (the earliest on ties). Throws EmptyInputError for an empty input.
Trajectory resample(const Trajectory& traj, const ResampleOptions& options = {});

inline constexpr double kDefaultMaxJumpKm = 20.0;

/// Drops physically impossible leaps: a point is removed when its distance to
/// the last kept point exceeds max_jump_km. A leading point is removed instead
/// when it is the one out of line with the next two. Order is preserved and
/// every surviving consecutive pair is within max_jump_km.
Trajectory filter_outliers(const Trajectory& traj, double max_jump_km = kDefaultMaxJumpKm);

/// resample -> filter_outliers -> resample, so that the output is on the
/// uniform grid again after outliers were removed.
Trajectory clean(const Trajectory& traj, const ResampleOptions& resample_options = {},
                 double max_jump_km = kDefaultMaxJumpKm);

}  // namespace adsbae::ingest
