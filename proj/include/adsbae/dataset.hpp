#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "adsbae/error.hpp"
#include "adsbae/phase.hpp"
#include "adsbae/trajectory.hpp"

namespace adsbae::dataset {

inline constexpr std::size_t kFeatureCount = 5;
inline constexpr std::size_t kWindowLength = 30;
inline constexpr std::array<const char*, kFeatureCount> kFeatureNames = {
    "altitude", "consecutive_delta", "tracking_delta", "vertical_rate", "groundspeed"};

// Model inputs of one message, in the fixed order of kFeatureNames.
struct FeatureVector {
  double altitude = 0.0;           // ft
  double consecutive_delta = 0.0;  // km
  double tracking_delta = 0.0;     // degrees, signed
  double vertical_rate = 0.0;      // ft/min
  double groundspeed = 0.0;        // kt

  std::array<double, kFeatureCount> to_array() const {
    return {altitude, consecutive_delta, tracking_delta, vertical_rate, groundspeed};
  }
};

struct FeatureRow {
  FeatureVector features;
  Phase phase = Phase::Cruise;
  double timestamp = 0.0;
  std::uint8_t altered = 0;
};

// A window of consecutive observations, row-major [row][feature].
struct FeatureWindow {
  std::string flight_id;
  double start_timestamp = 0.0;
  Phase phase = Phase::Cruise;
  int label = 0;
  std::vector<double> values;

  std::size_t rows(std::size_t features = kFeatureCount) const { return values.size() / features; }
  bool operator==(const FeatureWindow&) const = default;
};

/// Per point: altitude, distance to the previous point, signed deviation of
/// the broadcast track from the bearing toward the arrival airport, vertical
/// rate and groundspeed. Tracking delta is 0 when the aircraft sits exactly on
/// the arrival airport. `labels` may be empty (all unaltered).
std::vector<FeatureRow> extract_features(const Trajectory& traj, const std::vector<Phase>& phases,
                                         const std::vector<std::uint8_t>& labels = {});

/// Sliding windows of window_len rows. Window phase is the phase of its last
/// row; label is 1 when any row was altered. Fewer rows than window_len
/// yields no window.
std::vector<FeatureWindow> make_windows(const std::vector<FeatureRow>& rows, const std::string& flight_id,
                                        std::size_t window_len = kWindowLength, std::size_t stride = 1);

/// Number of windows make_windows produces.
std::size_t window_count(std::size_t rows, std::size_t window_len, std::size_t stride);

// Per-feature z-score statistics.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  std::size_t features() const { return mean.size(); }
  bool operator==(const Standardizer&) const = default;
};

/// Population mean and standard deviation of every feature over all rows of
/// the windows. Throws DegenerateFeatureError when a feature has zero variance.
Standardizer fit_standardizer(std::span<const FeatureWindow> windows, std::size_t features = kFeatureCount,
                              std::span<const char* const> names = kFeatureNames);

std::vector<FeatureWindow> apply_standardizer(const Standardizer& s, std::span<const FeatureWindow> windows);
void apply_standardizer_in_place(const Standardizer& s, std::vector<FeatureWindow>& windows);

// Indices of the original batch grouped by phase, in original relative order.
struct PhasePermutation {
  std::array<std::vector<std::size_t>, kPhaseCount> indices;
  std::size_t total = 0;
};

PhasePermutation sort_into_minibatches(std::span<const Phase> phases);
PhasePermutation sort_into_minibatches(std::span<const FeatureWindow> batch);

/// Scatters per-phase outputs back to the original batch order. Throws
/// ContractError when a group size differs from the permutation record.
template <typename T>
std::vector<T> restore_order(std::array<std::vector<T>, kPhaseCount> outputs, const PhasePermutation& perm) {
  std::vector<T> out(perm.total);
  for (std::size_t p = 0; p < kPhaseCount; ++p) {
    if (outputs[p].size() != perm.indices[p].size()) {
      throw ContractError("restore_order: phase group " + std::to_string(p) + " has " +
                          std::to_string(outputs[p].size()) + " items, permutation expects " +
                          std::to_string(perm.indices[p].size()));
    }
    for (std::size_t k = 0; k < outputs[p].size(); ++k) out[perm.indices[p][k]] = std::move(outputs[p][k]);
  }
  return out;
}

/// Gathers the per-phase mini-batches described by the permutation.
template <typename T>
std::array<std::vector<T>, kPhaseCount> gather(std::span<const T> batch, const PhasePermutation& perm) {
  std::array<std::vector<T>, kPhaseCount> out;
  for (std::size_t p = 0; p < kPhaseCount; ++p) {
    out[p].reserve(perm.indices[p].size());
    for (std::size_t i : perm.indices[p]) out[p].push_back(batch[i]);
  }
  return out;
}

// One JSON object per line:
// {"flight_id":..,"start_timestamp":..,"phase":"CRUISE","label":0,"values":[[..5..],..30..]}
void write_records(std::span<const FeatureWindow> windows, const std::filesystem::path& path,
                   std::size_t features = kFeatureCount);
std::vector<FeatureWindow> read_records(const std::filesystem::path& path);

/// Splits into n contiguous shards `<dir>/<name>-<k>-of-<n>.jsonl`, k = 0..n-1.
std::vector<std::filesystem::path> write_sharded(std::span<const FeatureWindow> windows,
                                                 const std::filesystem::path& dir, const std::string& name,
                                                 std::size_t shards, std::size_t features = kFeatureCount);
/// Reads every shard of `name` in shard order.
std::vector<FeatureWindow> read_sharded(const std::filesystem::path& dir, const std::string& name);

}  // namespace adsbae::dataset
