#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "adsbae/trajectory.hpp"

namespace adsbae {

// Flight phase, the discriminant that selects a decoder.
enum class Phase : int { Climb = 0, Cruise = 1, Descent = 2 };

inline constexpr std::size_t kPhaseCount = 3;
inline constexpr std::array<Phase, kPhaseCount> kAllPhases = {Phase::Climb, Phase::Cruise, Phase::Descent};

std::string_view to_string(Phase phase);
Phase parse_phase(std::string_view text);
inline std::size_t index_of(Phase phase) { return static_cast<std::size_t>(phase); }

}  // namespace adsbae

namespace adsbae::phase {

// Breakpoints of the trapezoidal memberships.
struct PhaseConfig {
  double altitude_low_ft = 10000.0;   // high-altitude membership is 0 at or below
  double altitude_high_ft = 25000.0;  // ... and 1 at or above
  double level_band_fpm = 300.0;      // |vr| within the band is fully level
  double cruise_speed_kt = 250.0;     // groundspeed fully supporting cruise
  double speed_ramp_kt = 100.0;       // width of the groundspeed ramp below cruise_speed_kt
  std::size_t smoothing_window = 5;   // majority filter width (odd)
  double cruise_override_km = 300.0;
};

struct Memberships {
  double climb = 0.0;
  double cruise = 0.0;
  double descent = 0.0;
};

/// Fuzzy memberships of one observation:
///   climb   = up(vr)
///   descent = down(vr)
///   cruise  = min(level(vr), high(altitude), fast(groundspeed))
/// where level is 1 for |vr| <= band and 0 beyond 2*band, up/down are the
/// complementary ramps on each side, high ramps between the altitude
/// breakpoints and fast ramps over speed_ramp_kt below cruise_speed_kt.
Memberships memberships(const TrajectoryPoint& p, const PhaseConfig& config = {});

/// Per point, the phase of maximal membership. Points where no membership
/// reaches 0.5 (level flight below cruise) inherit the previous decided phase
/// (the next one for a leading run; CRUISE if nothing is decided). The result
/// is then passed through a centred majority filter of width smoothing_window.
std::vector<Phase> segment_phases(const Trajectory& traj, const PhaseConfig& config = {});

/// Majority filter; ties keep the original label, then prefer the earliest.
std::vector<Phase> majority_smooth(const std::vector<Phase>& phases, std::size_t window);

/// Forces CRUISE on every point farther than threshold_km from both airports.
std::vector<Phase> apply_cruise_override(std::vector<Phase> phases, const Trajectory& traj,
                                         double threshold_km = 300.0);

/// segment_phases followed by apply_cruise_override.
std::vector<Phase> label_phases(const Trajectory& traj, const PhaseConfig& config = {});

}  // namespace adsbae::phase
