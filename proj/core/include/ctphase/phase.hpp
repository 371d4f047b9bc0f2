#pragma once

#include <array>
#include <string_view>

namespace ctphase {

/// Contrast circulation stage at scan time. Integer codes are fixed: they
/// index class margins, confusion matrices, and serialized class_order.
enum class PhaseLabel : int {
  non_contrast = 0,
  arterial = 1,
  venous = 2,
  delayed = 3,
};

inline constexpr int kNumPhases = 4;

inline constexpr std::array<std::string_view, kNumPhases> kPhaseNames = {
    "non_contrast", "arterial", "venous", "delayed"};

/// Nominal post-injection times (seconds) of the four phases. t = 0 is the
/// injection, so non-contrast anchors at 0.
inline constexpr std::array<double, kNumPhases> kPhaseAnchorSeconds = {0.0, 30.0,
                                                                       70.0, 180.0};

std::string_view to_string(PhaseLabel p);

/// Parses one of the canonical phase tokens; throws DataError otherwise.
PhaseLabel parse_phase(std::string_view s);

inline int phase_code(PhaseLabel p) { return static_cast<int>(p); }

}  // namespace ctphase
