#include "ctphase/phase.hpp"

#include <string>

#include "ctphase/errors.hpp"

namespace ctphase {

std::string_view to_string(PhaseLabel p) { return kPhaseNames[static_cast<int>(p)]; }

PhaseLabel parse_phase(std::string_view s) {
  for (int i = 0; i < kNumPhases; ++i) {
    if (s == kPhaseNames[i]) return static_cast<PhaseLabel>(i);
  }
  throw DataError("unknown phase label '" + std::string(s) +
                  "' (expected non_contrast|arterial|venous|delayed)");
}

}  // namespace ctphase
