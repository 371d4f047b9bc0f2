#pragma once

#include <string>

#include "ctphase/gbdt.hpp"

namespace ctphase {

inline constexpr int kModelSchemaVersion = 1;

/// Versioned JSON model file. Numbers are serialized with full round-trip
/// precision, so save/load/predict reproduces margins exactly.
void save_model(const BoostedModel& model, const std::string& path);

/// Throws DataError on malformed files, schema version mismatches, or a
/// missing organ_order / class_order block.
BoostedModel load_model(const std::string& path);

}  // namespace ctphase
