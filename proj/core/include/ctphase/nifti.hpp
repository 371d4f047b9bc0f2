#pragma once

#include <string>

#include "ctphase/volume.hpp"

namespace ctphase {

/// Reads a NIfTI-1 volume (.nii, or .nii.gz detected by content). Integer
/// payloads are rescaled into HU via the header's scl_slope / scl_inter.
/// Byte order is taken from the file header.
Volume3D load_volume(const std::string& path);

/// Reads a NIfTI-1 label map. The payload must be an integer type and must
/// not carry an intensity rescale.
LabelMap load_labelmap(const std::string& path);

/// Writes a float32 single-file NIfTI-1 image; gzip-compressed when the
/// path ends in ".gz". Write-then-read reproduces values bit-for-bit.
void save_volume(const Volume3D& volume, const std::string& path);

/// Writes an int32 single-file NIfTI-1 label image.
void save_labelmap(const LabelMap& mask, const std::string& path);

}  // namespace ctphase
