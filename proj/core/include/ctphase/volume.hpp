#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace ctphase {

using Dims = std::array<int, 3>;
using Spacing = std::array<double, 3>;

/// 3D scalar grid of CT intensities in Hounsfield units, with voxel
/// spacing in millimetres. Values are held as 32-bit floats after any
/// slope/intercept rescale. Layout is x fastest, then y, then z.
struct Volume3D {
  Dims dims{0, 0, 0};
  Spacing spacing{1.0, 1.0, 1.0};
  std::vector<float> values;

  std::size_t voxel_count() const { return values.size(); }
  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(y) +
                static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(z));
  }
  float at(int x, int y, int z) const { return values[index(x, y, z)]; }
  float& at(int x, int y, int z) { return values[index(x, y, z)]; }
};

/// Integer grid assigning each voxel an organ label; 0 is background.
/// Labels not referenced by an organ coding are preserved but ignored by
/// feature extraction.
struct LabelMap {
  Dims dims{0, 0, 0};
  Spacing spacing{1.0, 1.0, 1.0};
  std::vector<std::int32_t> labels;

  std::size_t voxel_count() const { return labels.size(); }
  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(y) +
                static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(z));
  }
  std::int32_t at(int x, int y, int z) const { return labels[index(x, y, z)]; }
  std::int32_t& at(int x, int y, int z) { return labels[index(x, y, z)]; }
};

/// A volume and a mask must live on the same grid. A mismatch signals an
/// incompatible segmentation and is an error; there is no silent
/// resampling, which would corrupt median statistics.
void check_grid(const Volume3D& volume, const LabelMap& mask);

}  // namespace ctphase
