#pragma once

#include <array>
#include <string>
#include <string_view>

namespace ctphase {

inline constexpr int kNumOrgans = 16;

/// Canonical organ order. Feature index i always refers to kOrganNames[i],
/// identically at training and inference time. Head and neck vessels
/// (internal carotid arteries, internal jugular veins) are deliberately
/// not part of this set.
inline constexpr std::array<std::string_view, kNumOrgans> kOrganNames = {
    "liver",
    "pancreas",
    "urinary_bladder",
    "gallbladder",
    "heart",
    "aorta",
    "inferior_vena_cava",
    "portal_splenic_vein",
    "iliac_vena_left",
    "iliac_vena_right",
    "iliac_artery_left",
    "iliac_artery_right",
    "pulmonary_vein",
    "brain",
    "colon",
    "small_bowel",
};

/// Index of an organ name in the canonical order, -1 if unknown.
int organ_index(std::string_view name);

/// Maps each canonical organ to the integer value carried by a label map.
/// Supplied as a small text file (`organ_name label`, '#' comments) so any
/// segmentation tool's label integers can be adapted without code changes.
class OrganCoding {
 public:
  OrganCoding();

  /// Organ i -> label i + 1; the coding used by phantom corpora.
  static OrganCoding canonical();

  static OrganCoding from_file(const std::string& path);
  void to_file(const std::string& path) const;

  int label_for(int organ_idx) const;
  void set(int organ_idx, int label);
  bool has(int organ_idx) const;

  /// Throws DataError naming the first organ without a label.
  void require_complete() const;

 private:
  std::array<int, kNumOrgans> labels_;
};

}  // namespace ctphase
