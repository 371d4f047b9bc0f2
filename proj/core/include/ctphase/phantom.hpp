#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ctphase/features.hpp"
#include "ctphase/phase.hpp"
#include "ctphase/volume.hpp"

namespace ctphase {

/// Piecewise-linear contrast enhancement curve for one organ: flat at
/// baseline_hu until onset_s, linear rise to peak_hu at peak_s, linear
/// decay back to baseline_hu at washout_s, flat thereafter.
struct EnhancementProfile {
  double baseline_hu = 0.0;
  double peak_hu = 0.0;
  double onset_s = 0.0;
  double peak_s = 0.0;
  double washout_s = 0.0;

  bool operator==(const EnhancementProfile&) const = default;
};

using ProfileTable = std::array<EnhancementProfile, kNumOrgans>;

/// Committed default curves, indexed in canonical organ order. The onsets
/// encode the circulation ordering (heart and pulmonary vein first, then
/// arteries, parenchyma, veins, bowel, bladder last); vessel peaks align
/// with the arterial anchor (~30 s), venous structures and liver with the
/// venous anchor (~70 s), and the bladder rises only after 120 s. Absolute
/// HU levels are synthetic test scaffolding, not clinical measurements.
ProfileTable default_profiles();

/// Organ names sorted by onset of enhancement in default_profiles().
std::array<int, kNumOrgans> onset_order(const ProfileTable& profiles);

double enhancement_at(const EnhancementProfile& profile, double t_seconds);

/// Versioned JSON form of the profile table (the copy shipped under
/// core/data/ must match default_profiles(); a unit test enforces it).
ProfileTable load_profiles(const std::string& path);
void save_profiles(const ProfileTable& profiles, const std::string& path);

/// Anatomical coverage variants. abdomen_only omits brain, heart and
/// pulmonary_vein; no_pelvis omits urinary_bladder and the four iliac
/// vessels.
enum class Coverage { full, abdomen_only, no_pelvis };

bool organ_in_coverage(int organ_idx, Coverage coverage);
std::string_view to_string(Coverage c);

struct Ellipsoid {
  std::array<double, 3> center;  // voxel index space
  std::array<double, 3> radii;
};

struct PhantomSpec {
  Dims dims{48, 48, 20};
  Spacing spacing{1.5, 1.5, 3.0};
  std::array<Ellipsoid, kNumOrgans> placements;
  double noise_sd = 12.0;       // HU
  double phase_jitter_s = 5.0;  // phase window half-width around the anchor
  Coverage coverage = Coverage::full;
  std::uint64_t seed = 42;
  ProfileTable profiles;

  static PhantomSpec with_defaults();
  void validate() const;
};

struct Phantom {
  Volume3D volume;
  LabelMap mask;
  PhaseLabel phase = PhaseLabel::non_contrast;
  double sample_time_s = 0.0;
};

/// Deterministic per (spec.seed, scan_index): the scan time is drawn
/// uniformly from the phase window [max(0, anchor - jitter), anchor +
/// jitter], then each present organ gets enhancement_at(profile, t) plus
/// seeded Gaussian noise; background is soft tissue at 40 HU plus noise.
Phantom generate_phantom(const PhantomSpec& spec, PhaseLabel phase,
                         std::uint64_t scan_index = 0);

struct CorpusConfig {
  std::string out_dir;
  int n_per_phase = 1;
  double abdomen_only_fraction = 0.0;
  double no_pelvis_fraction = 0.0;
  std::uint64_t seed = 42;
  PhantomSpec base = PhantomSpec::with_defaults();
  unsigned threads = 1;
};

/// Writes volumes/, masks/, manifest.csv and organ_coding.txt under
/// out_dir. Each synthetic patient contributes one scan per phase; the
/// coverage mix applies per patient so some feature vectors exercise the
/// missing-organ path.
std::vector<ManifestEntry> generate_corpus(const CorpusConfig& config);

}  // namespace ctphase
