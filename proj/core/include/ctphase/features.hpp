#pragma once

#include <array>
#include <string>
#include <vector>

#include "ctphase/organs.hpp"
#include "ctphase/phase.hpp"
#include "ctphase/volume.hpp"

namespace ctphase {

/// A 16-entry feature vector of per-organ median HU in canonical organ
/// order. Absent organs carry quiet NaN, never 0; the serialized form is
/// the literal token "NaN".
struct FeatureVector {
  std::string scan_id;
  std::array<double, kNumOrgans> values;

  FeatureVector();
  static double missing();
  static bool is_missing(double v);
};

struct FeatureRow {
  std::string scan_id;
  std::string patient_id;
  PhaseLabel phase = PhaseLabel::non_contrast;
  std::array<double, kNumOrgans> features;
};

/// Dataset container: one row per scan, scan_id unique, patient_id
/// non-empty (patients group scans for cross-validation).
struct FeatureTable {
  std::vector<FeatureRow> rows;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
  void validate() const;
};

/// Exact median HU over voxels whose label equals organ_label. Even voxel
/// counts take the arithmetic mean of the two middle order statistics.
/// Returns NaN for an empty voxel set (organ absent or not captured).
double masked_median(const Volume3D& volume, const LabelMap& mask, int organ_label);

/// All 16 masked medians in canonical order. Grids must match and the
/// coding must cover every organ.
FeatureVector extract_features(const Volume3D& volume, const LabelMap& mask,
                               const OrganCoding& coding);

struct ManifestEntry {
  std::string scan_id;
  std::string patient_id;
  PhaseLabel phase = PhaseLabel::non_contrast;
  std::string volume_path;
  std::string mask_path;
};

/// Manifest CSV `scan_id,patient_id,phase,volume_path,mask_path`.
/// Relative paths are resolved against the manifest's directory on read.
std::vector<ManifestEntry> read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);

/// Loads every scan and extracts features, one row per manifest entry in
/// manifest order regardless of thread count. I/O failures are reported
/// with the offending scan_id attached.
FeatureTable build_table(const std::vector<ManifestEntry>& manifest,
                         const OrganCoding& coding, unsigned threads = 1);

/// Feature file CSV with header
/// `scan_id,patient_id,phase,liver,...,small_bowel` (16 organ columns in
/// canonical order), missing entries written as `NaN`.
FeatureTable read_feature_csv(const std::string& path);
void write_feature_csv(const std::string& path, const FeatureTable& table);

std::vector<std::string> feature_csv_header();

}  // namespace ctphase
