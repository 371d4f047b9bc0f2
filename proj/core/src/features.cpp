#include "ctphase/features.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <set>
#include <utility>

#include "ctphase/csv.hpp"
#include "ctphase/errors.hpp"
#include "ctphase/nifti.hpp"
#include "ctphase/parallel.hpp"

namespace ctphase {

FeatureVector::FeatureVector() { values.fill(missing()); }

double FeatureVector::missing() { return std::numeric_limits<double>::quiet_NaN(); }

bool FeatureVector::is_missing(double v) { return std::isnan(v); }

void FeatureTable::validate() const {
  std::set<std::string> seen;
  for (const auto& row : rows) {
    if (row.scan_id.empty()) throw DataError("feature table row with empty scan_id");
    if (row.patient_id.empty()) {
      throw DataError("scan '" + row.scan_id + "' has an empty patient_id");
    }
    if (!seen.insert(row.scan_id).second) {
      throw DataError("duplicate scan_id '" + row.scan_id + "'");
    }
  }
}

double masked_median(const Volume3D& volume, const LabelMap& mask, int organ_label) {
  check_grid(volume, mask);
  std::vector<float> roi;
  for (std::size_t i = 0; i < mask.labels.size(); ++i) {
    if (mask.labels[i] == organ_label) roi.push_back(volume.values[i]);
  }
  if (roi.empty()) return FeatureVector::missing();

  const std::size_t n = roi.size();
  const std::size_t mid = n / 2;
  std::nth_element(roi.begin(), roi.begin() + mid, roi.end());
  const double hi = roi[mid];
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(roi.begin(), roi.begin() + mid);
  return (lo + hi) / 2.0;
}

FeatureVector extract_features(const Volume3D& volume, const LabelMap& mask,
                               const OrganCoding& coding) {
  check_grid(volume, mask);
  coding.require_complete();
  FeatureVector fv;
  for (int organ = 0; organ < kNumOrgans; ++organ) {
    fv.values[organ] = masked_median(volume, mask, coding.label_for(organ));
  }
  return fv;
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  const csv::Table table = csv::read_file(path);
  const int c_scan = table.require_column("scan_id");
  const int c_patient = table.require_column("patient_id");
  const int c_phase = table.require_column("phase");
  const int c_volume = table.require_column("volume_path");
  const int c_mask = table.require_column("mask_path");

  const auto base = std::filesystem::path(path).parent_path();
  auto resolve = [&base](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };

  std::vector<ManifestEntry> entries;
  entries.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    ManifestEntry e;
    e.scan_id = row[c_scan];
    e.patient_id = row[c_patient];
    e.phase = parse_phase(row[c_phase]);
    e.volume_path = resolve(row[c_volume]);
    e.mask_path = resolve(row[c_mask]);
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(entries.size());
  for (const auto& e : entries) {
    rows.push_back({e.scan_id, e.patient_id, std::string(to_string(e.phase)),
                    e.volume_path, e.mask_path});
  }
  csv::write_file(path, {"scan_id", "patient_id", "phase", "volume_path", "mask_path"},
                  rows);
}

FeatureTable build_table(const std::vector<ManifestEntry>& manifest,
                         const OrganCoding& coding, unsigned threads) {
  coding.require_complete();
  FeatureTable table;
  table.rows.resize(manifest.size());
  std::vector<std::string> errors(manifest.size());

  parallel_for(manifest.size(), threads == 0 ? default_thread_count() : threads,
               [&](std::size_t i) {
                 const ManifestEntry& e = manifest[i];
                 try {
                   const Volume3D volume = load_volume(e.volume_path);
                   const LabelMap mask = load_labelmap(e.mask_path);
                   FeatureRow row;
                   row.scan_id = e.scan_id;
                   row.patient_id = e.patient_id;
                   row.phase = e.phase;
                   row.features = extract_features(volume, mask, coding).values;
                   table.rows[i] = std::move(row);
                 } catch (const DataError& err) {
                   errors[i] = err.what();
                 }
               });

  for (std::size_t i = 0; i < manifest.size(); ++i) {
    if (!errors[i].empty()) {
      throw DataError("scan '" + manifest[i].scan_id + "': " + errors[i]);
    }
  }
  table.validate();
  return table;
}

std::vector<std::string> feature_csv_header() {
  std::vector<std::string> header = {"scan_id", "patient_id", "phase"};
  for (const auto name : kOrganNames) header.emplace_back(name);
  return header;
}

FeatureTable read_feature_csv(const std::string& path) {
  const csv::Table raw = csv::read_file(path);
  const auto expected = feature_csv_header();
  if (raw.header != expected) {
    throw DataError("feature file '" + path +
                    "' header does not match the canonical "
                    "scan_id,patient_id,phase,<16 organ> layout");
  }
  FeatureTable table;
  table.rows.reserve(raw.rows.size());
  for (const auto& fields : raw.rows) {
    FeatureRow row;
    row.scan_id = fields[0];
    row.patient_id = fields[1];
    row.phase = parse_phase(fields[2]);
    for (int organ = 0; organ < kNumOrgans; ++organ) {
      row.features[organ] = csv::parse_double(fields[3 + organ]);
    }
    table.rows.push_back(std::move(row));
  }
  table.validate();
  return table;
}

void write_feature_csv(const std::string& path, const FeatureTable& table) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    std::vector<std::string> fields = {row.scan_id, row.patient_id,
                                       std::string(to_string(row.phase))};
    for (const double v : row.features) fields.push_back(csv::format_double(v));
    rows.push_back(std::move(fields));
  }
  csv::write_file(path, feature_csv_header(), rows);
}

}  // namespace ctphase
