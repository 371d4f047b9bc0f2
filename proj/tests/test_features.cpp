#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ctphase/errors.hpp"
#include "ctphase/features.hpp"
#include "ctphase/nifti.hpp"
#include "ctphase/phantom.hpp"
#include "ctphase/rng.hpp"
#include "test_util.hpp"

using namespace ctphase;
using ctphase::testing::TempDir;

namespace {

/// Grid whose first voxels carry the given ROI values under label 1.
std::pair<Volume3D, LabelMap> roi_grid(const std::vector<float>& roi_values,
                                       Dims dims = {4, 4, 4}) {
  Volume3D v;
  v.dims = dims;
  v.values.assign(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], 40.0f);
  LabelMap m;
  m.dims = dims;
  m.labels.assign(v.values.size(), 0);
  for (std::size_t i = 0; i < roi_values.size(); ++i) {
    v.values[i] = roi_values[i];
    m.labels[i] = 1;
  }
  return {v, m};
}

}  // namespace

TEST_CASE("masked_median: odd count, even count, empty ROI") {
  auto [v1, m1] = roi_grid({10.0f, 20.0f, 30.0f});
  CHECK(masked_median(v1, m1, 1) == 20.0);

  auto [v2, m2] = roi_grid({10.0f, 20.0f, 30.0f, 40.0f});
  CHECK(masked_median(v2, m2, 1) == 25.0);

  auto [v3, m3] = roi_grid({});
  CHECK(FeatureVector::is_missing(masked_median(v3, m3, 1)));
}

TEST_CASE("masked_median ignores voxel traversal order and background") {
  RandomStream stream(11);
  std::vector<float> roi(25);
  for (auto& x : roi) x = static_cast<float>(stream.uniform(-100.0, 300.0));

  auto [v, m] = roi_grid(roi);
  const double reference = masked_median(v, m, 1);

  // Scatter the same ROI values across shuffled voxel positions.
  std::vector<std::size_t> slots(v.values.size());
  for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = i;
  for (int trial = 0; trial < 5; ++trial) {
    stream.shuffle(slots);
    Volume3D v2;
    v2.dims = v.dims;
    v2.values.assign(v.values.size(), -77.0f);  // background value differs
    LabelMap m2;
    m2.dims = m.dims;
    m2.labels.assign(v.values.size(), 0);
    for (std::size_t i = 0; i < roi.size(); ++i) {
      v2.values[slots[i]] = roi[i];
      m2.labels[slots[i]] = 1;
    }
    CHECK(masked_median(v2, m2, 1) == reference);
  }
}

TEST_CASE("extract_features covers all organs, the missing path, and all-background") {
  PhantomSpec spec = PhantomSpec::with_defaults();
  spec.seed = 5;
  const OrganCoding coding = OrganCoding::canonical();

  const Phantom full = generate_phantom(spec, PhaseLabel::venous, 0);
  const FeatureVector fv = extract_features(full.volume, full.mask, coding);
  for (int i = 0; i < kNumOrgans; ++i) {
    CHECK_FALSE(FeatureVector::is_missing(fv.values[i]));
    // Feature i must equal the single-organ median for organ i.
    CHECK(fv.values[i] == masked_median(full.volume, full.mask, coding.label_for(i)));
  }

  spec.coverage = Coverage::abdomen_only;
  const Phantom abd = generate_phantom(spec, PhaseLabel::venous, 0);
  const FeatureVector fa = extract_features(abd.volume, abd.mask, coding);
  int missing = 0;
  for (int i = 0; i < kNumOrgans; ++i) {
    const bool expect_missing = kOrganNames[i] == "brain" || kOrganNames[i] == "heart" ||
                                kOrganNames[i] == "pulmonary_vein";
    CHECK(FeatureVector::is_missing(fa.values[i]) == expect_missing);
    missing += expect_missing;
  }
  CHECK(missing == 3);

  LabelMap empty;
  empty.dims = full.mask.dims;
  empty.labels.assign(full.mask.labels.size(), 0);
  const FeatureVector fe = extract_features(full.volume, empty, coding);
  for (const double x : fe.values) CHECK(FeatureVector::is_missing(x));
}

TEST_CASE("extract_features rejects incomplete codings and grid mismatches") {
  PhantomSpec spec = PhantomSpec::with_defaults();
  const Phantom p = generate_phantom(spec, PhaseLabel::arterial, 0);

  OrganCoding incomplete;
  incomplete.set(0, 1);
  CHECK_THROWS_AS(extract_features(p.volume, p.mask, incomplete), DataError);

  LabelMap other;
  other.dims = {2, 2, 2};
  other.labels.assign(8, 0);
  CHECK_THROWS_AS(extract_features(p.volume, other, OrganCoding::canonical()), DataError);
}

TEST_CASE("build_table preserves manifest order and attaches scan ids to errors") {
  TempDir dir;
  PhantomSpec spec = PhantomSpec::with_defaults();
  spec.seed = 21;

  std::vector<ManifestEntry> manifest;
  for (int i = 0; i < 3; ++i) {
    const Phantom p =
        generate_phantom(spec, static_cast<PhaseLabel>(i), static_cast<std::uint64_t>(i));
    ManifestEntry e;
    e.scan_id = "scan_" + std::to_string(i);
    e.patient_id = "pat_" + std::to_string(i);
    e.phase = p.phase;
    e.volume_path = dir.file("v" + std::to_string(i) + ".nii.gz");
    e.mask_path = dir.file("m" + std::to_string(i) + ".nii.gz");
    save_volume(p.volume, e.volume_path);
    save_labelmap(p.mask, e.mask_path);
    manifest.push_back(std::move(e));
  }

  const FeatureTable table = build_table(manifest, OrganCoding::canonical(), 2);
  REQUIRE(table.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(table.rows[i].scan_id == manifest[i].scan_id);
    const Volume3D v = load_volume(manifest[i].volume_path);
    const LabelMap m = load_labelmap(manifest[i].mask_path);
    CHECK(table.rows[i].features ==
          extract_features(v, m, OrganCoding::canonical()).values);
  }

  CHECK(build_table({}, OrganCoding::canonical()).empty());

  manifest[1].volume_path = dir.file("nope.nii");
  try {
    build_table(manifest, OrganCoding::canonical(), 2);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("scan_1") != std::string::npos);
  }
}

TEST_CASE("feature CSV round-trips values, phases, and NaN tokens") {
  TempDir dir;
  FeatureTable table;
  RandomStream stream(3);
  for (int i = 0; i < 8; ++i) {
    FeatureRow row;
    row.scan_id = "s" + std::to_string(i);
    row.patient_id = "p" + std::to_string(i / 2);
    row.phase = static_cast<PhaseLabel>(i % 4);
    for (auto& x : row.features) {
      x = stream.next_unit() < 0.2 ? FeatureVector::missing()
                                   : stream.uniform(-1000.0, 1000.0);
    }
    table.rows.push_back(std::move(row));
  }

  const std::string path = dir.file("features.csv");
  write_feature_csv(path, table);
  const FeatureTable back = read_feature_csv(path);
  REQUIRE(back.size() == table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    CHECK(back.rows[i].scan_id == table.rows[i].scan_id);
    CHECK(back.rows[i].patient_id == table.rows[i].patient_id);
    CHECK(back.rows[i].phase == table.rows[i].phase);
    for (int f = 0; f < kNumOrgans; ++f) {
      if (FeatureVector::is_missing(table.rows[i].features[f])) {
        CHECK(FeatureVector::is_missing(back.rows[i].features[f]));
      } else {
        CHECK(back.rows[i].features[f] == table.rows[i].features[f]);
      }
    }
  }
}

TEST_CASE("organ coding files adapt external label integers") {
  TempDir dir;
  {
    std::ofstream out(dir.file("coding.txt"));
    out << "# remapped labels\n";
    out << "liver 5\n";
    for (int i = 1; i < kNumOrgans; ++i) {
      out << kOrganNames[i] << ' ' << (100 + i) << '\n';
    }
  }
  const OrganCoding coding = OrganCoding::from_file(dir.file("coding.txt"));
  CHECK(coding.label_for(organ_index("liver")) == 5);
  CHECK_NOTHROW(coding.require_complete());

  // Labels outside the coding (here: 1) are preserved but ignored; liver
  // voxels are located where label = 5.
  Volume3D v;
  v.dims = {3, 1, 1};
  v.values = {100.0f, 200.0f, 300.0f};
  LabelMap m;
  m.dims = {3, 1, 1};
  m.labels = {0, 1, 5};
  CHECK(masked_median(v, m, coding.label_for(organ_index("liver"))) == 300.0);

  const FeatureVector fv = extract_features(v, m, coding);
  CHECK(fv.values[organ_index("liver")] == 300.0);
  for (int i = 1; i < kNumOrgans; ++i) CHECK(FeatureVector::is_missing(fv.values[i]));

  // Round-trip through to_file.
  coding.to_file(dir.file("coding2.txt"));
  const OrganCoding back = OrganCoding::from_file(dir.file("coding2.txt"));
  for (int i = 0; i < kNumOrgans; ++i) CHECK(back.label_for(i) == coding.label_for(i));

  // Unknown organ names and malformed lines are rejected.
  std::ofstream(dir.file("bad.txt")) << "spleen 17\n";
  CHECK_THROWS_AS(OrganCoding::from_file(dir.file("bad.txt")), DataError);
  std::ofstream(dir.file("bad2.txt")) << "liver notanumber\n";
  CHECK_THROWS_AS(OrganCoding::from_file(dir.file("bad2.txt")), DataError);
}

TEST_CASE("feature CSV rejects wrong headers and duplicate scans") {
  TempDir dir;
  {
    std::ofstream out(dir.file("bad.csv"));
    out << "scan_id,patient_id,phase,liver\n";
  }
  CHECK_THROWS_AS(read_feature_csv(dir.file("bad.csv")), DataError);

  FeatureTable dup;
  for (int i = 0; i < 2; ++i) {
    FeatureRow row;
    row.scan_id = "same";
    row.patient_id = "p";
    row.features.fill(0.0);
    dup.rows.push_back(row);
  }
  CHECK_THROWS_AS(dup.validate(), DataError);
}
