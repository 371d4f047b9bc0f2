#include "ctphase/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "ctphase/errors.hpp"
#include "ctphase/nifti.hpp"
#include "ctphase/parallel.hpp"
#include "ctphase/rng.hpp"

namespace ctphase {

namespace {

constexpr double kBackgroundHu = 40.0;  // soft tissue
constexpr int kProfileSchemaVersion = 1;

struct NamedProfile {
  std::string_view organ;
  EnhancementProfile profile;
};

// Committed curve table: {baseline, peak, onset, peak_s, washout}.
// Onsets are strictly increasing along the circulation path so the table
// has a single unambiguous enhancement ordering.
constexpr std::array<NamedProfile, kNumOrgans> kDefaultProfiles = {{
    {"heart", {35.0, 220.0, 6.0, 25.0, 90.0}},
    {"pulmonary_vein", {30.0, 280.0, 8.0, 28.0, 80.0}},
    {"aorta", {30.0, 320.0, 10.0, 30.0, 100.0}},
    {"iliac_artery_left", {30.0, 300.0, 12.0, 32.0, 100.0}},
    {"iliac_artery_right", {30.0, 300.0, 13.0, 33.0, 100.0}},
    {"brain", {35.0, 45.0, 15.0, 35.0, 120.0}},
    {"pancreas", {40.0, 120.0, 20.0, 45.0, 140.0}},
    {"portal_splenic_vein", {35.0, 180.0, 25.0, 65.0, 160.0}},
    {"liver", {55.0, 120.0, 28.0, 70.0, 180.0}},
    {"inferior_vena_cava", {30.0, 150.0, 32.0, 70.0, 200.0}},
    {"iliac_vena_left", {30.0, 150.0, 35.0, 72.0, 200.0}},
    {"iliac_vena_right", {30.0, 150.0, 36.0, 73.0, 200.0}},
    {"small_bowel", {35.0, 80.0, 40.0, 78.0, 220.0}},
    {"colon", {35.0, 70.0, 45.0, 85.0, 240.0}},
    {"gallbladder", {15.0, 35.0, 55.0, 110.0, 400.0}},
    {"urinary_bladder", {10.0, 240.0, 120.0, 260.0, 600.0}},
}};

}  // namespace

ProfileTable default_profiles() {
  ProfileTable table;
  for (const auto& [organ, profile] : kDefaultProfiles) {
    table[organ_index(organ)] = profile;
  }
  return table;
}

std::array<int, kNumOrgans> onset_order(const ProfileTable& profiles) {
  std::array<int, kNumOrgans> order;
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&profiles](int a, int b) {
    if (profiles[a].onset_s != profiles[b].onset_s) {
      return profiles[a].onset_s < profiles[b].onset_s;
    }
    return a < b;
  });
  return order;
}

double enhancement_at(const EnhancementProfile& p, double t_seconds) {
  if (t_seconds <= p.onset_s) return p.baseline_hu;
  if (t_seconds <= p.peak_s) {
    return p.baseline_hu +
           (p.peak_hu - p.baseline_hu) * (t_seconds - p.onset_s) / (p.peak_s - p.onset_s);
  }
  if (t_seconds < p.washout_s) {
    return p.peak_hu +
           (p.baseline_hu - p.peak_hu) * (t_seconds - p.peak_s) /
               (p.washout_s - p.peak_s);
  }
  return p.baseline_hu;
}

ProfileTable load_profiles(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open profile file '" + path + "'");
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed profile file '" + path + "': " + e.what());
  }
  try {
    if (j.at("schema_version").get<int>() != kProfileSchemaVersion) {
      throw DataError("profile file '" + path + "' has an unsupported schema version");
    }
    ProfileTable table;
    std::array<bool, kNumOrgans> seen{};
    for (const auto& [name, jp] : j.at("profiles").items()) {
      const int idx = organ_index(name);
      if (idx < 0) throw DataError("profile file '" + path + "': unknown organ '" + name + "'");
      EnhancementProfile p;
      p.baseline_hu = jp.at("baseline_hu").get<double>();
      p.peak_hu = jp.at("peak_hu").get<double>();
      p.onset_s = jp.at("onset_s").get<double>();
      p.peak_s = jp.at("peak_s").get<double>();
      p.washout_s = jp.at("washout_s").get<double>();
      if (!(p.onset_s < p.peak_s && p.peak_s < p.washout_s)) {
        throw DataError("profile file '" + path + "': '" + name +
                        "' needs onset < peak < washout");
      }
      table[idx] = p;
      seen[idx] = true;
    }
    for (int i = 0; i < kNumOrgans; ++i) {
      if (!seen[i]) {
        throw DataError("profile file '" + path + "' is missing '" +
                        std::string(kOrganNames[i]) + "'");
      }
    }
    return table;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed profile file '" + path + "': " + e.what());
  }
}

void save_profiles(const ProfileTable& profiles, const std::string& path) {
  nlohmann::ordered_json j;
  j["schema_version"] = kProfileSchemaVersion;
  nlohmann::ordered_json out;
  for (int i = 0; i < kNumOrgans; ++i) {
    nlohmann::ordered_json p;
    p["baseline_hu"] = profiles[i].baseline_hu;
    p["peak_hu"] = profiles[i].peak_hu;
    p["onset_s"] = profiles[i].onset_s;
    p["peak_s"] = profiles[i].peak_s;
    p["washout_s"] = profiles[i].washout_s;
    out[std::string(kOrganNames[i])] = std::move(p);
  }
  j["profiles"] = std::move(out);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write profile file '" + path + "'");
  f << j.dump(2) << '\n';
}

bool organ_in_coverage(int organ_idx, Coverage coverage) {
  const std::string_view name = kOrganNames[organ_idx];
  switch (coverage) {
    case Coverage::full:
      return true;
    case Coverage::abdomen_only:
      return name != "brain" && name != "heart" && name != "pulmonary_vein";
    case Coverage::no_pelvis:
      return name != "urinary_bladder" && name != "iliac_vena_left" &&
             name != "iliac_vena_right" && name != "iliac_artery_left" &&
             name != "iliac_artery_right";
  }
  throw DataError("invalid coverage");
}

std::string_view to_string(Coverage c) {
  switch (c) {
    case Coverage::full: return "full";
    case Coverage::abdomen_only: return "abdomen_only";
    case Coverage::no_pelvis: return "no_pelvis";
  }
  throw DataError("invalid coverage");
}

PhantomSpec PhantomSpec::with_defaults() {
  PhantomSpec spec;
  spec.profiles = default_profiles();
  // 16 disjoint ellipsoids on a 4x4 grid of 12x12 voxel cells.
  for (int i = 0; i < kNumOrgans; ++i) {
    const double cx = 6.0 + 12.0 * (i % 4);
    const double cy = 6.0 + 12.0 * (i / 4);
    const double cz = spec.dims[2] / 2.0;
    spec.placements[i] = Ellipsoid{{cx, cy, cz}, {4.0, 4.0, 6.0}};
  }
  return spec;
}

void PhantomSpec::validate() const {
  for (int d = 0; d < 3; ++d) {
    if (dims[d] < 1) throw DataError("phantom dims must be positive");
    if (!(spacing[d] > 0.0)) throw DataError("phantom spacing must be positive");
  }
  if (noise_sd < 0.0) throw DataError("noise_sd must be >= 0");
  if (phase_jitter_s < 0.0) throw DataError("phase_jitter_s must be >= 0");
  for (int i = 0; i < kNumOrgans; ++i) {
    const Ellipsoid& e = placements[i];
    for (int d = 0; d < 3; ++d) {
      if (!(e.radii[d] > 0.0)) throw DataError("ellipsoid radii must be positive");
      if (e.center[d] - e.radii[d] < 0.0 || e.center[d] + e.radii[d] > dims[d]) {
        throw DataError("organ ellipsoid '" + std::string(kOrganNames[i]) +
                        "' does not fit inside the phantom grid");
      }
    }
    if (!(profiles[i].onset_s < profiles[i].peak_s &&
          profiles[i].peak_s < profiles[i].washout_s)) {
      throw DataError("profile for '" + std::string(kOrganNames[i]) +
                      "' needs onset < peak < washout");
    }
  }
}

Phantom generate_phantom(const PhantomSpec& spec, PhaseLabel phase,
                         std::uint64_t scan_index) {
  spec.validate();
  RandomStream stream = RandomStream::for_index(spec.seed, scan_index);

  const double anchor = kPhaseAnchorSeconds[phase_code(phase)];
  const double lo = std::max(0.0, anchor - spec.phase_jitter_s);
  const double hi = anchor + spec.phase_jitter_s;
  const double t = stream.uniform(lo, hi);

  Phantom out;
  out.phase = phase;
  out.sample_time_s = t;
  out.volume.dims = spec.dims;
  out.volume.spacing = spec.spacing;
  out.mask.dims = spec.dims;
  out.mask.spacing = spec.spacing;
  const std::size_t n =
      static_cast<std::size_t>(spec.dims[0]) * spec.dims[1] * spec.dims[2];
  out.volume.values.resize(n);
  out.mask.labels.assign(n, 0);

  std::array<double, kNumOrgans> organ_hu;
  std::array<bool, kNumOrgans> present;
  for (int i = 0; i < kNumOrgans; ++i) {
    organ_hu[i] = enhancement_at(spec.profiles[i], t);
    present[i] = organ_in_coverage(i, spec.coverage);
  }

  // Linear voxel order fixes the noise draw sequence; the first matching
  // ellipsoid in canonical order claims a voxel (defaults are disjoint).
  std::size_t v = 0;
  for (int z = 0; z < spec.dims[2]; ++z) {
    for (int y = 0; y < spec.dims[1]; ++y) {
      for (int x = 0; x < spec.dims[0]; ++x, ++v) {
        int organ = -1;
        for (int i = 0; i < kNumOrgans; ++i) {
          if (!present[i]) continue;
          const Ellipsoid& e = spec.placements[i];
          const double dx = (x - e.center[0]) / e.radii[0];
          const double dy = (y - e.center[1]) / e.radii[1];
          const double dz = (z - e.center[2]) / e.radii[2];
          if (dx * dx + dy * dy + dz * dz <= 1.0) {
            organ = i;
            break;
          }
        }
        const double mean = organ >= 0 ? organ_hu[organ] : kBackgroundHu;
        out.volume.values[v] =
            static_cast<float>(mean + spec.noise_sd * stream.gaussian());
        if (organ >= 0) out.mask.labels[v] = organ + 1;  // canonical coding
      }
    }
  }
  return out;
}

std::vector<ManifestEntry> generate_corpus(const CorpusConfig& config) {
  if (config.n_per_phase < 1) throw DataError("n_per_phase must be >= 1");
  if (config.abdomen_only_fraction < 0.0 || config.no_pelvis_fraction < 0.0 ||
      config.abdomen_only_fraction + config.no_pelvis_fraction > 1.0) {
    throw DataError("coverage fractions must be non-negative and sum to <= 1");
  }
  config.base.validate();

  namespace fs = std::filesystem;
  const fs::path out(config.out_dir);
  std::error_code ec;
  fs::create_directories(out / "volumes", ec);
  fs::create_directories(out / "masks", ec);
  if (!fs::is_directory(out / "volumes") || !fs::is_directory(out / "masks")) {
    throw DataError("cannot create output directory '" + config.out_dir + "'");
  }

  const int n_patients = config.n_per_phase;
  const int n_abdomen = static_cast<int>(std::llround(
      config.abdomen_only_fraction * n_patients));
  const int n_no_pelvis = static_cast<int>(std::llround(
      config.no_pelvis_fraction * n_patients));

  auto pad = [](int value, int width) {
    std::string s = std::to_string(value);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
  };

  std::vector<ManifestEntry> entries;
  entries.reserve(static_cast<std::size_t>(n_patients) * kNumPhases);
  for (int p = 0; p < n_patients; ++p) {
    for (int phase = 0; phase < kNumPhases; ++phase) {
      const int index = p * kNumPhases + phase;
      ManifestEntry e;
      e.scan_id = "scan_" + pad(index, 5);
      e.patient_id = "patient_" + pad(p, 4);
      e.phase = static_cast<PhaseLabel>(phase);
      e.volume_path = "volumes/" + e.scan_id + ".nii.gz";
      e.mask_path = "masks/" + e.scan_id + ".nii.gz";
      entries.push_back(std::move(e));
    }
  }

  parallel_for(entries.size(), config.threads == 0 ? default_thread_count() : config.threads,
               [&](std::size_t i) {
                 const int p = static_cast<int>(i) / kNumPhases;
                 PhantomSpec spec = config.base;
                 spec.seed = config.seed;
                 spec.coverage = p < n_abdomen ? Coverage::abdomen_only
                                : p < n_abdomen + n_no_pelvis ? Coverage::no_pelvis
                                                              : Coverage::full;
                 const Phantom phantom =
                     generate_phantom(spec, entries[i].phase, static_cast<std::uint64_t>(i));
                 save_volume(phantom.volume, (out / entries[i].volume_path).string());
                 save_labelmap(phantom.mask, (out / entries[i].mask_path).string());
               });

  write_manifest((out / "manifest.csv").string(), entries);
  OrganCoding::canonical().to_file((out / "organ_coding.txt").string());

  // Manifest entries keep relative paths on disk; resolve for the caller.
  std::vector<ManifestEntry> resolved = entries;
  for (auto& e : resolved) {
    e.volume_path = (out / e.volume_path).string();
    e.mask_path = (out / e.mask_path).string();
  }
  return resolved;
}

}  // namespace ctphase
