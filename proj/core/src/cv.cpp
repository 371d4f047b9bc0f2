#include "ctphase/cv.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ctphase/csv.hpp"
#include "ctphase/errors.hpp"
#include "ctphase/model_io.hpp"
#include "ctphase/parallel.hpp"
#include "ctphase/rng.hpp"

namespace ctphase {

int FoldAssignment::fold(const std::string& scan_id) const {
  const auto it = fold_of_scan.find(scan_id);
  if (it == fold_of_scan.end()) {
    throw DataError("scan '" + scan_id + "' has no fold assignment");
  }
  return it->second;
}

FoldAssignment stratified_group_kfold(const FeatureTable& table, int n_splits,
                                      std::uint64_t seed) {
  if (n_splits < 2) throw DataError("n_splits must be >= 2");
  table.validate();

  struct Group {
    std::string patient_id;
    std::vector<const FeatureRow*> rows;
    std::array<double, kNumPhases> class_counts{};
  };

  // Groups in patient_id order give a canonical pre-shuffle ordering.
  std::map<std::string, Group> by_patient;
  std::array<double, kNumPhases> totals{};
  for (const auto& row : table.rows) {
    Group& g = by_patient[row.patient_id];
    g.patient_id = row.patient_id;
    g.rows.push_back(&row);
    g.class_counts[phase_code(row.phase)] += 1.0;
    totals[phase_code(row.phase)] += 1.0;
  }
  if (by_patient.size() < static_cast<std::size_t>(n_splits)) {
    throw DataError("fewer patient groups (" + std::to_string(by_patient.size()) +
                    ") than folds (" + std::to_string(n_splits) + ")");
  }

  std::vector<const Group*> groups;
  groups.reserve(by_patient.size());
  for (const auto& [id, g] : by_patient) groups.push_back(&g);

  RandomStream stream(seed);
  stream.shuffle(groups);

  // Ideal proportional allocation: every fold should end with 1/n_splits
  // of each class. Each group goes to the fold that minimizes the total
  // squared deviation of per-class counts from that target; only the
  // receiving fold's term changes, so candidates are scored by the
  // deviation delta. Ties prefer the smaller fold, then the lowest fold
  // index (the size tie-break spreads single-scan groups one per fold).
  std::array<double, kNumPhases> ideal{};
  for (int c = 0; c < kNumPhases; ++c) ideal[c] = totals[c] / n_splits;

  std::vector<std::array<double, kNumPhases>> fold_counts(
      n_splits, std::array<double, kNumPhases>{});
  std::vector<double> fold_sizes(n_splits, 0.0);

  FoldAssignment assignment;
  assignment.n_splits = n_splits;
  assignment.seed = seed;

  for (const Group* g : groups) {
    int best_fold = 0;
    double best_cost = 0.0;
    for (int f = 0; f < n_splits; ++f) {
      double cost = 0.0;
      for (int c = 0; c < kNumPhases; ++c) {
        const double after = fold_counts[f][c] + g->class_counts[c] - ideal[c];
        const double before = fold_counts[f][c] - ideal[c];
        cost += after * after - before * before;
      }
      if (f == 0 || cost < best_cost ||
          (cost == best_cost && fold_sizes[f] < fold_sizes[best_fold])) {
        best_cost = cost;
        best_fold = f;
      }
    }
    for (int c = 0; c < kNumPhases; ++c) {
      fold_counts[best_fold][c] += g->class_counts[c];
      fold_sizes[best_fold] += g->class_counts[c];
    }
    for (const FeatureRow* row : g->rows) {
      assignment.fold_of_scan[row->scan_id] = best_fold;
    }
  }
  return assignment;
}

void write_folds_csv(const std::string& path, const FeatureTable& table,
                     const FoldAssignment& assignment) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    rows.push_back({row.scan_id, std::to_string(assignment.fold(row.scan_id))});
  }
  csv::write_file(path, {"scan_id", "fold"}, rows);
}

FoldAssignment read_folds_csv(const std::string& path) {
  const csv::Table table = csv::read_file(path);
  const int c_scan = table.require_column("scan_id");
  const int c_fold = table.require_column("fold");
  FoldAssignment assignment;
  assignment.seed = 0;  // unknown; the file does not carry it
  int max_fold = 0;
  for (const auto& row : table.rows) {
    const int fold = static_cast<int>(csv::parse_long(row[c_fold]));
    if (fold < 0) throw DataError("negative fold index in '" + path + "'");
    assignment.fold_of_scan[row[c_scan]] = fold;
    max_fold = std::max(max_fold, fold);
  }
  assignment.n_splits = max_fold + 1;
  return assignment;
}

void EnsembleModel::validate() const {
  if (members.empty()) throw DataError("ensemble has no member models");
  for (const auto& m : members) {
    if (m.organ_order != members.front().organ_order ||
        m.class_order != members.front().class_order) {
      throw DataError("ensemble members disagree on organ or class order");
    }
  }
}

EnsembleModel train_cv(const FeatureTable& table, const Hyperparams& hp,
                       const FoldAssignment& assignment, unsigned threads) {
  for (const auto& row : table.rows) {
    assignment.fold(row.scan_id);  // throws if any scan is uncovered
  }

  const int n_splits = assignment.n_splits;
  std::vector<FeatureTable> train_tables(n_splits);
  std::vector<FeatureTable> eval_tables(n_splits);
  for (const auto& row : table.rows) {
    const int f = assignment.fold(row.scan_id);
    for (int other = 0; other < n_splits; ++other) {
      if (other != f) train_tables[other].rows.push_back(row);
    }
    eval_tables[f].rows.push_back(row);
  }

  EnsembleModel ensemble;
  ensemble.members.resize(n_splits);
  parallel_for(static_cast<std::size_t>(n_splits),
               threads == 0 ? default_thread_count() : threads, [&](std::size_t f) {
                 ensemble.members[f] = train(train_tables[f], hp, &eval_tables[f]);
               });
  ensemble.validate();
  return ensemble;
}

EnsemblePrediction ensemble_predict(const EnsembleModel& ensemble,
                                    std::span<const double> x) {
  if (ensemble.members.empty()) throw DataError("predict on an empty ensemble");
  EnsemblePrediction out;
  out.margins.fill(0.0);
  for (const auto& member : ensemble.members) {
    const auto margins = predict_margins(member, x);
    for (int k = 0; k < kNumPhases; ++k) out.margins[k] += margins[k];
  }
  const double inv = 1.0 / static_cast<double>(ensemble.members.size());
  for (int k = 0; k < kNumPhases; ++k) out.margins[k] *= inv;
  out.probabilities = softmax(out.margins);
  out.predicted = argmax_phase(out.margins);
  return out;
}

void save_ensemble(const EnsembleModel& ensemble, const std::string& dir) {
  ensemble.validate();
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["schema_version"] = kModelSchemaVersion;
  manifest["n_splits"] = ensemble.members.size();
  auto members = nlohmann::ordered_json::array();
  for (std::size_t f = 0; f < ensemble.members.size(); ++f) {
    const std::string name = "fold_" + std::to_string(f) + ".json";
    save_model(ensemble.members[f], (std::filesystem::path(dir) / name).string());
    members.push_back(name);
  }
  manifest["members"] = std::move(members);

  const auto path = std::filesystem::path(dir) / "ensemble.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write ensemble manifest '" + path.string() + "'");
  out << manifest.dump(2) << '\n';
}

EnsembleModel load_ensemble(const std::string& dir) {
  const auto path = std::filesystem::path(dir) / "ensemble.json";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open ensemble manifest '" + path.string() + "'");
  nlohmann::ordered_json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed ensemble manifest '" + path.string() + "': " + e.what());
  }

  EnsembleModel ensemble;
  try {
    const int version = manifest.at("schema_version").get<int>();
    if (version != kModelSchemaVersion) {
      throw DataError("ensemble manifest '" + path.string() + "' has schema version " +
                      std::to_string(version));
    }
    for (const auto& name : manifest.at("members")) {
      ensemble.members.push_back(load_model(
          (std::filesystem::path(dir) / name.get<std::string>()).string()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed ensemble manifest '" + path.string() + "': " + e.what());
  }
  ensemble.validate();
  return ensemble;
}

}  // namespace ctphase
