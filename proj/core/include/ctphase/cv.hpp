#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ctphase/gbdt.hpp"

namespace ctphase {

/// Scan -> fold mapping. All scans of one patient share a fold (group
/// exclusivity); stratification by phase label is best-effort.
struct FoldAssignment {
  int n_splits = 5;
  std::uint64_t seed = 42;
  std::map<std::string, int> fold_of_scan;

  int fold(const std::string& scan_id) const;
};

/// Stratified, patient-grouped k-fold split. Patients are ordered by id,
/// shuffled by a seeded Fisher-Yates, then greedily assigned to the fold
/// that minimizes the total squared deviation of per-class counts from
/// the ideal proportional allocation; ties prefer the smaller fold, then
/// the lower fold index. The procedure is fully specified so the same
/// seed reproduces the same split anywhere.
FoldAssignment stratified_group_kfold(const FeatureTable& table, int n_splits,
                                      std::uint64_t seed);

/// Fold file CSV `scan_id,fold`, rows in table order.
void write_folds_csv(const std::string& path, const FeatureTable& table,
                     const FoldAssignment& assignment);
FoldAssignment read_folds_csv(const std::string& path);

struct EnsembleModel {
  std::vector<BoostedModel> members;  // fold order

  void validate() const;
};

/// One model per fold: fold f trains on every row with fold != f and uses
/// fold f as the eval table for its mlogloss curve.
EnsembleModel train_cv(const FeatureTable& table, const Hyperparams& hp,
                       const FoldAssignment& assignment, unsigned threads = 1);

struct EnsemblePrediction {
  std::array<double, kNumPhases> margins;
  std::array<double, kNumPhases> probabilities;
  PhaseLabel predicted = PhaseLabel::non_contrast;
};

/// Soft ensemble: margins are averaged across members, probabilities are
/// the softmax of the average, and the prediction is the argmax (ties to
/// the lowest class code).
EnsemblePrediction ensemble_predict(const EnsembleModel& ensemble,
                                    std::span<const double> x);

/// Directory layout: fold_0.json .. fold_{k-1}.json plus ensemble.json.
void save_ensemble(const EnsembleModel& ensemble, const std::string& dir);
EnsembleModel load_ensemble(const std::string& dir);

}  // namespace ctphase
