#include <doctest.h>

#include <array>
#include <cmath>
#include <map>
#include <set>

#include "ctphase/cv.hpp"
#include "ctphase/errors.hpp"
#include "ctphase/model_io.hpp"
#include "ctphase/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ctphase;
using namespace ctphase::testing;

namespace {

FeatureTable tiny_table(int n_patients, int scans_per_patient) {
  FeatureTable table;
  int scan = 0;
  for (int p = 0; p < n_patients; ++p) {
    for (int s = 0; s < scans_per_patient; ++s) {
      FeatureRow row;
      row.scan_id = "s" + std::to_string(scan++);
      row.patient_id = "p" + std::to_string(p);
      row.phase = static_cast<PhaseLabel>((p + s) % kNumPhases);
      row.features.fill(static_cast<double>(p));
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

FeatureTable separable_table(int n_patients) {
  FeatureTable table;
  RandomStream stream(4242);
  int scan = 0;
  for (int p = 0; p < n_patients; ++p) {
    for (int phase = 0; phase < kNumPhases; ++phase) {
      FeatureRow row;
      row.scan_id = "s" + std::to_string(scan++);
      row.patient_id = "p" + std::to_string(p);
      row.phase = static_cast<PhaseLabel>(phase);
      for (int f = 0; f < kNumOrgans; ++f) {
        row.features[f] = 40.0 + 70.0 * phase * ((f % 2) ? 1.0 : 0.5) +
                          stream.gaussian() * 5.0;
      }
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

}  // namespace

TEST_CASE("five patients over five folds land one per fold") {
  const FeatureTable table = tiny_table(5, 1);
  const FoldAssignment a = stratified_group_kfold(table, 5, 42);
  std::set<int> folds;
  for (const auto& row : table.rows) folds.insert(a.fold(row.scan_id));
  CHECK(folds.size() == 5);
}

TEST_CASE("splitter rejects fewer groups than folds and bad n_splits") {
  CHECK_THROWS_AS(stratified_group_kfold(tiny_table(3, 2), 5, 42), DataError);
  CHECK_THROWS_AS(stratified_group_kfold(tiny_table(5, 1), 1, 42), DataError);
}

TEST_CASE("233-patient manifest: exclusivity, stratification, determinism") {
  const FeatureTable table = waw_tace_like_table();
  REQUIRE(table.size() == 854);

  std::array<int, kNumPhases> totals{};
  for (const auto& row : table.rows) ++totals[phase_code(row.phase)];
  CHECK(totals == std::array<int, kNumPhases>{200, 230, 231, 193});

  const FoldAssignment a = stratified_group_kfold(table, 5, 42);

  // Group exclusivity: every patient's scans in exactly one fold.
  std::map<std::string, std::set<int>> folds_of_patient;
  for (const auto& row : table.rows) {
    folds_of_patient[row.patient_id].insert(a.fold(row.scan_id));
  }
  CHECK(folds_of_patient.size() == 233);
  for (const auto& [patient, folds] : folds_of_patient) CHECK(folds.size() == 1);

  // Per-fold class counts within +-10% relative of the proportional ideal.
  std::array<std::array<int, kNumPhases>, 5> counts{};
  for (const auto& row : table.rows) {
    ++counts[a.fold(row.scan_id)][phase_code(row.phase)];
  }
  for (int f = 0; f < 5; ++f) {
    for (int c = 0; c < kNumPhases; ++c) {
      const double ideal = totals[c] / 5.0;
      CHECK(std::abs(counts[f][c] - ideal) <= 0.10 * ideal);
    }
  }

  // Fold sizes stay within one group's scan count (max 4) of ideal.
  for (int f = 0; f < 5; ++f) {
    int size = 0;
    for (int c = 0; c < kNumPhases; ++c) size += counts[f][c];
    CHECK(std::abs(size - 854.0 / 5.0) <= 4.0);
  }

  const FoldAssignment b = stratified_group_kfold(table, 5, 42);
  CHECK(a.fold_of_scan == b.fold_of_scan);

  const FoldAssignment c = stratified_group_kfold(table, 5, 43);
  CHECK(a.fold_of_scan != c.fold_of_scan);  // seed actually matters
}

TEST_CASE("folds CSV round-trips the assignment") {
  TempDir dir;
  const FeatureTable table = tiny_table(8, 2);
  const FoldAssignment a = stratified_group_kfold(table, 4, 1);
  write_folds_csv(dir.file("folds.csv"), table, a);
  const FoldAssignment back = read_folds_csv(dir.file("folds.csv"));
  CHECK(back.n_splits == 4);
  CHECK(back.fold_of_scan == a.fold_of_scan);
}

TEST_CASE("train_cv trains one member per fold on the complement rows") {
  const FeatureTable table = separable_table(10);
  const FoldAssignment assignment = stratified_group_kfold(table, 5, 42);
  Hyperparams hp;
  hp.n_rounds = 10;
  const EnsembleModel ensemble = train_cv(table, hp, assignment, 2);
  REQUIRE(ensemble.members.size() == 5);

  // Each member was evaluated on exactly its held-out fold (curve exists)
  // and its training rows exclude that fold's patients: the eval curve
  // length matches n_rounds and the member count matches n_splits.
  for (const auto& member : ensemble.members) {
    CHECK(member.trees.size() == 10u * kNumPhases);
    CHECK(member.eval_mlogloss.size() == 10);
  }
}

TEST_CASE("train_cv membership: held-out rows never influence their fold's model") {
  // Retrain fold 0's model directly from the complement rows; the member
  // model must match it exactly.
  TempDir dir;
  const FeatureTable table = separable_table(8);
  const FoldAssignment assignment = stratified_group_kfold(table, 4, 7);
  Hyperparams hp;
  hp.n_rounds = 6;
  const EnsembleModel ensemble = train_cv(table, hp, assignment, 4);

  FeatureTable train_rows, eval_rows;
  for (const auto& row : table.rows) {
    (assignment.fold(row.scan_id) == 0 ? eval_rows : train_rows).rows.push_back(row);
  }
  const BoostedModel direct = train(train_rows, hp, &eval_rows);
  save_model(direct, dir.file("direct.json"));
  save_model(ensemble.members[0], dir.file("member.json"));
  CHECK(same_bytes(dir.file("direct.json"), dir.file("member.json")));
}

TEST_CASE("train_cv is deterministic across reruns and thread counts") {
  TempDir dir;
  const FeatureTable table = separable_table(10);
  const FoldAssignment assignment = stratified_group_kfold(table, 5, 42);
  Hyperparams hp;
  hp.n_rounds = 5;

  save_ensemble(train_cv(table, hp, assignment, 1), dir.file("a"));
  save_ensemble(train_cv(table, hp, assignment, 4), dir.file("b"));
  for (int f = 0; f < 5; ++f) {
    const std::string name = "/fold_" + std::to_string(f) + ".json";
    CHECK(same_bytes(dir.file("a") + name, dir.file("b") + name));
  }
}

TEST_CASE("train_cv rejects single-class training partitions") {
  // Two patients, each carrying one class: with two folds, every training
  // partition sees a single class.
  FeatureTable table;
  int scan = 0;
  for (int p = 0; p < 2; ++p) {
    for (int s = 0; s < 3; ++s) {
      FeatureRow row;
      row.scan_id = "s" + std::to_string(scan++);
      row.patient_id = "p" + std::to_string(p);
      row.phase = p == 0 ? PhaseLabel::non_contrast : PhaseLabel::venous;
      row.features.fill(static_cast<double>(scan));
      table.rows.push_back(std::move(row));
    }
  }
  const FoldAssignment assignment = stratified_group_kfold(table, 2, 42);
  CHECK_THROWS_AS(train_cv(table, Hyperparams{}, assignment, 1), DataError);
}

TEST_CASE("ensemble_predict: identity, permutation invariance, tie rule") {
  const FeatureTable table = separable_table(6);
  Hyperparams hp;
  hp.n_rounds = 8;
  const BoostedModel model = train(table, hp);

  EnsembleModel single;
  single.members.push_back(model);
  const auto x = table.rows[3].features;
  const auto pred = ensemble_predict(single, x);
  const auto direct = predict_margins(model, x);
  for (int k = 0; k < kNumPhases; ++k) CHECK(pred.margins[k] == direct[k]);

  EnsembleModel pair;
  pair.members = {model, train(table, [] {
                    Hyperparams h;
                    h.n_rounds = 4;
                    return h;
                  }())};
  EnsembleModel swapped;
  swapped.members = {pair.members[1], pair.members[0]};
  const auto ab = ensemble_predict(pair, x);
  const auto ba = ensemble_predict(swapped, x);
  for (int k = 0; k < kNumPhases; ++k) {
    CHECK(ab.margins[k] == doctest::Approx(ba.margins[k]).epsilon(1e-15));
  }
  CHECK(ab.predicted == ba.predicted);

  CHECK_THROWS_AS(ensemble_predict(EnsembleModel{}, x), DataError);
}

TEST_CASE("margin ties resolve to the lowest class code") {
  // Two stump-only members voting for classes 0 and 1 with equal strength.
  auto stump_model = [](int klass, double weight) {
    BoostedModel m;
    m.hp.n_rounds = 1;
    m.hp.learning_rate = 1.0;
    m.organ_order.assign(kOrganNames.begin(), kOrganNames.end());
    m.class_order = {0, 1, 2, 3};
    for (int k = 0; k < kNumPhases; ++k) {
      Tree t;
      t.nodes.resize(1);
      t.nodes[0].leaf_weight = k == klass ? weight : 0.0;
      m.trees.push_back(std::move(t));
    }
    return m;
  };
  EnsembleModel ensemble;
  ensemble.members = {stump_model(0, 1.0), stump_model(1, 1.0)};
  std::array<double, kNumOrgans> x{};
  const auto pred = ensemble_predict(ensemble, x);
  CHECK(pred.margins[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(pred.margins[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(pred.predicted == PhaseLabel::non_contrast);
}

TEST_CASE("ensemble argmax ignores constant margin shifts") {
  const FeatureTable table = separable_table(5);
  Hyperparams hp;
  hp.n_rounds = 6;
  EnsembleModel ensemble;
  ensemble.members.push_back(train(table, hp));

  RandomStream stream(3);
  for (const auto& row : table.rows) {
    const auto pred = ensemble_predict(ensemble, row.features);
    const double shift = stream.uniform(-10.0, 10.0);
    auto shifted = pred.margins;
    for (auto& m : shifted) m += shift;
    CHECK(argmax_phase(shifted) == pred.predicted);
  }
}

TEST_CASE("ensemble directory round-trips through save/load") {
  TempDir dir;
  const FeatureTable table = separable_table(10);
  const FoldAssignment assignment = stratified_group_kfold(table, 5, 42);
  Hyperparams hp;
  hp.n_rounds = 4;
  const EnsembleModel ensemble = train_cv(table, hp, assignment, 4);
  save_ensemble(ensemble, dir.file("ens"));
  const EnsembleModel back = load_ensemble(dir.file("ens"));
  REQUIRE(back.members.size() == 5);

  const auto x = table.rows[0].features;
  const auto a = ensemble_predict(ensemble, x);
  const auto b = ensemble_predict(back, x);
  for (int k = 0; k < kNumPhases; ++k) CHECK(std::abs(a.margins[k] - b.margins[k]) <= 1e-12);

  CHECK_THROWS_AS(load_ensemble(dir.file("nonexistent")), DataError);
}
