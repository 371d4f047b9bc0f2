#include "ctphase/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "ctphase/csv.hpp"
#include "ctphase/errors.hpp"
#include "ctphase/model_io.hpp"
#include "ctphase/parallel.hpp"

namespace ctphase {

namespace {

namespace fs = std::filesystem;

std::vector<std::string> prediction_csv_header(bool with_pi_time) {
  std::vector<std::string> header = {"scan_id", "predicted_phase"};
  for (const auto name : kPhaseNames) header.push_back("margin_" + std::string(name));
  for (const auto name : kPhaseNames) header.push_back("prob_" + std::string(name));
  if (with_pi_time) header.push_back("pi_time_s");
  return header;
}

void write_predictions_csv(const std::string& path,
                           const std::vector<PredictionRow>& rows, bool with_pi_time) {
  std::vector<std::vector<std::string>> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    std::vector<std::string> fields = {row.scan_id, std::string(to_string(row.predicted))};
    for (const double m : row.margins) fields.push_back(csv::format_double(m));
    for (const double p : row.probabilities) fields.push_back(csv::format_double(p));
    if (with_pi_time) {
      fields.push_back(csv::format_double(pseudo_pi_time(row.probabilities)));
    }
    out.push_back(std::move(fields));
  }
  csv::write_file(path, prediction_csv_header(with_pi_time), out);
}

void write_training_log(const std::string& path, const BoostedModel& model) {
  const bool with_eval = !model.eval_mlogloss.empty();
  std::vector<std::string> header = {"round", "train_mlogloss"};
  if (with_eval) header.push_back("eval_mlogloss");
  std::vector<std::vector<std::string>> rows;
  for (std::size_t r = 0; r < model.train_mlogloss.size(); ++r) {
    std::vector<std::string> fields = {std::to_string(r + 1),
                                       csv::format_double(model.train_mlogloss[r])};
    if (with_eval) fields.push_back(csv::format_double(model.eval_mlogloss[r]));
    rows.push_back(std::move(fields));
  }
  csv::write_file(path, header, rows);
}

/// scan_id -> phase from any CSV carrying those two columns (a feature
/// file works as-is).
std::map<std::string, PhaseLabel> read_truth_csv(const std::string& path) {
  const csv::Table table = csv::read_file(path);
  const int c_scan = table.require_column("scan_id");
  const int c_phase = table.require_column("phase");
  std::map<std::string, PhaseLabel> truth;
  for (const auto& row : table.rows) {
    if (!truth.emplace(row[c_scan], parse_phase(row[c_phase])).second) {
      throw DataError("duplicate scan_id '" + row[c_scan] + "' in truth file");
    }
  }
  if (truth.empty()) throw DataError("truth file '" + path + "' has no rows");
  return truth;
}

std::string default_model_name(const std::string& path) {
  return fs::path(path).stem().string();
}

}  // namespace

void run_simulate(const SimulateOptions& opt) {
  CorpusConfig config;
  config.out_dir = opt.out_dir;
  config.n_per_phase = opt.n_per_phase;
  config.abdomen_only_fraction = opt.abdomen_only_fraction;
  config.no_pelvis_fraction = opt.no_pelvis_fraction;
  config.seed = opt.seed;
  config.threads = opt.threads;
  config.base = PhantomSpec::with_defaults();
  config.base.noise_sd = opt.noise_sd;
  config.base.phase_jitter_s = opt.phase_jitter_s;
  if (!opt.profile_path.empty()) {
    config.base.profiles = load_profiles(opt.profile_path);
  }
  generate_corpus(config);
}

void run_extract(const ExtractOptions& opt) {
  const auto manifest = read_manifest(opt.manifest_path);
  const OrganCoding coding = opt.coding_path.empty()
                                 ? OrganCoding::canonical()
                                 : OrganCoding::from_file(opt.coding_path);
  const FeatureTable table = build_table(manifest, coding, opt.threads);
  write_feature_csv(opt.out_csv, table);
}

void run_train(const TrainOptions& opt) {
  const FeatureTable table = read_feature_csv(opt.features_csv);
  fs::create_directories(opt.out_dir);

  if (opt.cv_folds == 0) {
    FeatureTable eval_table;
    const bool with_eval = !opt.eval_features_csv.empty();
    if (with_eval) eval_table = read_feature_csv(opt.eval_features_csv);
    const BoostedModel model = train(table, opt.hp, with_eval ? &eval_table : nullptr);
    save_model(model, (fs::path(opt.out_dir) / "model.json").string());
    write_training_log((fs::path(opt.out_dir) / "train_log.csv").string(), model);
    return;
  }

  if (!opt.eval_features_csv.empty()) {
    throw DataError("--eval-features applies to single-model training only; "
                    "cross-validation holds out each fold instead");
  }
  const FoldAssignment assignment =
      stratified_group_kfold(table, opt.cv_folds, opt.seed);
  write_folds_csv((fs::path(opt.out_dir) / "folds.csv").string(), table, assignment);
  const EnsembleModel ensemble = train_cv(table, opt.hp, assignment, opt.threads);
  save_ensemble(ensemble, opt.out_dir);
  for (std::size_t f = 0; f < ensemble.members.size(); ++f) {
    write_training_log(
        (fs::path(opt.out_dir) / ("train_log_fold_" + std::to_string(f) + ".csv")).string(),
        ensemble.members[f]);
  }
}

void run_predict(const PredictOptions& opt) {
  const FeatureTable table = read_feature_csv(opt.features_csv);

  EnsembleModel ensemble;
  if (fs::is_directory(opt.model_path)) {
    if (fs::exists(fs::path(opt.model_path) / "ensemble.json")) {
      ensemble = load_ensemble(opt.model_path);
    } else if (fs::exists(fs::path(opt.model_path) / "model.json")) {
      ensemble.members.push_back(
          load_model((fs::path(opt.model_path) / "model.json").string()));
    } else {
      throw DataError("'" + opt.model_path +
                      "' contains neither ensemble.json nor model.json");
    }
  } else {
    ensemble.members.push_back(load_model(opt.model_path));
  }
  ensemble.validate();

  std::vector<PredictionRow> rows(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto pred = ensemble_predict(ensemble, table.rows[i].features);
    rows[i] = {table.rows[i].scan_id, pred.predicted, pred.margins, pred.probabilities};
  }
  write_predictions_csv(opt.out_csv, rows, opt.append_pi_time);
}

std::vector<PredictionRow> read_predictions_csv(const std::string& path) {
  const csv::Table table = csv::read_file(path);
  const int c_scan = table.require_column("scan_id");
  const int c_pred = table.require_column("predicted_phase");
  std::array<int, kNumPhases> c_margin;
  std::array<int, kNumPhases> c_prob;
  for (int k = 0; k < kNumPhases; ++k) {
    c_margin[k] = table.require_column("margin_" + std::string(kPhaseNames[k]));
    c_prob[k] = table.require_column("prob_" + std::string(kPhaseNames[k]));
  }
  std::vector<PredictionRow> rows;
  rows.reserve(table.rows.size());
  std::set<std::string> seen;
  for (const auto& fields : table.rows) {
    PredictionRow row;
    row.scan_id = fields[c_scan];
    if (!seen.insert(row.scan_id).second) {
      throw DataError("duplicate scan_id '" + row.scan_id + "' in '" + path + "'");
    }
    row.predicted = parse_phase(fields[c_pred]);
    for (int k = 0; k < kNumPhases; ++k) {
      row.margins[k] = csv::parse_double(fields[c_margin[k]]);
      row.probabilities[k] = csv::parse_double(fields[c_prob[k]]);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("prediction file '" + path + "' has no rows");
  return rows;
}

EvaluationReport run_evaluate(const EvaluateOptions& opt) {
  const auto predictions = read_predictions_csv(opt.pred_csv);
  const auto truth_map = read_truth_csv(opt.truth_csv);

  std::vector<int> truth;
  std::vector<int> pred;
  std::vector<std::vector<double>> probs;
  std::vector<std::string> class_names;

  for (const auto& row : predictions) {
    const auto it = truth_map.find(row.scan_id);
    if (it == truth_map.end()) continue;
    if (opt.merge_arterial_venous) {
      const HarmonizedRow merged = harmonize_c4kc(row.probabilities);
      truth.push_back(harmonize_truth(it->second));
      pred.push_back(merged.predicted);
      probs.emplace_back(merged.probabilities.begin(), merged.probabilities.end());
    } else {
      truth.push_back(phase_code(it->second));
      pred.push_back(phase_code(argmax_phase(row.probabilities)));
      probs.emplace_back(row.probabilities.begin(), row.probabilities.end());
    }
  }
  if (truth.empty()) {
    throw DataError("no scan_ids shared between '" + opt.pred_csv + "' and '" +
                    opt.truth_csv + "'");
  }

  if (opt.merge_arterial_venous) {
    class_names.assign(kMergedClassNames.begin(), kMergedClassNames.end());
  } else {
    class_names.assign(kPhaseNames.begin(), kPhaseNames.end());
  }

  const EvaluationReport report =
      evaluate_predictions(opt.dataset, truth, pred, probs, class_names);

  const std::string json = report_to_json(report);
  if (opt.out_json.empty()) {
    std::cout << json;
  } else {
    std::ofstream out(opt.out_json, std::ios::binary);
    if (!out) throw DataError("cannot write report '" + opt.out_json + "'");
    out << json;
  }
  if (!opt.roc_points_csv.empty()) {
    write_roc_points_csv(opt.roc_points_csv, truth, probs, class_names);
  }
  return report;
}

void run_compare(const CompareOptions& opt) {
  if (opt.pred_csvs.size() < 2) {
    throw DataError("compare needs at least two prediction files");
  }
  if (!opt.names.empty() && opt.names.size() != opt.pred_csvs.size()) {
    throw DataError("--names must list one name per prediction file");
  }

  std::vector<std::string> names = opt.names;
  if (names.empty()) {
    for (const auto& path : opt.pred_csvs) names.push_back(default_model_name(path));
  }

  const auto truth_map = read_truth_csv(opt.truth_csv);
  std::vector<std::map<std::string, PredictionRow>> by_scan(opt.pred_csvs.size());
  for (std::size_t m = 0; m < opt.pred_csvs.size(); ++m) {
    for (auto& row : read_predictions_csv(opt.pred_csvs[m])) {
      by_scan[m].emplace(row.scan_id, std::move(row));
    }
  }

  // Shared scan set: in the truth file and in every prediction file,
  // iterated in truth-file order for determinism.
  std::vector<std::string> shared;
  for (const auto& [scan_id, phase] : truth_map) {
    const bool everywhere = std::all_of(
        by_scan.begin(), by_scan.end(),
        [&scan_id](const auto& m) { return m.count(scan_id) > 0; });
    if (everywhere) shared.push_back(scan_id);
  }
  if (shared.empty()) {
    throw DataError("prediction files have no shared scan set under the truth file");
  }

  const bool merge = opt.merge_arterial_venous;
  const int n_classes = merge ? 3 : kNumPhases;
  std::vector<int> truth;
  truth.reserve(shared.size());
  std::vector<std::vector<int>> preds(opt.pred_csvs.size());
  for (const auto& scan_id : shared) {
    const PhaseLabel t = truth_map.at(scan_id);
    truth.push_back(merge ? harmonize_truth(t) : phase_code(t));
    for (std::size_t m = 0; m < by_scan.size(); ++m) {
      const PredictionRow& row = by_scan[m].at(scan_id);
      preds[m].push_back(merge ? harmonize_c4kc(row.probabilities).predicted
                               : phase_code(argmax_phase(row.probabilities)));
    }
  }

  std::vector<McNemarGridRow> grid;
  for (std::size_t a = 0; a < preds.size(); ++a) {
    for (std::size_t b = a + 1; b < preds.size(); ++b) {
      for (int k = 0; k < n_classes; ++k) {
        McNemarGridRow row;
        row.model_1 = names[a];
        row.model_2 = names[b];
        row.class_name = merge ? std::string(kMergedClassNames[k])
                               : std::string(kPhaseNames[k]);
        row.result = mcnemar_per_class(truth, preds[a], preds[b], k);
        grid.push_back(std::move(row));
      }
    }
  }
  write_mcnemar_csv(opt.out_csv, grid);
}

void run_pi_time(const PiTimeOptions& opt) {
  const auto predictions = read_predictions_csv(opt.pred_csv);
  write_predictions_csv(opt.out_csv, predictions, /*with_pi_time=*/true);
}

}  // namespace ctphase
