// ctphase: contrast-phase classification toolkit.
//
// Pipeline verbs: simulate -> extract -> train -> predict -> evaluate /
// compare / pi-time. Exit codes: 0 success, 1 usage, 2 data error,
// 3 internal error.

#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "ctphase/errors.hpp"
#include "ctphase/parallel.hpp"
#include "ctphase/pipeline.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

void add_threads_option(CLI::App* cmd, unsigned& threads) {
  cmd->add_option("--threads", threads,
                  "Worker thread cap (default: all available cores)");
}

void add_hyperparam_options(CLI::App* cmd, ctphase::Hyperparams& hp) {
  cmd->add_option("--learning-rate", hp.learning_rate, "Shrinkage per tree")
      ->capture_default_str();
  cmd->add_option("--max-depth", hp.max_depth, "Maximum tree depth")
      ->capture_default_str();
  cmd->add_option("--rounds", hp.n_rounds, "Boosting rounds")->capture_default_str();
  cmd->add_option("--lambda", hp.lambda, "L2 penalty on leaf weights")
      ->capture_default_str();
  cmd->add_option("--gamma", hp.gamma, "Minimum split gain")->capture_default_str();
  cmd->add_option("--min-child-weight", hp.min_child_weight,
                  "Minimum hessian sum per child")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CT contrast-phase classification toolkit"};
  app.require_subcommand(1);

  ctphase::SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic phantom corpus");
  simulate->add_option("--out", sim.out_dir, "Output directory")->required();
  simulate->add_option("--n-per-phase", sim.n_per_phase, "Patients (scans per phase)")
      ->required();
  simulate->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  simulate->add_option("--abdomen-only-frac", sim.abdomen_only_fraction,
                       "Fraction of patients without brain/heart/pulmonary_vein")
      ->capture_default_str();
  simulate->add_option("--no-pelvis-frac", sim.no_pelvis_fraction,
                       "Fraction of patients without bladder and iliac vessels")
      ->capture_default_str();
  simulate->add_option("--noise-sd", sim.noise_sd, "Gaussian noise sigma in HU")
      ->capture_default_str();
  simulate->add_option("--jitter", sim.phase_jitter_s,
                       "Half-width of the sampling window around each phase anchor")
      ->capture_default_str();
  simulate->add_option("--profile", sim.profile_path,
                       "Enhancement profile JSON (default: built-in curves)");
  add_threads_option(simulate, sim.threads);

  ctphase::ExtractOptions ext;
  auto* extract =
      app.add_subcommand("extract", "Extract per-organ median-HU features");
  extract->add_option("--manifest", ext.manifest_path, "Manifest CSV")->required();
  extract->add_option("--out", ext.out_csv, "Output feature CSV")->required();
  extract->add_option("--coding", ext.coding_path,
                      "Organ coding file (default: canonical 1..16)");
  add_threads_option(extract, ext.threads);

  ctphase::TrainOptions trn;
  auto* train = app.add_subcommand("train", "Train a boosted-tree phase classifier");
  train->add_option("--features", trn.features_csv, "Training feature CSV")->required();
  train->add_option("--out", trn.out_dir, "Output model directory")->required();
  train->add_option("--cv", trn.cv_folds,
                    "Stratified grouped folds; trains one model per fold");
  train->add_option("--eval-features", trn.eval_features_csv,
                    "Eval feature CSV for the mlogloss curve (single model only)");
  train->add_option("--seed", trn.seed, "Random seed for the fold split")
      ->capture_default_str();
  add_hyperparam_options(train, trn.hp);
  add_threads_option(train, trn.threads);

  ctphase::PredictOptions prd;
  auto* predict = app.add_subcommand("predict", "Predict phases for a feature CSV");
  predict->add_option("--model", prd.model_path, "Model file or ensemble directory")
      ->required();
  predict->add_option("--features", prd.features_csv, "Feature CSV")->required();
  predict->add_option("--out", prd.out_csv, "Output prediction CSV")->required();
  predict->add_flag("--pi-time", prd.append_pi_time,
                    "Append a pseudo post-injection time column");

  ctphase::EvaluateOptions evl;
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against truth");
  evaluate->add_option("--pred", evl.pred_csv, "Prediction CSV")->required();
  evaluate->add_option("--truth", evl.truth_csv,
                       "Truth CSV (any file with scan_id and phase columns)")
      ->required();
  evaluate->add_option("--out", evl.out_json, "Report JSON (default: stdout)");
  evaluate->add_option("--dataset", evl.dataset, "Dataset name for the report")
      ->capture_default_str();
  evaluate->add_flag("--merge-arterial-venous", evl.merge_arterial_venous,
                     "Score the merged 3-class {nc, arterial+venous, delayed} task");
  evaluate->add_option("--roc-points", evl.roc_points_csv,
                       "Write ROC curve points CSV for external plotting");

  ctphase::CompareOptions cmp;
  auto* compare =
      app.add_subcommand("compare", "Per-class McNemar grid over prediction files");
  compare->add_option("predictions", cmp.pred_csvs, "Two or more prediction CSVs")
      ->required()
      ->expected(2, -1);
  compare->add_option("--truth", cmp.truth_csv, "Truth CSV")->required();
  compare->add_option("--out", cmp.out_csv, "Output McNemar grid CSV")->required();
  compare->add_option("--names", cmp.names,
                      "Model names, one per prediction file (default: file stems)");
  compare->add_flag("--merge-arterial-venous", cmp.merge_arterial_venous,
                    "Compare on the merged 3-class task");

  ctphase::PiTimeOptions pit;
  auto* pi_time = app.add_subcommand(
      "pi-time", "Append pseudo post-injection times to a prediction CSV");
  pi_time->add_option("--pred", pit.pred_csv, "Prediction CSV")->required();
  pi_time->add_option("--out", pit.out_csv, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*simulate) ctphase::run_simulate(sim);
    if (*extract) ctphase::run_extract(ext);
    if (*train) ctphase::run_train(trn);
    if (*predict) ctphase::run_predict(prd);
    if (*evaluate) ctphase::run_evaluate(evl);
    if (*compare) ctphase::run_compare(cmp);
    if (*pi_time) ctphase::run_pi_time(pit);
  } catch (const ctphase::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return 0;
}
