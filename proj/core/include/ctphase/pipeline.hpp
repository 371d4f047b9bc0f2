#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctphase/cv.hpp"
#include "ctphase/gbdt.hpp"
#include "ctphase/metrics.hpp"
#include "ctphase/phantom.hpp"

namespace ctphase {

// Command-level entry points shared by the CLI and the acceptance suite.
// All randomness derives from the seeds below; two runs with identical
// options and inputs produce byte-identical output files.

struct SimulateOptions {
  std::string out_dir;
  int n_per_phase = 1;
  double abdomen_only_fraction = 0.0;
  double no_pelvis_fraction = 0.0;
  std::uint64_t seed = 42;
  double noise_sd = 12.0;
  double phase_jitter_s = 5.0;
  std::string profile_path;  // optional override of the built-in curves
  unsigned threads = 0;      // 0 = all cores
};
void run_simulate(const SimulateOptions& opt);

struct ExtractOptions {
  std::string manifest_path;
  std::string coding_path;  // empty = canonical coding
  std::string out_csv;
  unsigned threads = 0;
};
void run_extract(const ExtractOptions& opt);

struct TrainOptions {
  std::string features_csv;
  std::string eval_features_csv;  // optional, single-model runs only
  std::string out_dir;
  Hyperparams hp;
  int cv_folds = 0;  // 0 = single model on all rows
  std::uint64_t seed = 42;
  unsigned threads = 0;
};
void run_train(const TrainOptions& opt);

struct PredictOptions {
  std::string model_path;  // model file or ensemble directory
  std::string features_csv;
  std::string out_csv;
  bool append_pi_time = false;
};
void run_predict(const PredictOptions& opt);

struct EvaluateOptions {
  std::string pred_csv;
  std::string truth_csv;  // any CSV with scan_id and phase columns
  std::string out_json;   // empty = stdout
  std::string dataset = "dataset";
  bool merge_arterial_venous = false;
  std::string roc_points_csv;  // optional plot data
};
EvaluationReport run_evaluate(const EvaluateOptions& opt);

struct CompareOptions {
  std::vector<std::string> pred_csvs;  // two or more
  std::vector<std::string> names;     // optional; defaults to file stems
  std::string truth_csv;
  std::string out_csv;
  bool merge_arterial_venous = false;
};
void run_compare(const CompareOptions& opt);

struct PiTimeOptions {
  std::string pred_csv;
  std::string out_csv;
};
void run_pi_time(const PiTimeOptions& opt);

/// Prediction file rows: scan_id, predicted phase, per-class margins and
/// probabilities, optionally a pseudo post-injection time column.
struct PredictionRow {
  std::string scan_id;
  PhaseLabel predicted = PhaseLabel::non_contrast;
  std::array<double, kNumPhases> margins{};
  std::array<double, kNumPhases> probabilities{};
};

std::vector<PredictionRow> read_predictions_csv(const std::string& path);

}  // namespace ctphase
