#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctphase/phase.hpp"

namespace ctphase {

/// K x K counts, rows = true class, columns = predicted class.
struct ConfusionMatrix {
  int n_classes = 0;
  std::vector<std::int64_t> counts;
  std::vector<std::string> class_names;

  std::int64_t at(int truth, int pred) const {
    return counts[static_cast<std::size_t>(truth) * n_classes + pred];
  }
  std::int64_t& at(int truth, int pred) {
    return counts[static_cast<std::size_t>(truth) * n_classes + pred];
  }
  std::int64_t total() const;
};

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> pred,
                          int n_classes, std::vector<std::string> class_names = {});

/// One-vs-rest metrics for one class. accuracy is the per-class row
/// convention (= sensitivity); ovr_accuracy = (TP+TN)/total is reported
/// alongside it. Any 0/0 is reported as 0.
struct ClassMetrics {
  double sensitivity = 0.0;
  double specificity = 0.0;
  double ppv = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  double ovr_accuracy = 0.0;
};

ClassMetrics per_class_metrics(const ConfusionMatrix& cm, int klass);

/// One-vs-rest ROC AUC as the Mann-Whitney concordance
/// (#{pos > neg} + 0.5 #{ties}) / (P * N), computed by sorting with
/// average ranks for ties. nullopt when truth is degenerate.
std::optional<double> roc_auc_ovr(std::span<const double> scores,
                                  std::span<const int> truth01);

double overall_accuracy(std::span<const int> truth, std::span<const int> pred);

/// Merged 3-class view used for datasets that do not separate arterial
/// from venous: p(arterial_venous) = p(arterial) + p(venous).
inline constexpr std::array<std::string_view, 3> kMergedClassNames = {
    "non_contrast", "arterial_venous", "delayed"};

struct HarmonizedRow {
  std::array<double, 3> probabilities;
  int predicted = 0;
};

HarmonizedRow harmonize_c4kc(const std::array<double, kNumPhases>& probabilities);

/// nc -> 0, arterial and venous -> 1, delayed -> 2.
int harmonize_truth(PhaseLabel p);

enum class McNemarStatus {
  ok,
  no_discordance,  // b + c = 0: statistic and p undefined (NaN)
  no_samples,      // no scans of the class at all; also undefined
};

struct McNemarResult {
  std::int64_t b = 0;  // model 1 correct, model 2 wrong
  std::int64_t c = 0;  // model 1 wrong, model 2 correct
  double statistic = 0.0;
  double p_value = 0.0;
  McNemarStatus status = McNemarStatus::ok;

  bool defined() const { return status == McNemarStatus::ok; }
};

/// Per-class McNemar's test with continuity correction:
/// statistic = (|b - c| - 1)^2 / (b + c), p from the chi-square(1)
/// survival function. Restricted to samples whose true label is k;
/// "correct" means predicting k.
McNemarResult mcnemar_per_class(std::span<const int> truth, std::span<const int> pred1,
                                std::span<const int> pred2, int klass);

/// P(X > x) for X ~ chi-square with 1 degree of freedom.
double chi2_survival_1df(double x);

/// Phase anchor times in seconds, strictly increasing in class order.
struct PiTimeAnchors {
  std::array<double, kNumPhases> seconds = kPhaseAnchorSeconds;
};

/// Probability-weighted post-injection time: sum_k p_k * anchor_k.
/// The row must sum to 1 within 1e-6.
double pseudo_pi_time(const std::array<double, kNumPhases>& probabilities,
                      const PiTimeAnchors& anchors = {});

struct PerClassReport {
  std::string name;
  std::optional<double> auc;  // nullopt when truth is degenerate for the class
  ClassMetrics metrics;
};

struct EvaluationReport {
  std::string dataset;
  std::vector<std::string> class_order;
  ConfusionMatrix matrix;
  std::vector<PerClassReport> per_class;
  double overall_accuracy = 0.0;
};

/// probabilities is row-major n x K aligned with truth/pred.
EvaluationReport evaluate_predictions(const std::string& dataset,
                                      std::span<const int> truth,
                                      std::span<const int> pred,
                                      const std::vector<std::vector<double>>& probabilities,
                                      const std::vector<std::string>& class_names);

/// Fixed key order and float formatting so reports are byte-reproducible.
/// Undefined AUC is emitted as the 0.5 no-skill convention together with
/// an explicit auc_defined flag.
std::string report_to_json(const EvaluationReport& report);

struct McNemarGridRow {
  std::string model_1;
  std::string model_2;
  std::string class_name;
  McNemarResult result;
};

/// Grid CSV `model_1,model_2,class,b,c,statistic,p_value`; undefined
/// entries carry the NaN token.
void write_mcnemar_csv(const std::string& path, const std::vector<McNemarGridRow>& rows);

/// ROC plot data `class,threshold,fpr,tpr` for external plotting.
void write_roc_points_csv(const std::string& path,
                          std::span<const int> truth,
                          const std::vector<std::vector<double>>& probabilities,
                          const std::vector<std::string>& class_names);

}  // namespace ctphase
