#include "ctphase/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "ctphase/csv.hpp"
#include "ctphase/errors.hpp"

namespace ctphase {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double safe_ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }
}  // namespace

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> pred,
                          int n_classes, std::vector<std::string> class_names) {
  if (truth.size() != pred.size()) {
    throw DataError("confusion: truth and prediction lengths differ");
  }
  ConfusionMatrix cm;
  cm.n_classes = n_classes;
  cm.counts.assign(static_cast<std::size_t>(n_classes) * n_classes, 0);
  cm.class_names = std::move(class_names);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= n_classes || pred[i] < 0 || pred[i] >= n_classes) {
      throw DataError("confusion: class code out of range");
    }
    ++cm.at(truth[i], pred[i]);
  }
  return cm;
}

ClassMetrics per_class_metrics(const ConfusionMatrix& cm, int klass) {
  const std::int64_t total = cm.total();
  if (total == 0) throw DataError("per_class_metrics on an empty confusion matrix");

  std::int64_t tp = 0, fp = 0, fn = 0;
  for (int t = 0; t < cm.n_classes; ++t) {
    for (int p = 0; p < cm.n_classes; ++p) {
      const std::int64_t c = cm.at(t, p);
      if (t == klass && p == klass) tp += c;
      else if (p == klass) fp += c;
      else if (t == klass) fn += c;
    }
  }
  const std::int64_t tn = total - tp - fp - fn;

  ClassMetrics m;
  m.sensitivity = safe_ratio(static_cast<double>(tp), static_cast<double>(tp + fn));
  m.specificity = safe_ratio(static_cast<double>(tn), static_cast<double>(tn + fp));
  m.ppv = safe_ratio(static_cast<double>(tp), static_cast<double>(tp + fp));
  m.f1 = safe_ratio(2.0 * m.ppv * m.sensitivity, m.ppv + m.sensitivity);
  m.accuracy = m.sensitivity;
  m.ovr_accuracy = static_cast<double>(tp + tn) / static_cast<double>(total);
  return m;
}

std::optional<double> roc_auc_ovr(std::span<const double> scores,
                                  std::span<const int> truth01) {
  if (scores.size() != truth01.size()) {
    throw DataError("roc_auc_ovr: score and truth lengths differ");
  }
  const std::size_t n = scores.size();
  std::size_t positives = 0;
  for (const int t : truth01) positives += (t != 0);
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) return std::nullopt;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&scores](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Average ranks over tie runs make the rank-sum equal the pairwise
  // concordance count (#pos>neg + 0.5 #ties) exactly.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) {
      if (truth01[order[k]] != 0) rank_sum_pos += avg_rank;
    }
    i = j + 1;
  }
  const double p = static_cast<double>(positives);
  const double u = rank_sum_pos - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

double overall_accuracy(std::span<const int> truth, std::span<const int> pred) {
  if (truth.empty()) throw DataError("overall_accuracy of an empty sample set");
  if (truth.size() != pred.size()) {
    throw DataError("overall_accuracy: truth and prediction lengths differ");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += (truth[i] == pred[i]);
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

HarmonizedRow harmonize_c4kc(const std::array<double, kNumPhases>& probabilities) {
  HarmonizedRow row;
  row.probabilities = {probabilities[0], probabilities[1] + probabilities[2],
                       probabilities[3]};
  row.predicted = 0;
  for (int k = 1; k < 3; ++k) {
    if (row.probabilities[k] > row.probabilities[row.predicted]) row.predicted = k;
  }
  return row;
}

int harmonize_truth(PhaseLabel p) {
  switch (p) {
    case PhaseLabel::non_contrast: return 0;
    case PhaseLabel::arterial:
    case PhaseLabel::venous: return 1;
    case PhaseLabel::delayed: return 2;
  }
  throw DataError("invalid phase label");
}

double chi2_survival_1df(double x) {
  if (x < 0.0) throw DataError("chi2_survival_1df of a negative statistic");
  return std::erfc(std::sqrt(x / 2.0));
}

McNemarResult mcnemar_per_class(std::span<const int> truth, std::span<const int> pred1,
                                std::span<const int> pred2, int klass) {
  if (truth.size() != pred1.size() || truth.size() != pred2.size()) {
    throw DataError("mcnemar_per_class: input lengths differ");
  }
  McNemarResult r;
  bool any_samples = false;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] != klass) continue;
    any_samples = true;
    const bool ok1 = pred1[i] == klass;
    const bool ok2 = pred2[i] == klass;
    if (ok1 && !ok2) ++r.b;
    if (!ok1 && ok2) ++r.c;
  }
  if (!any_samples) {
    r.status = McNemarStatus::no_samples;
    r.statistic = kNaN;
    r.p_value = kNaN;
    return r;
  }
  if (r.b + r.c == 0) {
    r.status = McNemarStatus::no_discordance;
    r.statistic = kNaN;
    r.p_value = kNaN;
    return r;
  }
  const double diff = std::abs(static_cast<double>(r.b - r.c)) - 1.0;
  r.statistic = diff * diff / static_cast<double>(r.b + r.c);
  r.p_value = chi2_survival_1df(r.statistic);
  r.status = McNemarStatus::ok;
  return r;
}

double pseudo_pi_time(const std::array<double, kNumPhases>& probabilities,
                      const PiTimeAnchors& anchors) {
  for (int k = 1; k < kNumPhases; ++k) {
    if (!(anchors.seconds[k] > anchors.seconds[k - 1])) {
      throw DataError("pi_time anchors must be strictly increasing");
    }
  }
  double sum = 0.0;
  for (const double p : probabilities) {
    if (!(p >= 0.0) || !(p <= 1.0)) {
      throw DataError("pseudo_pi_time: invalid probability row");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw DataError("pseudo_pi_time: probability row does not sum to 1");
  }
  double t = 0.0;
  for (int k = 0; k < kNumPhases; ++k) t += probabilities[k] * anchors.seconds[k];
  return t;
}

EvaluationReport evaluate_predictions(const std::string& dataset,
                                      std::span<const int> truth,
                                      std::span<const int> pred,
                                      const std::vector<std::vector<double>>& probabilities,
                                      const std::vector<std::string>& class_names) {
  if (truth.empty()) throw DataError("evaluate_predictions on an empty sample set");
  if (probabilities.size() != truth.size()) {
    throw DataError("evaluate_predictions: probability row count mismatch");
  }
  const int k = static_cast<int>(class_names.size());

  EvaluationReport report;
  report.dataset = dataset;
  report.class_order = class_names;
  report.matrix = confusion(truth, pred, k, class_names);
  report.overall_accuracy = overall_accuracy(truth, pred);

  for (int c = 0; c < k; ++c) {
    PerClassReport pcr;
    pcr.name = class_names[c];
    std::vector<double> scores(truth.size());
    std::vector<int> binary(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
      scores[i] = probabilities[i][c];
      binary[i] = truth[i] == c ? 1 : 0;
    }
    pcr.auc = roc_auc_ovr(scores, binary);
    pcr.metrics = per_class_metrics(report.matrix, c);
    report.per_class.push_back(std::move(pcr));
  }
  return report;
}

std::string report_to_json(const EvaluationReport& report) {
  using json = nlohmann::ordered_json;
  json j;
  j["dataset"] = report.dataset;
  j["class_order"] = report.class_order;

  json matrix = json::array();
  for (int t = 0; t < report.matrix.n_classes; ++t) {
    json row = json::array();
    for (int p = 0; p < report.matrix.n_classes; ++p) row.push_back(report.matrix.at(t, p));
    matrix.push_back(std::move(row));
  }
  j["confusion"] = std::move(matrix);

  json per_class;
  for (const auto& pcr : report.per_class) {
    json c;
    // Degenerate truth gets the no-skill 0.5 convention plus a flag.
    c["auc"] = pcr.auc.value_or(0.5);
    c["auc_defined"] = pcr.auc.has_value();
    c["sensitivity"] = pcr.metrics.sensitivity;
    c["specificity"] = pcr.metrics.specificity;
    c["ppv"] = pcr.metrics.ppv;
    c["f1"] = pcr.metrics.f1;
    c["accuracy"] = pcr.metrics.accuracy;
    c["ovr_accuracy"] = pcr.metrics.ovr_accuracy;
    per_class[pcr.name] = std::move(c);
  }
  j["per_class"] = std::move(per_class);
  j["overall_accuracy"] = report.overall_accuracy;
  return j.dump(2) + "\n";
}

void write_mcnemar_csv(const std::string& path, const std::vector<McNemarGridRow>& rows) {
  std::vector<std::vector<std::string>> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    out.push_back({row.model_1, row.model_2, row.class_name,
                   std::to_string(row.result.b), std::to_string(row.result.c),
                   csv::format_double(row.result.statistic),
                   csv::format_double(row.result.p_value)});
  }
  csv::write_file(path, {"model_1", "model_2", "class", "b", "c", "statistic", "p_value"},
                  out);
}

void write_roc_points_csv(const std::string& path, std::span<const int> truth,
                          const std::vector<std::vector<double>>& probabilities,
                          const std::vector<std::string>& class_names) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    std::size_t positives = 0;
    for (const int t : truth) positives += (t == static_cast<int>(c));
    const std::size_t negatives = truth.size() - positives;
    if (positives == 0 || negatives == 0) continue;

    std::vector<std::size_t> order(truth.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return probabilities[a][c] > probabilities[b][c];
    });

    rows.push_back({class_names[c], "inf", "0", "0"});
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size();) {
      const double score = probabilities[order[i]][c];
      while (i < order.size() && probabilities[order[i]][c] == score) {
        if (truth[order[i]] == static_cast<int>(c)) ++tp;
        else ++fp;
        ++i;
      }
      rows.push_back({class_names[c], csv::format_double(score),
                      csv::format_double(static_cast<double>(fp) / negatives),
                      csv::format_double(static_cast<double>(tp) / positives)});
    }
  }
  csv::write_file(path, {"class", "threshold", "fpr", "tpr"}, rows);
}

}  // namespace ctphase
