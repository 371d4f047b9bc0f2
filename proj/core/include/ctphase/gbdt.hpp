#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctphase/features.hpp"
#include "ctphase/phase.hpp"

namespace ctphase {

struct Hyperparams {
  double learning_rate = 0.05;
  int max_depth = 4;
  int n_rounds = 200;
  double lambda = 1.0;            // L2 penalty on leaf weights
  double gamma = 0.0;             // minimum gain required to keep a split
  double min_child_weight = 1.0;  // minimum hessian sum per child
  int n_classes = kNumPhases;

  void validate() const;
};

/// Tree node in a flat array. Internal nodes route value < threshold to
/// `left` and value >= threshold to `right`; a missing value follows
/// `default_left`. Leaves have left == right == -1.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  bool default_left = false;
  int left = -1;
  int right = -1;
  double leaf_weight = 0.0;

  bool is_leaf() const { return left < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;

  int route(std::span<const double> x) const;
  double leaf_value(std::span<const double> x) const;
  int max_leaf_depth() const;
};

/// Row-major feature storage with a run-time width so the tree builder is
/// testable on narrow tables; models always use kNumOrgans columns.
struct FeatureMatrix {
  std::size_t n_features = kNumOrgans;
  std::vector<double> data;

  std::size_t n_rows() const { return n_features == 0 ? 0 : data.size() / n_features; }
  double at(std::size_t row, std::size_t f) const { return data[row * n_features + f]; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data).subspan(r * n_features, n_features);
  }

  static FeatureMatrix from_table(const FeatureTable& table);
};

/// Per-class tree ensemble. Trees are stored round-major (round * n_classes
/// + class); organ and class order are embedded so a persisted model is
/// self-describing.
struct BoostedModel {
  Hyperparams hp;
  std::array<double, kNumPhases> base_margin{};  // all zeros
  std::vector<Tree> trees;
  std::vector<std::string> organ_order;
  std::vector<int> class_order;
  std::vector<double> train_mlogloss;  // one entry per round
  std::vector<double> eval_mlogloss;   // empty when no eval table was given

  const Tree& tree_at(int round, int klass) const {
    return trees[static_cast<std::size_t>(round) * hp.n_classes + klass];
  }
};

/// Numerically stable softmax (max subtraction); probabilities are
/// positive and sum to 1 within 1e-12.
std::array<double, kNumPhases> softmax(const std::array<double, kNumPhases>& margins);

/// Mean over samples of -ln p[true class], with p floored at 1e-15.
double mlogloss(const std::vector<std::array<double, kNumPhases>>& probabilities,
                const std::vector<PhaseLabel>& labels);

struct GradHess {
  double g;
  double h;
};

/// Second-order softmax statistics for class k:
/// g = p_k - 1[label == k], h = p_k (1 - p_k) floored at 1e-16.
GradHess grad_hess(const std::array<double, kNumPhases>& probabilities,
                   PhaseLabel label, int klass);

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  bool default_left = false;
  double gain = 0.0;
};

/// Exact greedy split search. Candidate thresholds sit midway between
/// consecutive distinct present values of each feature; both default
/// directions for missing values are scored at every threshold. Gain is
///   1/2 * (GL^2/(HL+lambda) + GR^2/(HR+lambda)
///          - (GL+GR)^2/(HL+HR+lambda)) - gamma.
/// Returns nullopt when the best gain is <= 0 or every candidate violates
/// min_child_weight. Ties resolve to the lowest feature index, then the
/// lowest threshold, then default-left over default-right, which makes the
/// choice unique and scheduling-independent.
std::optional<SplitCandidate> find_best_split(std::span<const std::size_t> instances,
                                              const FeatureMatrix& features,
                                              std::span<const double> g,
                                              std::span<const double> h,
                                              const Hyperparams& hp);

/// Recursive greedy construction to max_depth. Leaf weights are the
/// unscaled Newton step -G/(H+lambda); the learning rate is applied when
/// the tree is used.
Tree build_tree(std::span<const std::size_t> instances, const FeatureMatrix& features,
                std::span<const double> g, std::span<const double> h,
                const Hyperparams& hp);

/// Boosted training. Each round snapshots softmax probabilities from the
/// accumulated margins, then builds one tree per class in class order and
/// adds learning_rate-scaled leaf weights to the routed samples' margins.
/// Train (and eval, when given) mlogloss is recorded after every round.
BoostedModel train(const FeatureTable& table, const Hyperparams& hp,
                   const FeatureTable* eval_table = nullptr);

std::array<double, kNumPhases> predict_margins(const BoostedModel& model,
                                               std::span<const double> x);

std::array<double, kNumPhases> predict_probabilities(const BoostedModel& model,
                                                     std::span<const double> x);

/// Argmax with ties broken by the lowest class code.
PhaseLabel argmax_phase(const std::array<double, kNumPhases>& scores);

}  // namespace ctphase
