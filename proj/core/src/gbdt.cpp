#include "ctphase/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "ctphase/errors.hpp"

namespace ctphase {

namespace {

constexpr double kProbFloor = 1e-15;   // floor inside mlogloss
constexpr double kHessFloor = 1e-16;   // keeps hessian sums positive in denominators

double split_gain(double gl, double hl, double gr, double hr, double lambda,
                  double gamma) {
  return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) -
                (gl + gr) * (gl + gr) / (hl + hr + lambda)) -
         gamma;
}

}  // namespace

void Hyperparams::validate() const {
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
    throw DataError("learning_rate must be in (0, 1]");
  }
  if (max_depth < 1) throw DataError("max_depth must be >= 1");
  if (n_rounds < 1) throw DataError("n_rounds must be >= 1");
  if (lambda < 0.0) throw DataError("lambda must be >= 0");
  if (gamma < 0.0) throw DataError("gamma must be >= 0");
  if (min_child_weight < 0.0) throw DataError("min_child_weight must be >= 0");
  if (n_classes < 2) throw DataError("n_classes must be >= 2");
}

int Tree::route(std::span<const double> x) const {
  int n = 0;
  while (!nodes[n].is_leaf()) {
    const TreeNode& nd = nodes[n];
    const double v = x[nd.feature];
    const bool left = std::isnan(v) ? nd.default_left : (v < nd.threshold);
    n = left ? nd.left : nd.right;
  }
  return n;
}

double Tree::leaf_value(std::span<const double> x) const {
  return nodes[route(x)].leaf_weight;
}

int Tree::max_leaf_depth() const {
  int deepest = 0;
  // Depth by walking parents is awkward on a flat array; recurse instead.
  auto visit = [&](auto&& self, int node, int depth) -> void {
    if (nodes[node].is_leaf()) {
      deepest = std::max(deepest, depth);
      return;
    }
    self(self, nodes[node].left, depth + 1);
    self(self, nodes[node].right, depth + 1);
  };
  visit(visit, 0, 0);
  return deepest;
}

FeatureMatrix FeatureMatrix::from_table(const FeatureTable& table) {
  FeatureMatrix m;
  m.n_features = kNumOrgans;
  m.data.reserve(table.rows.size() * kNumOrgans);
  for (const auto& row : table.rows) {
    m.data.insert(m.data.end(), row.features.begin(), row.features.end());
  }
  return m;
}

std::array<double, kNumPhases> softmax(const std::array<double, kNumPhases>& margins) {
  const double m = *std::max_element(margins.begin(), margins.end());
  std::array<double, kNumPhases> p;
  double sum = 0.0;
  for (int k = 0; k < kNumPhases; ++k) {
    p[k] = std::exp(margins[k] - m);
    sum += p[k];
  }
  for (int k = 0; k < kNumPhases; ++k) p[k] /= sum;
  return p;
}

double mlogloss(const std::vector<std::array<double, kNumPhases>>& probabilities,
                const std::vector<PhaseLabel>& labels) {
  if (probabilities.empty()) throw DataError("mlogloss of an empty sample set");
  if (probabilities.size() != labels.size()) {
    throw DataError("mlogloss: probability and label counts differ");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const auto& row = probabilities[i];
    double total = 0.0;
    for (const double p : row) total += p;
    if (std::abs(total - 1.0) > 1e-6) {
      throw DataError("mlogloss: probability row does not sum to 1");
    }
    const double p_true = row[phase_code(labels[i])];
    sum += -std::log(std::max(p_true, kProbFloor));
  }
  return sum / static_cast<double>(probabilities.size());
}

GradHess grad_hess(const std::array<double, kNumPhases>& probabilities,
                   PhaseLabel label, int klass) {
  const double p = probabilities[klass];
  const double g = p - (phase_code(label) == klass ? 1.0 : 0.0);
  const double h = std::max(p * (1.0 - p), kHessFloor);
  return {g, h};
}

std::optional<SplitCandidate> find_best_split(std::span<const std::size_t> instances,
                                              const FeatureMatrix& features,
                                              std::span<const double> g,
                                              std::span<const double> h,
                                              const Hyperparams& hp) {
  struct Entry {
    double value;
    double g;
    double h;
  };

  double g_total = 0.0;
  double h_total = 0.0;
  for (const std::size_t i : instances) {
    g_total += g[i];
    h_total += h[i];
  }

  std::optional<SplitCandidate> best;
  double best_gain = 0.0;  // candidates must beat gain 0 strictly

  std::vector<Entry> present;
  present.reserve(instances.size());

  for (std::size_t f = 0; f < features.n_features; ++f) {
    present.clear();
    double g_miss = 0.0;
    double h_miss = 0.0;
    for (const std::size_t i : instances) {
      const double v = features.at(i, f);
      if (std::isnan(v)) {
        g_miss += g[i];
        h_miss += h[i];
      } else {
        present.push_back({v, g[i], h[i]});
      }
    }
    if (present.size() < 2) continue;
    std::sort(present.begin(), present.end(),
              [](const Entry& a, const Entry& b) { return a.value < b.value; });

    double g_left = 0.0;
    double h_left = 0.0;
    for (std::size_t j = 0; j + 1 < present.size(); ++j) {
      g_left += present[j].g;
      h_left += present[j].h;
      if (present[j].value == present[j + 1].value) continue;
      const double threshold = 0.5 * (present[j].value + present[j + 1].value);
      // Guard against a midpoint collapsing onto the lower value for
      // adjacent floats; such a threshold would not separate the pair.
      if (!(present[j].value < threshold)) continue;

      // default_left scored before default_right so equal gains keep the
      // left direction, per the tie-break contract.
      for (const bool default_left : {true, false}) {
        const double gl = g_left + (default_left ? g_miss : 0.0);
        const double hl = h_left + (default_left ? h_miss : 0.0);
        const double gr = g_total - gl;
        const double hr = h_total - hl;
        if (hl < hp.min_child_weight || hr < hp.min_child_weight) continue;
        const double gain = split_gain(gl, hl, gr, hr, hp.lambda, hp.gamma);
        if (gain > best_gain) {
          best_gain = gain;
          best = SplitCandidate{static_cast<int>(f), threshold, default_left, gain};
        }
      }
    }
  }
  return best;
}

namespace {

struct BuildItem {
  std::vector<std::size_t> instances;
  int depth;
  int node;
};

}  // namespace

Tree build_tree(std::span<const std::size_t> instances, const FeatureMatrix& features,
                std::span<const double> g, std::span<const double> h,
                const Hyperparams& hp) {
  if (instances.empty()) throw DataError("build_tree on an empty instance set");

  Tree tree;
  tree.nodes.emplace_back();

  std::vector<BuildItem> stack;
  stack.push_back({std::vector<std::size_t>(instances.begin(), instances.end()), 0, 0});

  while (!stack.empty()) {
    BuildItem item = std::move(stack.back());
    stack.pop_back();

    std::optional<SplitCandidate> split;
    if (item.depth < hp.max_depth) {
      split = find_best_split(item.instances, features, g, h, hp);
    }

    if (!split) {
      double g_sum = 0.0;
      double h_sum = 0.0;
      for (const std::size_t i : item.instances) {
        g_sum += g[i];
        h_sum += h[i];
      }
      tree.nodes[item.node].leaf_weight = -g_sum / (h_sum + hp.lambda);
      continue;
    }

    std::vector<std::size_t> left_set;
    std::vector<std::size_t> right_set;
    for (const std::size_t i : item.instances) {
      const double v = features.at(i, split->feature);
      const bool left = std::isnan(v) ? split->default_left : (v < split->threshold);
      (left ? left_set : right_set).push_back(i);
    }

    TreeNode& node = tree.nodes[item.node];
    node.feature = split->feature;
    node.threshold = split->threshold;
    node.default_left = split->default_left;
    node.left = static_cast<int>(tree.nodes.size());
    node.right = node.left + 1;
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();

    const int left_node = tree.nodes[item.node].left;
    const int right_node = tree.nodes[item.node].right;
    stack.push_back({std::move(right_set), item.depth + 1, right_node});
    stack.push_back({std::move(left_set), item.depth + 1, left_node});
  }
  return tree;
}

BoostedModel train(const FeatureTable& table, const Hyperparams& hp,
                   const FeatureTable* eval_table) {
  hp.validate();
  if (table.rows.empty()) throw DataError("train: feature table has no rows");

  std::vector<PhaseLabel> labels;
  labels.reserve(table.rows.size());
  std::set<PhaseLabel> distinct;
  for (const auto& row : table.rows) {
    labels.push_back(row.phase);
    distinct.insert(row.phase);
  }
  if (distinct.size() < 2) {
    throw DataError("train: fewer than 2 distinct phase labels present");
  }

  const FeatureMatrix x = FeatureMatrix::from_table(table);
  const std::size_t n = table.rows.size();

  FeatureMatrix eval_x;
  std::vector<PhaseLabel> eval_labels;
  if (eval_table != nullptr) {
    eval_x = FeatureMatrix::from_table(*eval_table);
    for (const auto& row : eval_table->rows) eval_labels.push_back(row.phase);
  }

  BoostedModel model;
  model.hp = hp;
  model.base_margin.fill(0.0);
  model.organ_order.assign(kOrganNames.begin(), kOrganNames.end());
  model.class_order.resize(hp.n_classes);
  std::iota(model.class_order.begin(), model.class_order.end(), 0);
  model.trees.reserve(static_cast<std::size_t>(hp.n_rounds) * hp.n_classes);

  std::vector<std::array<double, kNumPhases>> margins(
      n, std::array<double, kNumPhases>{});
  std::vector<std::array<double, kNumPhases>> eval_margins(
      eval_labels.size(), std::array<double, kNumPhases>{});

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);

  std::vector<double> g(n);
  std::vector<double> h(n);
  std::vector<std::array<double, kNumPhases>> probs(n);

  for (int round = 0; round < hp.n_rounds; ++round) {
    // Probabilities are snapshot once per round; the class trees of one
    // round all see the same gradient state.
    for (std::size_t i = 0; i < n; ++i) probs[i] = softmax(margins[i]);

    for (int k = 0; k < hp.n_classes; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        const GradHess gh = grad_hess(probs[i], labels[i], k);
        g[i] = gh.g;
        h[i] = gh.h;
      }
      Tree tree = build_tree(all, x, g, h, hp);
      for (std::size_t i = 0; i < n; ++i) {
        margins[i][k] += hp.learning_rate * tree.leaf_value(x.row(i));
      }
      for (std::size_t j = 0; j < eval_labels.size(); ++j) {
        eval_margins[j][k] += hp.learning_rate * tree.leaf_value(eval_x.row(j));
      }
      model.trees.push_back(std::move(tree));
    }

    std::vector<std::array<double, kNumPhases>> round_probs(n);
    for (std::size_t i = 0; i < n; ++i) round_probs[i] = softmax(margins[i]);
    model.train_mlogloss.push_back(mlogloss(round_probs, labels));
    if (!eval_labels.empty()) {
      std::vector<std::array<double, kNumPhases>> ep(eval_labels.size());
      for (std::size_t j = 0; j < eval_labels.size(); ++j) {
        ep[j] = softmax(eval_margins[j]);
      }
      model.eval_mlogloss.push_back(mlogloss(ep, eval_labels));
    }
  }
  return model;
}

std::array<double, kNumPhases> predict_margins(const BoostedModel& model,
                                               std::span<const double> x) {
  if (x.size() != model.organ_order.size()) {
    throw DataError("predict: feature vector length does not match the model");
  }
  std::array<double, kNumPhases> margins = model.base_margin;
  std::size_t t = 0;
  for (std::size_t round = 0; round < model.trees.size() / model.hp.n_classes; ++round) {
    for (int k = 0; k < model.hp.n_classes; ++k, ++t) {
      margins[k] += model.hp.learning_rate * model.trees[t].leaf_value(x);
    }
  }
  return margins;
}

std::array<double, kNumPhases> predict_probabilities(const BoostedModel& model,
                                                     std::span<const double> x) {
  return softmax(predict_margins(model, x));
}

PhaseLabel argmax_phase(const std::array<double, kNumPhases>& scores) {
  int best = 0;
  for (int k = 1; k < kNumPhases; ++k) {
    if (scores[k] > scores[best]) best = k;
  }
  return static_cast<PhaseLabel>(best);
}

}  // namespace ctphase
