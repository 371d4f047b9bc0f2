#include "ctphase/model_io.hpp"

#include <fstream>

#include <json.hpp>

#include "ctphase/errors.hpp"

namespace ctphase {

namespace {

using json = nlohmann::ordered_json;

json hyperparams_to_json(const Hyperparams& hp) {
  json j;
  j["learning_rate"] = hp.learning_rate;
  j["max_depth"] = hp.max_depth;
  j["n_rounds"] = hp.n_rounds;
  j["lambda"] = hp.lambda;
  j["gamma"] = hp.gamma;
  j["min_child_weight"] = hp.min_child_weight;
  j["n_classes"] = hp.n_classes;
  return j;
}

Hyperparams hyperparams_from_json(const json& j) {
  Hyperparams hp;
  hp.learning_rate = j.at("learning_rate").get<double>();
  hp.max_depth = j.at("max_depth").get<int>();
  hp.n_rounds = j.at("n_rounds").get<int>();
  hp.lambda = j.at("lambda").get<double>();
  hp.gamma = j.at("gamma").get<double>();
  hp.min_child_weight = j.at("min_child_weight").get<double>();
  hp.n_classes = j.at("n_classes").get<int>();
  return hp;
}

json tree_nodes_to_json(const Tree& tree) {
  json nodes = json::array();
  for (const TreeNode& n : tree.nodes) {
    json jn;
    if (n.is_leaf()) {
      jn["leaf"] = n.leaf_weight;
    } else {
      jn["feature"] = n.feature;
      jn["threshold"] = n.threshold;
      jn["default_left"] = n.default_left;
      jn["left"] = n.left;
      jn["right"] = n.right;
    }
    nodes.push_back(std::move(jn));
  }
  return nodes;
}

Tree tree_from_json(const json& nodes, int n_features) {
  if (!nodes.is_array() || nodes.empty()) {
    throw DataError("model tree has no nodes");
  }
  Tree tree;
  const int count = static_cast<int>(nodes.size());
  for (const auto& jn : nodes) {
    TreeNode n;
    if (jn.contains("leaf")) {
      n.leaf_weight = jn.at("leaf").get<double>();
    } else {
      n.feature = jn.at("feature").get<int>();
      n.threshold = jn.at("threshold").get<double>();
      n.default_left = jn.at("default_left").get<bool>();
      n.left = jn.at("left").get<int>();
      n.right = jn.at("right").get<int>();
      if (n.feature < 0 || n.feature >= n_features || n.left <= 0 || n.left >= count ||
          n.right <= 0 || n.right >= count) {
        throw DataError("model tree node references are out of range");
      }
    }
    tree.nodes.push_back(n);
  }
  return tree;
}

}  // namespace

void save_model(const BoostedModel& model, const std::string& path) {
  json j;
  j["schema_version"] = kModelSchemaVersion;
  j["hyperparams"] = hyperparams_to_json(model.hp);
  j["class_order"] = model.class_order;
  j["organ_order"] = model.organ_order;
  j["base_margin"] = model.base_margin;

  json trees = json::array();
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    json jt;
    jt["class"] = static_cast<int>(t % model.hp.n_classes);
    jt["round"] = static_cast<int>(t / model.hp.n_classes);
    jt["nodes"] = tree_nodes_to_json(model.trees[t]);
    trees.push_back(std::move(jt));
  }
  j["trees"] = std::move(trees);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw DataError("write failed for model file '" + path + "'");
}

BoostedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed model file '" + path + "': " + e.what());
  }

  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kModelSchemaVersion) {
      throw DataError("model file '" + path + "' has schema version " +
                      std::to_string(version) + ", expected " +
                      std::to_string(kModelSchemaVersion));
    }

    BoostedModel model;
    model.hp = hyperparams_from_json(j.at("hyperparams"));
    model.hp.validate();

    if (!j.contains("organ_order")) {
      throw DataError("model file '" + path + "' is missing the organ_order block");
    }
    model.organ_order = j.at("organ_order").get<std::vector<std::string>>();
    if (model.organ_order.size() != kNumOrgans) {
      throw DataError("model file '" + path + "' organ_order must list 16 organs");
    }
    for (int i = 0; i < kNumOrgans; ++i) {
      if (model.organ_order[i] != kOrganNames[i]) {
        throw DataError("model file '" + path +
                        "' organ_order does not match the canonical organ order");
      }
    }

    model.class_order = j.at("class_order").get<std::vector<int>>();
    if (static_cast<int>(model.class_order.size()) != model.hp.n_classes) {
      throw DataError("model file '" + path + "' class_order length mismatch");
    }

    const auto margins = j.at("base_margin").get<std::vector<double>>();
    if (margins.size() != kNumPhases) {
      throw DataError("model file '" + path + "' base_margin length mismatch");
    }
    std::copy(margins.begin(), margins.end(), model.base_margin.begin());

    const json& trees = j.at("trees");
    const std::size_t expected =
        static_cast<std::size_t>(model.hp.n_rounds) * model.hp.n_classes;
    if (!trees.is_array() || trees.size() != expected) {
      throw DataError("model file '" + path + "' must store n_rounds * n_classes trees");
    }
    model.trees.reserve(expected);
    for (std::size_t t = 0; t < trees.size(); ++t) {
      const json& jt = trees[t];
      const int klass = jt.at("class").get<int>();
      const int round = jt.at("round").get<int>();
      if (klass != static_cast<int>(t % model.hp.n_classes) ||
          round != static_cast<int>(t / model.hp.n_classes)) {
        throw DataError("model file '" + path + "' trees are not in round-major order");
      }
      model.trees.push_back(
          tree_from_json(jt.at("nodes"), static_cast<int>(kNumOrgans)));
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed model file '" + path + "': " + e.what());
  }
}

}  // namespace ctphase
