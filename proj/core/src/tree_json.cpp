#include <stdexcept>

#include <json.hpp>

#include "vcshrink/tree.hpp"

namespace vcshrink {

namespace {

using nlohmann::json;

json node_to_json(const DecisionTree& tree, DecisionTree::NodeId id) {
  const auto& n = tree.node(id);
  if (n.is_leaf()) return json{{"leaf", n.jump}};
  return json{{"axis", n.rule.axis + 1},
              {"threshold", n.rule.threshold},
              {"left", node_to_json(tree, n.left)},
              {"right", node_to_json(tree, n.right)}};
}

void fill(DecisionTree& tree, DecisionTree::NodeId id, const json& j) {
  if (j.contains("leaf")) {
    tree.set_jump(id, j.at("leaf").get<double>());
    return;
  }
  const auto axis = j.at("axis").get<long long>();
  if (axis < 1) throw std::invalid_argument("tree JSON: axis must be >= 1");
  DecisionRule rule{static_cast<std::size_t>(axis - 1), j.at("threshold").get<double>()};
  const auto [l, r] = tree.grow(id, rule);
  fill(tree, l, j.at("left"));
  fill(tree, r, j.at("right"));
}

}  // namespace

std::string to_json(const DecisionTree& tree) { return node_to_json(tree, DecisionTree::kRoot).dump(); }

DecisionTree tree_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("tree JSON: ") + e.what());
  }
  DecisionTree tree;
  try {
    fill(tree, DecisionTree::kRoot, j);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("tree JSON: ") + e.what());
  }
  tree.validate();
  return tree;
}

}  // namespace vcshrink
