#include "vcshrink/tree.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vcshrink {

DecisionTree::DecisionTree(double root_jump) {
  Node root;
  root.jump = root_jump;
  nodes_.push_back(root);
}

bool DecisionTree::is_nog(NodeId id) const {
  const Node& n = node(id);
  return !n.is_leaf() && is_leaf(n.left) && is_leaf(n.right);
}

std::size_t DecisionTree::nog_count() const {
  std::size_t count = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].alive && is_nog(static_cast<NodeId>(i))) ++count;
  }
  return count;
}

std::vector<DecisionTree::NodeId> DecisionTree::leaves() const {
  std::vector<NodeId> out;
  out.reserve(leaf_count_);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].alive && nodes_[i].is_leaf()) out.push_back(static_cast<NodeId>(i));
  }
  return out;
}

std::vector<DecisionTree::NodeId> DecisionTree::internal_nodes() const {
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].alive && !nodes_[i].is_leaf()) out.push_back(static_cast<NodeId>(i));
  }
  return out;
}

std::vector<DecisionTree::NodeId> DecisionTree::nog_nodes() const {
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].alive && is_nog(static_cast<NodeId>(i))) out.push_back(static_cast<NodeId>(i));
  }
  return out;
}

void DecisionTree::set_jump(NodeId leaf, double value) {
  if (!is_leaf(leaf)) throw std::logic_error("set_jump: node is not a leaf");
  nodes_[static_cast<std::size_t>(leaf)].jump = value;
}

DecisionTree::NodeId DecisionTree::allocate(Node n) {
  if (!free_.empty()) {
    const NodeId id = free_.back();
    free_.pop_back();
    nodes_[static_cast<std::size_t>(id)] = n;
    return id;
  }
  nodes_.push_back(n);
  return static_cast<NodeId>(nodes_.size() - 1);
}

std::pair<DecisionTree::NodeId, DecisionTree::NodeId> DecisionTree::grow(NodeId leaf, DecisionRule rule,
                                                                         double left_jump,
                                                                         double right_jump) {
  if (leaf < 0 || static_cast<std::size_t>(leaf) >= nodes_.size() || !nodes_[leaf].alive ||
      !is_leaf(leaf)) {
    throw std::logic_error("grow: target is not a live leaf");
  }
  const int depth = node(leaf).depth + 1;
  Node child;
  child.parent = leaf;
  child.depth = depth;
  child.jump = left_jump;
  const NodeId l = allocate(child);
  child.jump = right_jump;
  const NodeId r = allocate(child);
  Node& parent = nodes_[static_cast<std::size_t>(leaf)];
  parent.left = l;
  parent.right = r;
  parent.rule = rule;
  parent.jump = 0.0;
  ++leaf_count_;
  return {l, r};
}

void DecisionTree::prune(NodeId nog, double jump) {
  if (nog < 0 || static_cast<std::size_t>(nog) >= nodes_.size() || !nodes_[nog].alive || !is_nog(nog)) {
    throw std::logic_error("prune: target is not a nog node");
  }
  Node& n = nodes_[static_cast<std::size_t>(nog)];
  for (NodeId c : {n.left, n.right}) {
    nodes_[static_cast<std::size_t>(c)].alive = false;
    free_.push_back(c);
  }
  n.left = kNone;
  n.right = kNone;
  n.rule = DecisionRule{};
  n.jump = jump;
  --leaf_count_;
}

DecisionTree::NodeId DecisionTree::find_leaf(std::span<const double> z) const {
  return find_leaf([&](std::size_t axis) {
    if (axis >= z.size()) {
      throw std::invalid_argument("modifier vector has " + std::to_string(z.size()) +
                                  " entries but a rule uses axis " + std::to_string(axis + 1));
    }
    return z[axis];
  });
}

std::size_t DecisionTree::min_dimension() const {
  std::size_t dim = 0;
  for (const Node& n : nodes_) {
    if (n.alive && !n.is_leaf()) dim = std::max(dim, n.rule.axis + 1);
  }
  return dim;
}

void DecisionTree::validate() const {
  std::size_t leaves_seen = 0;
  std::size_t internal_seen = 0;
  std::vector<NodeId> stack{kRoot};
  std::vector<bool> seen(nodes_.size(), false);
  if (node(kRoot).parent != kNone || node(kRoot).depth != 0) {
    throw std::logic_error("tree root has a parent or nonzero depth");
  }
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    if (seen[static_cast<std::size_t>(id)]) throw std::logic_error("tree has a cycle");
    seen[static_cast<std::size_t>(id)] = true;
    const Node& n = node(id);
    if (!n.alive) throw std::logic_error("tree references a freed node");
    if ((n.left == kNone) != (n.right == kNone)) throw std::logic_error("tree node has one child");
    if (n.is_leaf()) {
      ++leaves_seen;
      continue;
    }
    ++internal_seen;
    if (!(n.rule.threshold > 0.0 && n.rule.threshold < 1.0)) {
      throw std::logic_error("tree rule threshold outside (0, 1)");
    }
    for (NodeId c : {n.left, n.right}) {
      if (node(c).parent != id || node(c).depth != n.depth + 1) {
        throw std::logic_error("tree child has inconsistent parent or depth");
      }
      stack.push_back(c);
    }
  }
  if (leaves_seen != internal_seen + 1 || leaves_seen != leaf_count_) {
    throw std::logic_error("tree leaf count is inconsistent");
  }
}

namespace {

bool same_subtree(const DecisionTree& a, DecisionTree::NodeId ia, const DecisionTree& b,
                  DecisionTree::NodeId ib, bool compare_jumps) {
  const auto& na = a.node(ia);
  const auto& nb = b.node(ib);
  if (na.is_leaf() != nb.is_leaf()) return false;
  if (na.is_leaf()) return !compare_jumps || na.jump == nb.jump;
  return na.rule == nb.rule && same_subtree(a, na.left, b, nb.left, compare_jumps) &&
         same_subtree(a, na.right, b, nb.right, compare_jumps);
}

}  // namespace

bool DecisionTree::same_as(const DecisionTree& other) const {
  return same_subtree(*this, kRoot, other, kRoot, true);
}

bool DecisionTree::same_structure(const DecisionTree& other) const {
  return same_subtree(*this, kRoot, other, kRoot, false);
}

double evaluate(const DecisionTree& tree, std::span<const double> z) {
  return tree.jump(tree.find_leaf(z));
}

// ---------------------------------------------------------------------------

LeafAssignment::LeafAssignment(const DecisionTree& tree, const Eigen::MatrixXd& z) {
  const auto n = static_cast<std::size_t>(z.rows());
  leaf_of_.resize(n);
  members_.resize(tree.capacity());
  for (std::size_t i = 0; i < n; ++i) {
    const NodeId leaf = tree.find_leaf(z, static_cast<Eigen::Index>(i));
    leaf_of_[i] = leaf;
    members_[static_cast<std::size_t>(leaf)].push_back(static_cast<std::uint32_t>(i));
  }
}

std::span<const std::uint32_t> LeafAssignment::observations(NodeId leaf) const {
  if (leaf < 0 || static_cast<std::size_t>(leaf) >= members_.size()) return {};
  return members_[static_cast<std::size_t>(leaf)];
}

void LeafAssignment::ensure_slot(NodeId id) {
  if (static_cast<std::size_t>(id) >= members_.size()) members_.resize(static_cast<std::size_t>(id) + 1);
}

void LeafAssignment::apply_grow(const DecisionTree& tree, NodeId parent, const Eigen::MatrixXd& z) {
  const auto& p = tree.node(parent);
  ensure_slot(p.left);
  ensure_slot(p.right);
  auto& left = members_[static_cast<std::size_t>(p.left)];
  auto& right = members_[static_cast<std::size_t>(p.right)];
  left.clear();
  right.clear();
  const auto axis = static_cast<Eigen::Index>(p.rule.axis);
  for (std::uint32_t i : members_[static_cast<std::size_t>(parent)]) {
    if (p.rule.goes_left(z(static_cast<Eigen::Index>(i), axis))) {
      left.push_back(i);
      leaf_of_[i] = p.left;
    } else {
      right.push_back(i);
      leaf_of_[i] = p.right;
    }
  }
  members_[static_cast<std::size_t>(parent)].clear();
}

void LeafAssignment::apply_prune(NodeId node, NodeId old_left, NodeId old_right) {
  ensure_slot(node);
  auto& left = members_[static_cast<std::size_t>(old_left)];
  auto& right = members_[static_cast<std::size_t>(old_right)];
  auto& merged = members_[static_cast<std::size_t>(node)];
  merged.clear();
  merged.reserve(left.size() + right.size());
  std::merge(left.begin(), left.end(), right.begin(), right.end(), std::back_inserter(merged));
  for (std::uint32_t i : merged) leaf_of_[i] = node;
  left.clear();
  right.clear();
}

bool LeafAssignment::operator==(const LeafAssignment& other) const {
  if (leaf_of_ != other.leaf_of_) return false;
  const std::size_t slots = std::max(members_.size(), other.members_.size());
  for (std::size_t k = 0; k < slots; ++k) {
    const auto a = observations(static_cast<NodeId>(k));
    const auto b = other.observations(static_cast<NodeId>(k));
    if (!std::equal(a.begin(), a.end(), b.begin(), b.end())) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

namespace {

double grow_log_hastings(const DecisionTree& tree, DecisionTree::NodeId leaf) {
  const double p_grow = tree.is_stump() ? 1.0 : kGrowProbability;
  const double leaves_before = static_cast<double>(tree.leaf_count());
  std::size_t nogs_after = tree.nog_count() + 1;
  const auto parent = tree.node(leaf).parent;
  if (parent != DecisionTree::kNone && tree.is_nog(parent)) --nogs_after;
  const double p_prune_after = 1.0 - kGrowProbability;
  return std::log(p_prune_after) - std::log(static_cast<double>(nogs_after)) - std::log(p_grow) +
         std::log(leaves_before);
}

}  // namespace

GrowMove propose_grow(const DecisionTree& tree, std::span<const double> theta, Rng& rng) {
  const auto leaves = tree.leaves();
  GrowMove move;
  move.leaf = leaves[static_cast<std::size_t>(draw_uniform(rng) * static_cast<double>(leaves.size()))];
  move.rule.axis = draw_multinomial_index(rng, theta);
  move.rule.threshold = draw_uniform(rng);
  move.log_hastings = grow_log_hastings(tree, move.leaf);
  return move;
}

GrowMove propose_grow(const DecisionTree& tree, std::span<const double> theta, Rng& rng, CutpointMode mode,
                      const LeafAssignment& assignment, const Eigen::MatrixXd& z) {
  if (mode == CutpointMode::uniform) return propose_grow(tree, theta, rng);
  const auto leaves = tree.leaves();
  GrowMove move;
  move.leaf = leaves[static_cast<std::size_t>(draw_uniform(rng) * static_cast<double>(leaves.size()))];
  move.rule.axis = draw_multinomial_index(rng, theta);
  move.log_hastings = grow_log_hastings(tree, move.leaf);

  std::vector<double> values;
  for (std::uint32_t i : assignment.observations(move.leaf)) {
    values.push_back(z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(move.rule.axis)));
  }
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  if (values.size() < 2) {
    move.valid = false;
    move.rule.threshold = 0.5;
    return move;
  }
  const auto k = static_cast<std::size_t>(draw_uniform(rng) * static_cast<double>(values.size() - 1));
  move.rule.threshold = 0.5 * (values[k] + values[k + 1]);
  return move;
}

PruneMove propose_prune(const DecisionTree& tree, Rng& rng) {
  if (tree.is_stump()) throw std::logic_error("propose_prune: a stump cannot be pruned");
  const auto nogs = tree.nog_nodes();
  PruneMove move;
  move.node = nogs[static_cast<std::size_t>(draw_uniform(rng) * static_cast<double>(nogs.size()))];
  const double leaves_after = static_cast<double>(tree.leaf_count() - 1);
  const double p_grow_after = tree.leaf_count() == 2 ? 1.0 : kGrowProbability;
  const double p_prune = 1.0 - kGrowProbability;
  move.log_hastings = std::log(p_grow_after) - std::log(leaves_after) - std::log(p_prune) +
                      std::log(static_cast<double>(nogs.size()));
  return move;
}

DecisionTree apply(const DecisionTree& tree, const GrowMove& move) {
  DecisionTree out = tree;
  out.grow(move.leaf, move.rule);
  return out;
}

DecisionTree apply(const DecisionTree& tree, const PruneMove& move) {
  DecisionTree out = tree;
  out.prune(move.node);
  return out;
}

std::vector<std::size_t> split_counts(std::span<const DecisionTree> ensemble, std::size_t num_axes) {
  std::vector<std::size_t> counts(num_axes, 0);
  for (const auto& tree : ensemble) {
    for (auto id : tree.internal_nodes()) {
      const auto axis = tree.node(id).rule.axis;
      if (axis >= num_axes) throw std::invalid_argument("split_counts: rule axis exceeds modifier count");
      ++counts[axis];
    }
  }
  return counts;
}

}  // namespace vcshrink
