#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "vcshrink/samplers.hpp"

namespace vcshrink {

/// Axis-aligned rule {z_axis < threshold}. `axis` is 0-based here; the JSON
/// and CSV surfaces report it 1-based.
struct DecisionRule {
  std::size_t axis = 0;
  double threshold = 0.5;

  bool goes_left(double value) const { return value < threshold; }
  friend bool operator==(const DecisionRule&, const DecisionRule&) = default;
};

/// Full binary tree over [0,1]^R with a scalar jump on every leaf. Node ids
/// are stable for the lifetime of a node; pruned slots are recycled.
class DecisionTree {
 public:
  using NodeId = int;
  static constexpr NodeId kNone = -1;
  static constexpr NodeId kRoot = 0;

  struct Node {
    NodeId parent = kNone;
    NodeId left = kNone;
    NodeId right = kNone;
    int depth = 0;
    DecisionRule rule;
    double jump = 0.0;
    bool alive = true;

    bool is_leaf() const { return left == kNone; }
  };

  explicit DecisionTree(double root_jump = 0.0);

  const Node& node(NodeId id) const { return nodes_[static_cast<std::size_t>(id)]; }
  bool is_leaf(NodeId id) const { return node(id).is_leaf(); }
  /// Internal node whose children are both leaves.
  bool is_nog(NodeId id) const;
  bool is_stump() const { return node(kRoot).is_leaf(); }

  std::size_t leaf_count() const { return leaf_count_; }
  std::size_t internal_count() const { return leaf_count_ - 1; }
  std::size_t nog_count() const;
  /// Upper bound (exclusive) on node ids currently in use.
  std::size_t capacity() const { return nodes_.size(); }

  std::vector<NodeId> leaves() const;
  std::vector<NodeId> internal_nodes() const;
  std::vector<NodeId> nog_nodes() const;

  double jump(NodeId leaf) const { return node(leaf).jump; }
  void set_jump(NodeId leaf, double value);

  /// Turns `leaf` into an internal node with two fresh leaf children.
  std::pair<NodeId, NodeId> grow(NodeId leaf, DecisionRule rule, double left_jump = 0.0,
                                 double right_jump = 0.0);
  /// Collapses a nog node back into a leaf carrying `jump`.
  void prune(NodeId nog, double jump = 0.0);

  template <class Coordinate>
    requires std::invocable<Coordinate, std::size_t>
  NodeId find_leaf(Coordinate&& coordinate) const {
    NodeId id = kRoot;
    while (!nodes_[static_cast<std::size_t>(id)].is_leaf()) {
      const Node& n = nodes_[static_cast<std::size_t>(id)];
      id = n.rule.goes_left(coordinate(n.rule.axis)) ? n.left : n.right;
    }
    return id;
  }
  NodeId find_leaf(std::span<const double> z) const;
  NodeId find_leaf(const Eigen::MatrixXd& z_matrix, Eigen::Index row) const {
    return find_leaf([&](std::size_t axis) { return z_matrix(row, static_cast<Eigen::Index>(axis)); });
  }

  /// Largest axis index used by any rule plus one (0 for a stump).
  std::size_t min_dimension() const;

  /// Throws std::logic_error when the structural invariants fail.
  void validate() const;

  /// Same topology, rules and jumps (node ids may differ).
  bool same_as(const DecisionTree& other) const;
  /// Same topology and rules, ignoring jumps.
  bool same_structure(const DecisionTree& other) const;

 private:
  NodeId allocate(Node node);

  std::vector<Node> nodes_;
  std::vector<NodeId> free_;
  std::size_t leaf_count_ = 1;
};

/// g(z; T, M): jump of the leaf that z routes to.
double evaluate(const DecisionTree& tree, std::span<const double> z);

/// Per-observation leaf ids plus per-leaf sorted observation lists for one
/// tree and one modifier matrix.
class LeafAssignment {
 public:
  using NodeId = DecisionTree::NodeId;

  LeafAssignment() = default;
  LeafAssignment(const DecisionTree& tree, const Eigen::MatrixXd& z);

  std::size_t size() const { return leaf_of_.size(); }
  NodeId leaf_of(std::size_t i) const { return leaf_of_[i]; }
  std::span<const std::uint32_t> observations(NodeId leaf) const;

  /// `tree` must already contain the split of `parent`.
  void apply_grow(const DecisionTree& tree, NodeId parent, const Eigen::MatrixXd& z);
  /// `tree` must already have `node` collapsed; old children are given.
  void apply_prune(NodeId node, NodeId old_left, NodeId old_right);

  /// Equal per-observation leaves and equal per-leaf index sets.
  bool operator==(const LeafAssignment& other) const;

 private:
  void ensure_slot(NodeId id);

  std::vector<NodeId> leaf_of_;
  std::vector<std::vector<std::uint32_t>> members_;
};

enum class CutpointMode { uniform, midpoints };

/// Probability of choosing GROW when the tree is not a stump.
inline constexpr double kGrowProbability = 0.5;

/// Description of a proposed GROW; `log_hastings` is
/// log q(T* -> T) - log q(T -> T*) with the rule densities omitted (they
/// cancel against the matching prior factors).
struct GrowMove {
  DecisionTree::NodeId leaf = DecisionTree::kNone;
  DecisionRule rule;
  double log_hastings = 0.0;
  bool valid = true;
};

struct PruneMove {
  DecisionTree::NodeId node = DecisionTree::kNone;
  double log_hastings = 0.0;
};

/// Leaf uniformly at random, axis ~ Multinomial(theta), threshold ~ U(0,1).
GrowMove propose_grow(const DecisionTree& tree, std::span<const double> theta, Rng& rng);
/// As above, but with `midpoints` the threshold is uniform over the midpoints
/// between consecutive distinct values of the chosen axis among the leaf's
/// observations; the move is invalid when no such midpoint exists.
GrowMove propose_grow(const DecisionTree& tree, std::span<const double> theta, Rng& rng,
                      CutpointMode mode, const LeafAssignment& assignment, const Eigen::MatrixXd& z);
/// Requires a non-stump tree.
PruneMove propose_prune(const DecisionTree& tree, Rng& rng);

/// Applies a proposal to a copy of `tree`.
DecisionTree apply(const DecisionTree& tree, const GrowMove& move);
DecisionTree apply(const DecisionTree& tree, const PruneMove& move);

/// Per-axis count of internal nodes over an ensemble.
std::vector<std::size_t> split_counts(std::span<const DecisionTree> ensemble, std::size_t num_axes);

/// Nested JSON: {"leaf": mu} or {"axis": r (1-based), "threshold": t,
/// "left": {...}, "right": {...}}.
std::string to_json(const DecisionTree& tree);
DecisionTree tree_from_json(std::string_view text);

}  // namespace vcshrink
