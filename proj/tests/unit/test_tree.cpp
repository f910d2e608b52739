#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <set>

#include "stats.hpp"
#include "vcshrink/tree.hpp"

using namespace vcshrink;
using NodeId = DecisionTree::NodeId;

namespace {

// Rectangle of a node from the conjunction of its ancestors' rules.
struct Box {
  std::vector<double> lo, hi;
};

Box box_of(const DecisionTree& t, NodeId id, std::size_t r) {
  Box b{std::vector<double>(r, 0.0), std::vector<double>(r, 1.0)};
  NodeId child = id;
  NodeId parent = t.node(id).parent;
  while (parent != DecisionTree::kNone) {
    const auto& rule = t.node(parent).rule;
    if (t.node(parent).left == child) {
      b.hi[rule.axis] = std::min(b.hi[rule.axis], rule.threshold);
    } else {
      b.lo[rule.axis] = std::max(b.lo[rule.axis], rule.threshold);
    }
    child = parent;
    parent = t.node(parent).parent;
  }
  return b;
}

bool inside(const Box& b, std::span<const double> z) {
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (z[k] < b.lo[k] || z[k] >= b.hi[k]) return false;
  }
  return true;
}

DecisionTree random_tree(std::size_t leaves, std::size_t r, Rng& rng) {
  DecisionTree t;
  while (t.leaf_count() < leaves) {
    const auto ls = t.leaves();
    const auto leaf = ls[static_cast<std::size_t>(draw_uniform(rng) * static_cast<double>(ls.size()))];
    const auto axis = static_cast<std::size_t>(draw_uniform(rng) * static_cast<double>(r));
    t.grow(leaf, {axis, draw_uniform(rng)}, draw_std_normal(rng), draw_std_normal(rng));
  }
  return t;
}

Eigen::MatrixXd random_z(std::size_t n, std::size_t r, Rng& rng) {
  Eigen::MatrixXd z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(r));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index k = 0; k < z.cols(); ++k) z(i, k) = draw_uniform(rng);
  }
  return z;
}

}  // namespace

TEST_CASE("evaluate: stump returns its root jump") {
  DecisionTree t(0.7);
  const std::vector<double> z{0.1, 0.9, 0.4};
  CHECK(evaluate(t, z) == 0.7);
}

TEST_CASE("evaluate: single split routes strictly left of the threshold") {
  DecisionTree t;
  t.grow(DecisionTree::kRoot, {0, 0.5}, 1.0, -1.0);
  CHECK(evaluate(t, std::vector<double>{0.3, 0.2}) == 1.0);
  CHECK(evaluate(t, std::vector<double>{0.5, 0.2}) == -1.0);
}

TEST_CASE("evaluate: hand-built 3-leaf tree agrees with rectangle membership") {
  DecisionTree t;
  const auto [l, r] = t.grow(DecisionTree::kRoot, {0, 0.4}, 0.0, 2.0);
  t.grow(l, {1, 0.7}, -1.0, 1.0);
  (void)r;
  Rng rng = RngStream(11, 0).engine();
  for (int k = 0; k < 100; ++k) {
    const std::vector<double> z{draw_uniform(rng), draw_uniform(rng)};
    int hits = 0;
    double expected = 0.0;
    for (auto leaf : t.leaves()) {
      if (inside(box_of(t, leaf, 2), z)) {
        ++hits;
        expected = t.jump(leaf);
      }
    }
    REQUIRE(hits == 1);
    CHECK(evaluate(t, z) == expected);
  }
}

TEST_CASE("evaluate: rule axis beyond z is an input error") {
  DecisionTree t;
  t.grow(DecisionTree::kRoot, {3, 0.5});
  CHECK_THROWS_AS(evaluate(t, std::vector<double>{0.1, 0.2}), std::invalid_argument);
}

TEST_CASE("routing totality: leaf rectangles tile the cube on random trees") {
  Rng rng = RngStream(12, 0).engine();
  for (int rep = 0; rep < 5; ++rep) {
    const auto t = random_tree(8, 3, rng);
    t.validate();
    CHECK(t.leaf_count() == t.internal_count() + 1);
    std::vector<Box> boxes;
    for (auto leaf : t.leaves()) boxes.push_back(box_of(t, leaf, 3));
    for (int k = 0; k < 2000; ++k) {
      const std::vector<double> z{draw_uniform(rng), draw_uniform(rng), draw_uniform(rng)};
      int hits = 0;
      for (const auto& b : boxes) hits += inside(b, z) ? 1 : 0;
      REQUIRE(hits == 1);
      CHECK(inside(box_of(t, t.find_leaf(z), 3), z));
    }
  }
}

TEST_CASE("propose_grow: degenerate theta always splits on axis 1") {
  Rng rng = RngStream(13, 0).engine();
  const std::vector<double> theta{1.0, 0.0, 0.0, 0.0};
  DecisionTree stump;
  for (int k = 0; k < 1000; ++k) {
    const auto move = propose_grow(stump, theta, rng);
    REQUIRE(move.valid);
    CHECK(move.rule.axis == 0);
    CHECK(move.rule.threshold > 0.0);
    CHECK(move.rule.threshold < 1.0);
  }
}

TEST_CASE("propose_grow: axis frequencies follow theta") {
  Rng rng = RngStream(14, 0).engine();
  const std::vector<double> theta{0.5, 0.3, 0.2};
  const int n = 100000;
  std::vector<double> counts(3, 0.0);
  DecisionTree t;
  t.grow(DecisionTree::kRoot, {0, 0.5});
  for (int k = 0; k < n; ++k) counts[propose_grow(t, theta, rng).rule.axis] += 1.0;
  for (std::size_t a = 0; a < 3; ++a) {
    const double se = std::sqrt(theta[a] * (1.0 - theta[a]) / n);
    CHECK(std::abs(counts[a] / n - theta[a]) < 3.0 * se);
  }
}

TEST_CASE("grow and prune log-ratios negate for the same node") {
  Rng rng = RngStream(15, 0).engine();
  const std::vector<double> theta{0.25, 0.25, 0.5};
  for (int rep = 0; rep < 50; ++rep) {
    const auto t = random_tree(1 + static_cast<std::size_t>(rep % 6), 3, rng);
    const auto grow = propose_grow(t, theta, rng);
    const auto grown = apply(t, grow);
    PruneMove prune;
    do {
      prune = propose_prune(grown, rng);
    } while (prune.node != grow.leaf);
    CHECK(std::abs(grow.log_hastings + prune.log_hastings) < 1e-12);
    const auto back = apply(grown, prune);
    CHECK(back.same_structure(t));
  }
}

TEST_CASE("propose_prune: 2-leaf tree collapses to a stump") {
  Rng rng = RngStream(16, 0).engine();
  DecisionTree t;
  t.grow(DecisionTree::kRoot, {1, 0.3}, 1.0, 2.0);
  const auto move = propose_prune(t, rng);
  CHECK(move.node == DecisionTree::kRoot);
  const auto pruned = apply(t, move);
  CHECK(pruned.is_stump());
  CHECK(pruned.same_structure(DecisionTree{}));
}

TEST_CASE("propose_prune: unavailable on a stump") {
  Rng rng = RngStream(17, 0).engine();
  CHECK_THROWS(propose_prune(DecisionTree{}, rng));
}

TEST_CASE("nog count of a random 15-leaf tree matches a full traversal") {
  Rng rng = RngStream(18, 0).engine();
  for (int rep = 0; rep < 10; ++rep) {
    const auto t = random_tree(15, 4, rng);
    std::size_t nogs = 0;
    std::function<void(NodeId)> walk = [&](NodeId id) {
      const auto& n = t.node(id);
      if (n.is_leaf()) return;
      if (t.node(n.left).is_leaf() && t.node(n.right).is_leaf()) ++nogs;
      walk(n.left);
      walk(n.right);
    };
    walk(DecisionTree::kRoot);
    CHECK(t.leaf_count() == 15);
    CHECK(t.nog_count() == nogs);
    CHECK(t.nog_nodes().size() == nogs);
  }
}

TEST_CASE("split_counts") {
  SUBCASE("stumps give zeros") {
    const std::vector<DecisionTree> e(5);
    const auto c = split_counts(e, 4);
    CHECK(c == std::vector<std::size_t>(4, 0));
  }
  SUBCASE("one split on axis 3") {
    std::vector<DecisionTree> e(3);
    e[1].grow(DecisionTree::kRoot, {2, 0.5});
    CHECK(split_counts(e, 4) == std::vector<std::size_t>{0, 0, 1, 0});
  }
  SUBCASE("random ensemble matches traversal") {
    Rng rng = RngStream(19, 0).engine();
    std::vector<DecisionTree> e;
    for (int m = 0; m < 20; ++m) e.push_back(random_tree(1 + static_cast<std::size_t>(m % 7), 5, rng));
    std::vector<std::size_t> oracle(5, 0);
    std::size_t internal = 0;
    for (const auto& t : e) {
      for (std::size_t id = 0; id < t.capacity(); ++id) {
        const auto& n = t.node(static_cast<NodeId>(id));
        if (n.alive && !n.is_leaf()) {
          ++oracle[n.rule.axis];
          ++internal;
        }
      }
    }
    const auto c = split_counts(e, 5);
    CHECK(c == oracle);
    std::size_t total = 0;
    for (auto v : c) total += v;
    CHECK(total == internal);
  }
}

TEST_CASE("LeafAssignment: incremental maintenance equals recomputation") {
  Rng rng = RngStream(20, 0).engine();
  const auto z = random_z(200, 3, rng);
  const std::vector<double> theta{0.3, 0.3, 0.4};
  DecisionTree t;
  LeafAssignment a(t, z);
  for (int step = 0; step < 400; ++step) {
    if (t.is_stump() || draw_uniform(rng) < 0.55) {
      const auto move = propose_grow(t, theta, rng);
      t.grow(move.leaf, move.rule);
      a.apply_grow(t, move.leaf, z);
    } else {
      const auto move = propose_prune(t, rng);
      const auto left = t.node(move.node).left;
      const auto right = t.node(move.node).right;
      t.prune(move.node);
      a.apply_prune(move.node, left, right);
    }
    REQUIRE(a == LeafAssignment(t, z));
  }
  std::size_t total = 0;
  for (auto leaf : t.leaves()) total += a.observations(leaf).size();
  CHECK(total == 200);
}

TEST_CASE("midpoint cutpoints") {
  Rng rng = RngStream(21, 0).engine();
  Eigen::MatrixXd z(4, 1);
  z << 0.1, 0.3, 0.3, 0.9;
  const std::vector<double> theta{1.0};
  DecisionTree t;
  LeafAssignment a(t, z);
  std::set<double> seen;
  for (int k = 0; k < 200; ++k) {
    const auto move = propose_grow(t, theta, rng, CutpointMode::midpoints, a, z);
    REQUIRE(move.valid);
    seen.insert(move.rule.threshold);
  }
  CHECK(seen == std::set<double>{0.2, 0.6});

  Eigen::MatrixXd flat(3, 1);
  flat << 0.5, 0.5, 0.5;
  LeafAssignment b(t, flat);
  CHECK_FALSE(propose_grow(t, theta, rng, CutpointMode::midpoints, b, flat).valid);
}

TEST_CASE("tree JSON round trip and layout") {
  DecisionTree t;
  const auto [l, r] = t.grow(DecisionTree::kRoot, {1, 0.25}, 0.5, -1.5);
  t.grow(r, {0, 0.75}, 2.0, 3.0);
  (void)l;
  const auto text = to_json(t);
  CHECK(text.find("\"axis\":2") != std::string::npos);
  const auto back = tree_from_json(text);
  CHECK(back.same_as(t));
  CHECK(tree_from_json(R"({"leaf":1.25})").jump(DecisionTree::kRoot) == 1.25);
  CHECK_THROWS_AS(tree_from_json(R"({"axis":0,"threshold":0.5,"left":{"leaf":0},"right":{"leaf":0}})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(tree_from_json("{"), std::invalid_argument);
}
