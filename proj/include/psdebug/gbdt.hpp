#ifndef PSDEBUG_GBDT_HPP
#define PSDEBUG_GBDT_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "psdebug/dataset.hpp"
#include "psdebug/logreg.hpp"  // sigmoid

namespace psdebug {

struct GBDTHyper {
  int num_trees = 30;
  int max_depth = 3;  // 0 is allowed and yields a single root leaf per tree
  double learning_rate = 0.1;  // sigma in the boosting loss
  int min_leaf_size = 5;
};

/// Axis-aligned regression tree. Leaves carry a score and a dense leaf id;
/// every feature vector is routed to exactly one leaf (x[feature] < threshold
/// goes left).
class Tree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double score = 0.0;
    int leaf = -1;

    bool is_leaf() const { return feature < 0; }
  };

  Tree() = default;
  explicit Tree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {
    for (const Node& n : nodes_) {
      if (n.is_leaf()) ++num_leaves_;
    }
  }

  const std::vector<Node>& nodes() const { return nodes_; }
  int num_leaves() const { return num_leaves_; }
  bool empty() const { return nodes_.empty(); }

  int leaf_of(const std::vector<double>& x) const {
    int idx = 0;
    while (!nodes_[static_cast<std::size_t>(idx)].is_leaf()) {
      const Node& n = nodes_[static_cast<std::size_t>(idx)];
      idx = x.at(static_cast<std::size_t>(n.feature)) < n.threshold ? n.left
                                                                    : n.right;
    }
    return nodes_[static_cast<std::size_t>(idx)].leaf;
  }

  double score_at(const std::vector<double>& x) const {
    int idx = 0;
    while (!nodes_[static_cast<std::size_t>(idx)].is_leaf()) {
      const Node& n = nodes_[static_cast<std::size_t>(idx)];
      idx = x.at(static_cast<std::size_t>(n.feature)) < n.threshold ? n.left
                                                                    : n.right;
    }
    return nodes_[static_cast<std::size_t>(idx)].score;
  }

  double leaf_score_value(int leaf) const {
    for (const Node& n : nodes_) {
      if (n.is_leaf() && n.leaf == leaf) return n.score;
    }
    throw std::out_of_range("tree: no such leaf");
  }

 private:
  friend Tree fit_regression_tree(const Dataset&, const std::vector<double>&,
                                  const GBDTHyper&);
  std::vector<Node> nodes_;
  int num_leaves_ = 0;
};

struct GBDTModel {
  std::vector<Tree> trees;
  double base_score = 0.0;

  double score(const std::vector<double>& x) const {
    double s = base_score;
    for (const Tree& t : trees) s += t.score_at(x);
    return s;
  }

  int classify(const std::vector<double>& x) const {
    return score(x) >= 0.0 ? 1 : -1;
  }
};

inline double gbdt_score(const GBDTModel& model, const std::vector<double>& x) {
  return model.score(x);
}

inline int gbdt_classify(const GBDTModel& model, const std::vector<double>& x) {
  return model.classify(x);
}

/// Boosting loss L(y, F) = log(1 + e^{-2 y sigma F}), summed over points.
inline double boost_loss(const std::vector<int>& labels,
                         const std::vector<double>& scores, double sigma) {
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double t = 2.0 * labels[i] * sigma * scores[i];
    total += t >= 0.0 ? std::log1p(std::exp(-t)) : -t + std::log1p(std::exp(t));
  }
  return total;
}

/// Error residuals: the negative gradient of the boosting loss,
/// ybar_i = 2 y_i sigma / (1 + e^{2 y_i sigma F_i}). Always |ybar| < 2 sigma.
inline std::vector<double> residuals(const std::vector<int>& labels,
                                     const std::vector<double>& scores,
                                     double sigma) {
  if (labels.size() != scores.size()) {
    throw std::invalid_argument("residuals: length mismatch");
  }
  std::vector<double> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out[i] = 2.0 * labels[i] * sigma * sigmoid(-2.0 * labels[i] * sigma * scores[i]);
  }
  return out;
}

/// Newton step for one leaf: sum(ybar) / sum(|ybar| (2 sigma - |ybar|)).
/// The denominator is the summed curvature of the loss over the members;
/// degenerate leaves (denominator < 1e-12) score 0.
inline double leaf_score(const std::vector<double>& member_residuals,
                         double sigma) {
  if (member_residuals.empty()) {
    throw std::invalid_argument("leaf_score: empty member set");
  }
  double num = 0.0;
  double den = 0.0;
  for (double r : member_residuals) {
    num += r;
    den += std::abs(r) * (2.0 * sigma - std::abs(r));
  }
  return den < 1e-12 ? 0.0 : num / den;
}

namespace detail {

struct SplitChoice {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double gain = 0.0;
};

// Best squared-error-reduction split over all features. Thresholds are
// midpoints between consecutive distinct sorted feature values; ties resolve
// to the lowest feature index, then the lowest threshold (strict > on gain
// with ascending iteration).
inline SplitChoice best_split(const Dataset& data,
                              const std::vector<double>& targets,
                              const std::vector<std::size_t>& indices,
                              int min_leaf_size) {
  SplitChoice best;
  const std::size_t m = indices.size();
  const auto min_leaf = static_cast<std::size_t>(min_leaf_size);
  if (m < 2 * min_leaf) return best;

  std::vector<std::size_t> order(m);
  std::vector<double> prefix(m + 1, 0.0);
  for (std::size_t f = 0; f < data.dim(); ++f) {
    for (std::size_t i = 0; i < m; ++i) order[i] = indices[i];
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double va = data.point(a).features[f];
      const double vb = data.point(b).features[f];
      return va != vb ? va < vb : a < b;
    });
    for (std::size_t i = 0; i < m; ++i) {
      prefix[i + 1] = prefix[i] + targets[order[i]];
    }
    const double total = prefix[m];
    for (std::size_t cut = min_leaf; cut + min_leaf <= m; ++cut) {
      const double lo = data.point(order[cut - 1]).features[f];
      const double hi = data.point(order[cut]).features[f];
      if (lo == hi) continue;
      const double left_sum = prefix[cut];
      const double right_sum = total - left_sum;
      // SSE reduction; the sum-of-squares terms cancel out.
      const double gain = left_sum * left_sum / static_cast<double>(cut) +
                          right_sum * right_sum / static_cast<double>(m - cut) -
                          total * total / static_cast<double>(m);
      if (gain > best.gain) {
        best.found = true;
        best.feature = f;
        best.threshold = lo + (hi - lo) / 2.0;
        best.gain = gain;
      }
    }
  }
  if (best.found && best.gain <= 1e-12) best.found = false;
  return best;
}

}  // namespace detail

/// Greedy recursive variance-reduction tree over the given targets. Stops at
/// max_depth, when a split would create a child smaller than min_leaf_size,
/// or when no split reduces the squared error. Leaf scores come from the
/// Newton formula above, not the target mean. Members of each node keep
/// ascending index order, so leaf-score sums are reproducible bit for bit.
inline Tree fit_regression_tree(const Dataset& data,
                                const std::vector<double>& targets,
                                const GBDTHyper& hyper) {
  if (targets.size() != data.size()) {
    throw std::invalid_argument("fit_regression_tree: targets/data mismatch");
  }
  if (data.size() < static_cast<std::size_t>(hyper.min_leaf_size)) {
    throw std::invalid_argument(
        "fit_regression_tree: fewer points than min_leaf_size");
  }

  Tree tree;
  int next_leaf = 0;

  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});

  // Recursive build; children partitions preserve ascending order.
  auto build = [&](auto&& self, std::vector<std::size_t> indices,
                   int depth) -> int {
    const auto node_index = static_cast<int>(tree.nodes_.size());
    tree.nodes_.emplace_back();

    detail::SplitChoice choice;
    if (depth < hyper.max_depth) {
      choice = detail::best_split(data, targets, indices, hyper.min_leaf_size);
    }
    if (!choice.found) {
      std::vector<double> member_targets;
      member_targets.reserve(indices.size());
      for (std::size_t i : indices) member_targets.push_back(targets[i]);
      Tree::Node& node = tree.nodes_[static_cast<std::size_t>(node_index)];
      node.score = leaf_score(member_targets, hyper.learning_rate);
      node.leaf = next_leaf++;
      return node_index;
    }

    std::vector<std::size_t> left, right;
    for (std::size_t i : indices) {
      (data.point(i).features[choice.feature] < choice.threshold ? left : right)
          .push_back(i);
    }
    const int left_child = self(self, std::move(left), depth + 1);
    const int right_child = self(self, std::move(right), depth + 1);
    Tree::Node& node = tree.nodes_[static_cast<std::size_t>(node_index)];
    node.feature = static_cast<int>(choice.feature);
    node.threshold = choice.threshold;
    node.left = left_child;
    node.right = right_child;
    return node_index;
  };
  build(build, std::move(all), 0);
  tree.num_leaves_ = next_leaf;
  return tree;
}

/// Per-leaf record: member training indices (ascending), the curvature
/// denominator D_nk, and the assigned score s_nk.
struct LeafStats {
  std::vector<std::size_t> members;
  double denominator = 0.0;
  double score = 0.0;
};

/// Everything a gray-box surrogate needs to predict how the ensemble's score
/// would move under label flips, recorded during the one real training run:
/// leaf memberships and denominators per tree, the residual vectors, the
/// tree topology for routing test points, and the training labels.
struct GBDTProfile {
  std::vector<Tree> trees;
  double sigma = 0.1;
  GBDTHyper hyper;
  std::vector<int> labels;
  std::vector<std::vector<LeafStats>> leaves;       // [tree][leaf]
  std::vector<std::vector<double>> residual_rounds; // [tree][point]
};

/// Gradient boosting: F_0 = 0; each round fits a tree to the loss residuals
/// and adds it to the ensemble. Deterministic.
inline std::pair<GBDTModel, GBDTProfile> train_gbdt(const Dataset& train,
                                                    const GBDTHyper& hyper) {
  if (train.empty()) {
    throw std::invalid_argument("train_gbdt: empty training set");
  }
  if (hyper.num_trees < 1) {
    throw std::invalid_argument("train_gbdt: num_trees must be >= 1");
  }
  if (hyper.max_depth < 0) {
    throw std::invalid_argument("train_gbdt: max_depth must be >= 0");
  }
  if (hyper.learning_rate <= 0.0) {
    throw std::invalid_argument("train_gbdt: learning_rate must be positive");
  }
  if (hyper.min_leaf_size < 1) {
    throw std::invalid_argument("train_gbdt: min_leaf_size must be >= 1");
  }

  const std::size_t n = train.size();
  const double sigma = hyper.learning_rate;
  const std::vector<int> labels = train.labels();

  GBDTModel model;
  GBDTProfile profile;
  profile.sigma = sigma;
  profile.hyper = hyper;
  profile.labels = labels;

  std::vector<double> scores(n, 0.0);
  for (int round = 0; round < hyper.num_trees; ++round) {
    const std::vector<double> ybar = residuals(labels, scores, sigma);
    Tree tree = fit_regression_tree(train, ybar, hyper);

    std::vector<LeafStats> stats(static_cast<std::size_t>(tree.num_leaves()));
    for (std::size_t i = 0; i < n; ++i) {
      const int leaf = tree.leaf_of(train.point(i).features);
      stats[static_cast<std::size_t>(leaf)].members.push_back(i);
    }
    for (std::size_t k = 0; k < stats.size(); ++k) {
      double den = 0.0;
      for (std::size_t i : stats[k].members) {
        den += std::abs(ybar[i]) * (2.0 * sigma - std::abs(ybar[i]));
      }
      stats[k].denominator = den;
      stats[k].score = tree.leaf_score_value(static_cast<int>(k));
    }

    for (std::size_t i = 0; i < n; ++i) {
      scores[i] += tree.score_at(train.point(i).features);
    }

    profile.residual_rounds.push_back(ybar);
    profile.leaves.push_back(std::move(stats));
    profile.trees.push_back(tree);
    model.trees.push_back(std::move(tree));
  }

  return {std::move(model), std::move(profile)};
}

/// Rebuilds the ensemble from a profile (the topology and leaf scores are
/// stored there in full).
inline GBDTModel model_from_profile(const GBDTProfile& profile) {
  return GBDTModel{profile.trees, 0.0};
}

}  // namespace psdebug

#endif  // PSDEBUG_GBDT_HPP
