#ifndef PSDEBUG_SURROGATE_HPP
#define PSDEBUG_SURROGATE_HPP

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "psdebug/dataset.hpp"
#include "psdebug/gbdt.hpp"
#include "psdebug/logreg.hpp"

namespace psdebug {

/// Affine function of the training-label variables whose sign approximates
/// the retrained classifier's decision on one test point:
///
///   margin(Y) = bias + sum_i coeff_i * Y_i,   decision = +1 iff margin >= 0.
///
/// Evaluated at the observed labels the decision equals the actually trained
/// classifier's decision (exact for both builders below). The error
/// predicate phi is "decision != expected_label", where expected_label is the
/// test point's true label.
///
/// Storage is dense for logistic regression (every training point
/// contributes) and sparse for boosted trees (only leaf-mates of the test
/// point have nonzero coefficients).
class LinearSurrogate {
 public:
  static LinearSurrogate dense(std::size_t test_index, int expected_label,
                               double bias, std::vector<double> coeffs) {
    LinearSurrogate s;
    s.test_index_ = test_index;
    s.expected_label_ = expected_label;
    s.bias_ = bias;
    s.num_labels_ = coeffs.size();
    s.dense_ = std::move(coeffs);
    s.sparse_mode_ = false;
    return s;
  }

  static LinearSurrogate sparse(
      std::size_t test_index, int expected_label, double bias,
      std::vector<std::pair<std::size_t, double>> coeffs,
      std::size_t num_labels) {
    LinearSurrogate s;
    s.test_index_ = test_index;
    s.expected_label_ = expected_label;
    s.bias_ = bias;
    s.num_labels_ = num_labels;
    s.sparse_ = std::move(coeffs);
    std::sort(s.sparse_.begin(), s.sparse_.end());
    s.sparse_mode_ = true;
    return s;
  }

  std::size_t test_index() const { return test_index_; }
  int expected_label() const { return expected_label_; }
  double bias() const { return bias_; }
  std::size_t num_labels() const { return num_labels_; }
  bool is_sparse() const { return sparse_mode_; }

  double coeff(std::size_t i) const {
    if (i >= num_labels_) {
      throw std::out_of_range("surrogate: label index out of range");
    }
    if (!sparse_mode_) return dense_[i];
    const auto it = std::lower_bound(
        sparse_.begin(), sparse_.end(), i,
        [](const auto& entry, std::size_t key) { return entry.first < key; });
    return it != sparse_.end() && it->first == i ? it->second : 0.0;
  }

  /// Nonzero entries as (index, coefficient) pairs, ascending by index.
  std::vector<std::pair<std::size_t, double>> nonzero_coeffs() const {
    if (sparse_mode_) return sparse_;
    std::vector<std::pair<std::size_t, double>> out;
    for (std::size_t i = 0; i < dense_.size(); ++i) {
      if (dense_[i] != 0.0) out.emplace_back(i, dense_[i]);
    }
    return out;
  }

  double margin(const std::vector<int>& world) const {
    if (world.size() != num_labels_) {
      throw std::invalid_argument("surrogate: world length mismatch");
    }
    double m = bias_;
    if (sparse_mode_) {
      for (const auto& [i, w] : sparse_) m += w * world[i];
    } else {
      for (std::size_t i = 0; i < dense_.size(); ++i) m += dense_[i] * world[i];
    }
    return m;
  }

  static int decision_from_margin(double margin) {
    return margin >= 0.0 ? 1 : -1;  // tie at exactly 0 classifies +1
  }

  int decision(const std::vector<int>& world) const {
    return decision_from_margin(margin(world));
  }

  /// phi for this test point: the (surrogate) classifier gets it wrong.
  bool misclassified_at(double margin) const {
    return decision_from_margin(margin) != expected_label_;
  }

 private:
  std::size_t test_index_ = 0;
  int expected_label_ = 1;
  double bias_ = 0.0;
  std::size_t num_labels_ = 0;
  std::vector<double> dense_;
  std::vector<std::pair<std::size_t, double>> sparse_;
  bool sparse_mode_ = false;
};

/// Margin after flipping label i in `world`, in O(1): m - 2 world[i] w_i.
/// Flipping twice restores the original margin.
inline double flip_delta(const LinearSurrogate& s, double margin,
                         std::size_t i, const std::vector<int>& world) {
  if (i >= world.size()) {
    throw std::out_of_range("flip_delta: index out of range");
  }
  return margin - 2.0 * world[i] * s.coeff(i);
}

/// Conjunction predicate phi = phi_1 & ... & phi_k: every surrogate
/// misclassifies its test point in this world.
inline bool predicate_holds(const std::vector<LinearSurrogate>& surrogates,
                            const std::vector<int>& world) {
  if (surrogates.empty()) {
    throw std::invalid_argument("predicate_holds: no surrogates");
  }
  for (const LinearSurrogate& s : surrogates) {
    if (!s.misclassified_at(s.margin(world))) return false;
  }
  return true;
}

/// Margins of a set of surrogates kept in lockstep with one mutable world.
/// flip(i) updates the world and every margin in O(#surrogates).
class MarginState {
 public:
  MarginState(const std::vector<LinearSurrogate>& surrogates,
              std::vector<int>& world)
      : surrogates_(&surrogates), world_(&world) {
    margins_.reserve(surrogates.size());
    for (const LinearSurrogate& s : surrogates) {
      margins_.push_back(s.margin(world));
    }
  }

  void flip(std::size_t i) {
    for (std::size_t s = 0; s < surrogates_->size(); ++s) {
      margins_[s] = flip_delta((*surrogates_)[s], margins_[s], i, *world_);
    }
    (*world_)[i] = -(*world_)[i];
  }

  double margin(std::size_t surrogate_index) const {
    return margins_.at(surrogate_index);
  }

  bool predicate_holds() const {
    for (std::size_t s = 0; s < surrogates_->size(); ++s) {
      if (!(*surrogates_)[s].misclassified_at(margins_[s])) return false;
    }
    return true;
  }

 private:
  const std::vector<LinearSurrogate>* surrogates_;
  std::vector<int>* world_;
  std::vector<double> margins_;
};

/// Gray-box logistic regression surrogate. Substituting the profiled final
/// step into theta.x gives
///
///   margin(Y) = theta_prev.x + alpha * sum_i Y_i g_i (x_i . x)
///
/// so bias = theta_prev.x and coeff_i = alpha * g_i * (x_i . x). At Y = y the
/// margin is exactly the trained model's theta.x (reconstruction identity).
inline LinearSurrogate build_lr_surrogate(const LRProfile& profile,
                                          const Dataset& train,
                                          const std::vector<double>& x,
                                          int expected_label,
                                          std::size_t test_index) {
  if (x.size() != profile.theta_prev.size() || train.dim() != x.size() ||
      train.size() != profile.g.size()) {
    throw std::invalid_argument("build_lr_surrogate: dimension mismatch");
  }
  double bias = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    bias += profile.theta_prev[j] * x[j];
  }
  std::vector<double> coeffs(train.size(), 0.0);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const LabeledPoint& p = train.point(i);
    double dot = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) dot += p.features[j] * x[j];
    coeffs[i] = profile.alpha_last * profile.g[i] * dot;
  }
  return LinearSurrogate::dense(test_index, expected_label, bias,
                                std::move(coeffs));
}

/// Gray-box boosted-trees surrogate. Flipping label i moves every leaf score
/// it belongs to by -2 y_i sigma / D_nk, so for the leaves that contain the
/// test point x:
///
///   coeff_i = sum_n sigma * I(x_i in leaf_n(x)) / D_{n,leaf_n(x)}
///   bias    = s(x) - sum_i y_i coeff_i
///
/// which makes margin(Y) = s(x) + sum_i (Y_i - y_i) coeff_i. Coefficients are
/// nonzero only for training points sharing a leaf with x in some tree.
inline LinearSurrogate build_gbdt_surrogate(const GBDTProfile& profile,
                                            const std::vector<double>& x,
                                            int expected_label,
                                            std::size_t test_index) {
  const std::size_t n = profile.labels.size();
  std::vector<double> acc(n, 0.0);
  std::vector<std::size_t> touched;
  double score_at_x = 0.0;

  for (std::size_t t = 0; t < profile.trees.size(); ++t) {
    const Tree& tree = profile.trees[t];
    const int leaf = tree.leaf_of(x);
    const LeafStats& stats = profile.leaves[t][static_cast<std::size_t>(leaf)];
    score_at_x += stats.score;
    if (stats.denominator < 1e-12) continue;  // degenerate leaf contributes 0
    const double c = profile.sigma / stats.denominator;
    for (std::size_t i : stats.members) {
      if (acc[i] == 0.0) touched.push_back(i);
      acc[i] += c;
    }
  }

  std::sort(touched.begin(), touched.end());
  std::vector<std::pair<std::size_t, double>> coeffs;
  coeffs.reserve(touched.size());
  double correction = 0.0;
  for (std::size_t i : touched) {
    coeffs.emplace_back(i, acc[i]);
    correction += profile.labels[i] * acc[i];
  }
  const double bias = score_at_x - correction;
  return LinearSurrogate::sparse(test_index, expected_label, bias,
                                 std::move(coeffs), n);
}

}  // namespace psdebug

#endif  // PSDEBUG_SURROGATE_HPP
