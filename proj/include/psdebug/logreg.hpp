#ifndef PSDEBUG_LOGREG_HPP
#define PSDEBUG_LOGREG_HPP

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "psdebug/dataset.hpp"

namespace psdebug {

/// Numerically stable logistic function 1/(1+e^-z).
inline double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct LRHyper {
  int iterations = 100;    // K; a penultimate iterate must exist, so K >= 2
  double step_size = 0.1;  // fixed schedule
  double l2_penalty = 0.0;
};

struct LRModel {
  std::vector<double> theta;

  double raw_score(const std::vector<double>& x) const {
    if (x.size() != theta.size()) {
      throw std::invalid_argument("lr: feature dimension mismatch");
    }
    double z = 0.0;
    for (std::size_t j = 0; j < theta.size(); ++j) z += theta[j] * x[j];
    return z;
  }

  // +1 on the boundary: h(z) >= 1/2 <=> z >= 0.
  int classify(const std::vector<double>& x) const {
    return raw_score(x) >= 0.0 ? 1 : -1;
  }
};

/// Quantities recorded during the real training run that make the gray-box
/// surrogate exact at the observed labels: the penultimate iterate, the final
/// step size, and the memoized per-point sigmoid weights
/// g_i = h(-y_i * theta_prev . x_i).
///
/// With an L2 penalty the shrinkage of the last step is folded into
/// theta_prev, so the reconstruction identity
///   theta = theta_prev + alpha_last * sum_i y_i g_i x_i
/// holds exactly in all configurations.
struct LRProfile {
  std::vector<double> theta_prev;
  double alpha_last = 0.0;
  std::vector<double> g;
  std::vector<int> labels;
  LRHyper hyper;
};

/// Log-likelihood sum_i log h(y_i theta.x_i); the objective the trainer
/// ascends (before the optional L2 term).
inline double log_likelihood(const Dataset& train,
                             const std::vector<double>& theta) {
  double total = 0.0;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const LabeledPoint& p = train.point(i);
    double z = 0.0;
    for (std::size_t j = 0; j < theta.size(); ++j) z += theta[j] * p.features[j];
    const double yz = p.label * z;
    // log h(yz) = -log(1+e^-yz), computed without overflow
    total -= yz >= 0.0 ? std::log1p(std::exp(-yz))
                       : -yz + std::log1p(std::exp(yz));
  }
  return total;
}

/// Analytic gradient of the log-likelihood: sum_i y_i x_i h(-y_i z_i).
inline std::vector<double> log_likelihood_gradient(
    const Dataset& train, const std::vector<double>& theta) {
  std::vector<double> grad(theta.size(), 0.0);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const LabeledPoint& p = train.point(i);
    double z = 0.0;
    for (std::size_t j = 0; j < theta.size(); ++j) z += theta[j] * p.features[j];
    const double w = p.label * sigmoid(-p.label * z);
    for (std::size_t j = 0; j < theta.size(); ++j) grad[j] += w * p.features[j];
  }
  return grad;
}

/// Full-batch gradient ascent from theta = 0, K iterations at fixed step
/// size. Deterministic; the profile snapshots the state entering the final
/// iteration.
inline std::pair<LRModel, LRProfile> train_lr(const Dataset& train,
                                              const LRHyper& hyper) {
  if (train.empty()) {
    throw std::invalid_argument("train_lr: empty training set");
  }
  if (hyper.iterations < 2) {
    throw std::invalid_argument("train_lr: iterations must be >= 2");
  }
  if (hyper.step_size <= 0.0) {
    throw std::invalid_argument("train_lr: step_size must be positive");
  }
  if (hyper.l2_penalty < 0.0) {
    throw std::invalid_argument("train_lr: l2_penalty must be >= 0");
  }

  const std::size_t n = train.size();
  const std::size_t dim = train.dim();
  const double alpha = hyper.step_size;
  const double shrink = 1.0 - alpha * hyper.l2_penalty;

  std::vector<double> theta(dim, 0.0);
  LRProfile profile;
  profile.hyper = hyper;
  profile.labels = train.labels();

  std::vector<double> g(n, 0.0);
  for (int k = 0; k < hyper.iterations; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const LabeledPoint& p = train.point(i);
      double z = 0.0;
      for (std::size_t j = 0; j < dim; ++j) z += theta[j] * p.features[j];
      g[i] = sigmoid(-p.label * z);
    }
    if (k == hyper.iterations - 1) {
      profile.theta_prev.resize(dim);
      for (std::size_t j = 0; j < dim; ++j) {
        profile.theta_prev[j] = shrink * theta[j];
      }
      profile.alpha_last = alpha;
      profile.g = g;
    }
    for (std::size_t j = 0; j < dim; ++j) theta[j] *= shrink;
    for (std::size_t i = 0; i < n; ++i) {
      const LabeledPoint& p = train.point(i);
      const double w = alpha * p.label * g[i];
      for (std::size_t j = 0; j < dim; ++j) theta[j] += w * p.features[j];
    }
    for (double t : theta) {
      if (!std::isfinite(t)) {
        throw std::runtime_error("train_lr: diverged at iteration " +
                                 std::to_string(k + 1));
      }
    }
  }

  return {LRModel{std::move(theta)}, std::move(profile)};
}

/// Replays the recorded final step: theta_prev + alpha * sum y_i g_i x_i.
/// Equals the trained model exactly; also how the CLI rebuilds a model from
/// a persisted profile plus the training features.
inline LRModel reconstruct_lr_model(const LRProfile& profile,
                                    const Dataset& train) {
  if (profile.g.size() != train.size() ||
      profile.theta_prev.size() != train.dim()) {
    throw std::invalid_argument("reconstruct_lr_model: profile/dataset mismatch");
  }
  std::vector<double> theta = profile.theta_prev;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const LabeledPoint& p = train.point(i);
    const double w = profile.alpha_last * profile.labels[i] * profile.g[i];
    for (std::size_t j = 0; j < theta.size(); ++j) theta[j] += w * p.features[j];
  }
  return LRModel{std::move(theta)};
}

inline int lr_classify(const LRModel& model, const std::vector<double>& x) {
  return model.classify(x);
}

/// Evaluation score S: the number of misclassified points.
template <typename Model>
std::size_t evaluation_score(const Model& model, const Dataset& test) {
  std::size_t errors = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const LabeledPoint& p = test.point(i);
    if (model.classify(p.features) != p.label) ++errors;
  }
  return errors;
}

}  // namespace psdebug

#endif  // PSDEBUG_LOGREG_HPP
