#ifndef PSDEBUG_EVAL_HPP
#define PSDEBUG_EVAL_HPP

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "psdebug/dataset.hpp"
#include "psdebug/gbdt.hpp"
#include "psdebug/logreg.hpp"
#include "psdebug/ps.hpp"
#include "psdebug/surrogate.hpp"

namespace psdebug {

enum class Algo { logistic_regression, gbdt };

inline std::string algo_name(Algo a) {
  return a == Algo::logistic_regression ? "lr" : "gbdt";
}

inline Algo algo_from_name(const std::string& name) {
  if (name == "lr") return Algo::logistic_regression;
  if (name == "gbdt") return Algo::gbdt;
  throw std::invalid_argument("unknown algorithm '" + name + "' (lr|gbdt)");
}

/// A trained classifier of either family plus its profile, so callers can
/// classify and build surrogates without caring which trainer ran.
struct TrainedModel {
  Algo algo = Algo::logistic_regression;
  LRModel lr;
  LRProfile lr_profile;
  GBDTModel boosted;
  GBDTProfile boosted_profile;

  int classify(const std::vector<double>& x) const {
    return algo == Algo::logistic_regression ? lr.classify(x)
                                             : boosted.classify(x);
  }

  LinearSurrogate surrogate_for(const Dataset& train,
                                const std::vector<double>& x,
                                int expected_label,
                                std::size_t test_index) const {
    return algo == Algo::logistic_regression
               ? build_lr_surrogate(lr_profile, train, x, expected_label,
                                    test_index)
               : build_gbdt_surrogate(boosted_profile, x, expected_label,
                                      test_index);
  }
};

inline TrainedModel train_model(const Dataset& train, Algo algo,
                                const LRHyper& lr_hyper,
                                const GBDTHyper& gbdt_hyper) {
  TrainedModel out;
  out.algo = algo;
  if (algo == Algo::logistic_regression) {
    std::tie(out.lr, out.lr_profile) = train_lr(train, lr_hyper);
  } else {
    std::tie(out.boosted, out.boosted_profile) = train_gbdt(train, gbdt_hyper);
  }
  return out;
}

/// Test indices the noisy model gets wrong that the clean model got right.
template <typename ModelA, typename ModelB>
std::vector<std::size_t> find_new_misclassifications(const ModelA& clean_model,
                                                     const ModelB& noisy_model,
                                                     const Dataset& test) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const LabeledPoint& p = test.point(i);
    if (noisy_model.classify(p.features) != p.label &&
        clean_model.classify(p.features) == p.label) {
      out.push_back(i);
    }
  }
  return out;
}

/// Flips the suggested labels and retrains with the real trainer.
inline TrainedModel fix_and_retrain(const Dataset& train_noisy,
                                    const std::vector<std::size_t>& suggestions,
                                    Algo algo, const LRHyper& lr_hyper,
                                    const GBDTHyper& gbdt_hyper) {
  for (std::size_t i : suggestions) {
    if (i >= train_noisy.size()) {
      throw std::out_of_range("fix_and_retrain: suggestion index out of range");
    }
  }
  return train_model(train_noisy.with_flipped(suggestions), algo, lr_hyper,
                     gbdt_hyper);
}

inline double validation_error(const TrainedModel& model, const Dataset& val) {
  if (val.empty()) return 0.0;
  return static_cast<double>(evaluation_score(model, val)) /
         static_cast<double>(val.size());
}

// ---------------------------------------------------------------------------
// Workflow configuration
// ---------------------------------------------------------------------------

struct DatasetSpec {
  enum class Kind { two_gauss, concentric, csv };

  Kind kind = Kind::two_gauss;
  std::size_t n_points = 1250;
  double separation = 6.0;     // 2gauss
  double inner_radius = 1.0;   // concentric
  double outer_radius = 3.0;
  std::uint64_t seed = 0;
  std::string train_csv, test_csv, validation_csv;  // csv kind
};

struct SplitSpec {
  double train_frac = 0.8;
  double test_frac = 0.1;
  std::uint64_t seed = 0;
};

/// How multiple misclassified test points combine into one PS computation:
/// a single conjunction predicate (the default), or per-test runs whose PS
/// values are averaged per label.
enum class MultiTestAggregator { conjunction, average };

struct WorkflowConfig {
  DatasetSpec dataset;
  SplitSpec split;
  Algo algorithm = Algo::logistic_regression;
  LRHyper lr;
  GBDTHyper gbdt;
  NoiseSpec noise;
  PriorConfig prior;
  std::size_t num_tests = 1;  // k misclassifications combined into phi
  MultiTestAggregator aggregator = MultiTestAggregator::conjunction;
  std::optional<double> threshold;    // suggestion set = {ps >= threshold}
  std::optional<std::size_t> top_k;   // suggestion set = top_k by ps
  std::uint64_t min_trials = 30;
  unsigned threads = 1;
  bool include_sweep = false;
  std::vector<std::size_t> multi_test_ks;
};

struct SweepPoint {
  double tau = 0.0;
  std::size_t flips = 0;
  double validation_error = 0.0;
};

struct CurvePoint {
  std::size_t k = 0;
  double precision = 0.0;
};

struct EvalReport {
  bool precision_defined = false;
  double precision = 0.0;
  double recall = 0.0;  // secondary reading of Table-style accuracy
  std::array<double, 3> validation_errors{};  // clean, noisy, fixed
  std::vector<std::size_t> new_misclassifications;
  std::vector<std::size_t> suggested_causes;
  std::size_t injected_flips = 0;
  double runtime_seconds = 0.0;  // reported on stdout, never persisted
  std::vector<SweepPoint> sweep_curve;
  std::vector<CurvePoint> multi_test_curve;
  std::string diagnostic;
};

// ---------------------------------------------------------------------------
// Workflow internals
// ---------------------------------------------------------------------------

/// Everything materialized by one workflow run; the sweep and multi-test
/// curves reuse it instead of retraining from scratch.
struct WorkflowState {
  WorkflowConfig cfg;
  Dataset train, test, validation;
  Dataset noisy_train;
  NoiseRecord noise;
  TrainedModel clean_model, noisy_model;
  std::vector<std::size_t> new_misclassifications;
  std::vector<LinearSurrogate> surrogates;  // first num_tests, by test index
  PSReport ps;
  bool ps_ran = false;
  std::string diagnostic;
};

namespace detail {

inline void build_datasets(const WorkflowConfig& cfg, WorkflowState& state) {
  const DatasetSpec& ds = cfg.dataset;
  switch (ds.kind) {
    case DatasetSpec::Kind::two_gauss: {
      const Dataset full = gen_2gauss(ds.n_points, ds.separation, ds.seed);
      auto parts = split(full, cfg.split.train_frac, cfg.split.test_frac,
                         cfg.split.seed);
      state.train = std::move(parts.train);
      state.test = std::move(parts.test);
      state.validation = std::move(parts.validation);
      break;
    }
    case DatasetSpec::Kind::concentric: {
      const Dataset full =
          gen_concentric(ds.n_points, ds.inner_radius, ds.outer_radius, ds.seed);
      auto parts = split(full, cfg.split.train_frac, cfg.split.test_frac,
                         cfg.split.seed);
      state.train = std::move(parts.train);
      state.test = std::move(parts.test);
      state.validation = std::move(parts.validation);
      break;
    }
    case DatasetSpec::Kind::csv: {
      state.train = load_csv(ds.train_csv);
      state.test = load_csv(ds.test_csv);
      state.validation = load_csv(ds.validation_csv);
      break;
    }
  }
}

inline std::vector<LinearSurrogate> surrogates_for_tests(
    const WorkflowState& state, std::size_t count) {
  std::vector<LinearSurrogate> out;
  out.reserve(count);
  for (std::size_t j = 0; j < count; ++j) {
    const std::size_t t = state.new_misclassifications[j];
    const LabeledPoint& p = state.test.point(t);
    out.push_back(state.noisy_model.surrogate_for(state.noisy_train, p.features,
                                                  p.label, t));
  }
  return out;
}

inline PSReport run_estimator(const WorkflowConfig& cfg,
                              const std::vector<LinearSurrogate>& surrogates,
                              const std::vector<int>& labels) {
  return cfg.aggregator == MultiTestAggregator::average && surrogates.size() > 1
             ? estimate_ps_averaged(surrogates, labels, cfg.prior, cfg.threads,
                                    cfg.min_trials)
             : estimate_ps(surrogates, labels, cfg.prior, cfg.threads,
                           cfg.min_trials);
}

inline std::vector<std::size_t> suggest_causes(const WorkflowConfig& cfg,
                                               const PSReport& ps,
                                               std::size_t injected) {
  if (cfg.top_k) return rank_and_threshold(ps, 0.0, *cfg.top_k);
  if (cfg.threshold) return rank_and_threshold(ps, *cfg.threshold);
  // Default: precision@|injected| against the known noise size.
  return rank_and_threshold(ps, 0.0, injected);
}

inline std::pair<double, double> precision_recall(
    const std::vector<std::size_t>& suggested, const NoiseRecord& noise) {
  if (suggested.empty()) return {0.0, 0.0};
  std::size_t hits = 0;
  for (std::size_t i : suggested) {
    if (noise.contains(i)) ++hits;
  }
  const double precision =
      static_cast<double>(hits) / static_cast<double>(suggested.size());
  const double recall =
      noise.count() == 0
          ? 0.0
          : static_cast<double>(hits) / static_cast<double>(noise.count());
  return {precision, recall};
}

}  // namespace detail

/// Steps 1-6 of the workflow: split, train clean, corrupt, train noisy,
/// detect new misclassifications, build surrogates, estimate PS.
inline WorkflowState prepare_workflow(const WorkflowConfig& cfg) {
  if (cfg.num_tests < 1) {
    throw std::invalid_argument("workflow: num_tests must be >= 1");
  }
  WorkflowState state;
  state.cfg = cfg;
  detail::build_datasets(cfg, state);

  state.clean_model = train_model(state.train, cfg.algorithm, cfg.lr, cfg.gbdt);
  auto [noisy, record] = inject_noise(state.train, cfg.noise);
  state.noisy_train = std::move(noisy);
  state.noise = std::move(record);
  state.noisy_model =
      train_model(state.noisy_train, cfg.algorithm, cfg.lr, cfg.gbdt);

  state.new_misclassifications = find_new_misclassifications(
      state.clean_model, state.noisy_model, state.test);
  if (state.new_misclassifications.empty()) {
    state.diagnostic =
        "no new misclassifications: the injected noise did not change any "
        "test outcome, so there is nothing to root-cause";
    return state;
  }

  const std::size_t k =
      std::min(cfg.num_tests, state.new_misclassifications.size());
  if (k < cfg.num_tests) {
    state.diagnostic = "only " + std::to_string(k) +
                       " new misclassifications available (requested " +
                       std::to_string(cfg.num_tests) + ")";
  }
  state.surrogates = detail::surrogates_for_tests(state, k);
  state.ps =
      detail::run_estimator(cfg, state.surrogates, state.noisy_train.labels());
  state.ps_ran = true;
  if (state.ps.accepted_worlds == 0) {
    state.diagnostic =
        "zero accepted worlds: every sampled world already exhibits the "
        "error, so all PS estimates are undefined";
  }
  return state;
}

/// Sorts labels by ps descending and flips prefixes of increasing size, one
/// per distinct ps level, retraining each time. The leading entry is the
/// untouched noisy model.
inline std::vector<SweepPoint> threshold_sweep(const WorkflowState& state) {
  if (!state.ps_ran) {
    throw std::logic_error("threshold_sweep: workflow has no PS report");
  }
  const WorkflowConfig& cfg = state.cfg;
  std::vector<SweepPoint> curve;
  const TrainedModel noisy = state.noisy_model;
  curve.push_back(
      {1.0, 0, validation_error(noisy, state.validation)});

  std::vector<std::size_t> prefix;
  std::size_t pos = 0;
  const auto& estimates = state.ps.estimates;  // already ranked
  while (pos < estimates.size()) {
    if (!estimates[pos].defined) break;
    const double level = estimates[pos].ps;
    while (pos < estimates.size() && estimates[pos].defined &&
           estimates[pos].ps == level) {
      prefix.push_back(estimates[pos].index);
      ++pos;
    }
    const TrainedModel fixed =
        fix_and_retrain(state.noisy_train, prefix, cfg.algorithm, cfg.lr,
                        cfg.gbdt);
    curve.push_back(
        {level, prefix.size(), validation_error(fixed, state.validation)});
  }
  return curve;
}

/// Precision as a function of the number of misclassified test points
/// combined into the conjunction predicate. k values beyond the available
/// misclassifications are dropped.
inline std::vector<CurvePoint> multi_test_curve(
    const WorkflowState& state, const std::vector<std::size_t>& k_values) {
  if (!state.ps_ran) {
    throw std::logic_error("multi_test_curve: workflow has no PS report");
  }
  const WorkflowConfig& cfg = state.cfg;
  std::vector<CurvePoint> curve;
  for (std::size_t k : k_values) {
    if (k < 1 || k > state.new_misclassifications.size()) continue;
    const auto surrogates = detail::surrogates_for_tests(state, k);
    const PSReport ps =
        detail::run_estimator(cfg, surrogates, state.noisy_train.labels());
    const auto suggested = detail::suggest_causes(cfg, ps, state.noise.count());
    if (suggested.empty()) continue;
    curve.push_back({k, detail::precision_recall(suggested, state.noise).first});
  }
  return curve;
}

inline std::vector<SweepPoint> threshold_sweep(const WorkflowConfig& cfg) {
  return threshold_sweep(prepare_workflow(cfg));
}

inline std::vector<CurvePoint> multi_test_curve(
    const WorkflowConfig& cfg, const std::vector<std::size_t>& k_values) {
  return multi_test_curve(prepare_workflow(cfg), k_values);
}

/// The full experimental loop: corrupt, detect, debug, fix, retrain, and
/// measure precision plus the clean/noisy/fixed validation-error triple.
inline EvalReport run_workflow_from_state(WorkflowState& state) {
  const auto started = std::chrono::steady_clock::now();
  const WorkflowConfig& cfg = state.cfg;
  EvalReport report;
  report.new_misclassifications = state.new_misclassifications;
  report.injected_flips = state.noise.count();
  report.diagnostic = state.diagnostic;

  const double clean_err = validation_error(state.clean_model, state.validation);
  const double noisy_err = validation_error(state.noisy_model, state.validation);

  if (!state.ps_ran || state.ps.accepted_worlds == 0) {
    report.validation_errors = {clean_err, noisy_err, noisy_err};
    report.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
            .count();
    return report;
  }

  report.suggested_causes =
      detail::suggest_causes(cfg, state.ps, state.noise.count());
  if (!report.suggested_causes.empty()) {
    std::tie(report.precision, report.recall) =
        detail::precision_recall(report.suggested_causes, state.noise);
    report.precision_defined = true;
  } else if (report.diagnostic.empty()) {
    report.diagnostic = "no suggested causes above the selection rule";
  }

  const TrainedModel fixed =
      fix_and_retrain(state.noisy_train, report.suggested_causes,
                      cfg.algorithm, cfg.lr, cfg.gbdt);
  report.validation_errors = {clean_err, noisy_err,
                              validation_error(fixed, state.validation)};

  if (cfg.include_sweep) report.sweep_curve = threshold_sweep(state);
  if (!cfg.multi_test_ks.empty()) {
    report.multi_test_curve = multi_test_curve(state, cfg.multi_test_ks);
    if (report.multi_test_curve.size() < cfg.multi_test_ks.size()) {
      if (!report.diagnostic.empty()) report.diagnostic += "; ";
      report.diagnostic +=
          "multi-test curve truncated: only " +
          std::to_string(state.new_misclassifications.size()) +
          " new misclassifications available";
    }
  }

  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();
  return report;
}

inline EvalReport run_workflow(const WorkflowConfig& cfg) {
  const auto started = std::chrono::steady_clock::now();
  WorkflowState state = prepare_workflow(cfg);
  EvalReport report = run_workflow_from_state(state);
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();
  return report;
}

}  // namespace psdebug

#endif  // PSDEBUG_EVAL_HPP
