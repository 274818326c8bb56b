#ifndef PSDEBUG_PS_HPP
#define PSDEBUG_PS_HPP

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "psdebug/rng.hpp"
#include "psdebug/surrogate.hpp"

namespace psdebug {

/// Prior over counterfactual worlds: each label independently keeps its
/// observed value with probability 1 - flip_prob. flip_prob < 0.5 keeps the
/// prior biased toward the observed labels; 0.5 (the uniform prior) is
/// accepted as the limiting case.
struct PriorConfig {
  double flip_prob = 0.1;
  std::uint64_t seed = 0;
  std::size_t num_samples = 100000;
};

inline void validate(const PriorConfig& prior) {
  if (!(prior.flip_prob > 0.0) || !(prior.flip_prob <= 0.5)) {
    throw std::invalid_argument("prior: flip_prob must be in (0, 0.5]");
  }
  if (prior.num_samples == 0) {
    throw std::invalid_argument("prior: num_samples must be positive");
  }
}

/// A complete assignment of labels to all training points.
struct World {
  std::vector<int> labels;
};

struct PSEstimate {
  std::size_t index = 0;
  std::uint64_t trials = 0;     // worlds with Y_i != y_i passing observe(!phi)
  std::uint64_t successes = 0;  // trials where restoring y_i makes phi hold
  double ps = 0.0;
  bool defined = false;         // trials > 0
  bool low_confidence = true;   // trials < min_trials
};

struct PSReport {
  std::vector<PSEstimate> estimates;  // sorted: ps descending, index ascending
  double threshold = 0.0;
  std::uint64_t accepted_worlds = 0;
  std::uint64_t rejected_worlds = 0;
  // metadata
  std::uint64_t seed = 0;
  std::size_t num_samples = 0;
  double flip_prob = 0.0;
  std::uint64_t min_trials = 0;
  std::string predicate;

  /// Estimate for a given training index (the list is sorted by score).
  const PSEstimate& at_index(std::size_t index) const {
    for (const PSEstimate& e : estimates) {
      if (e.index == index) return e;
    }
    throw std::out_of_range("ps report: no estimate for index " +
                            std::to_string(index));
  }
};

namespace detail {

// Indices where the sampled world differs from the observed labels,
// ascending. Depends only on (seed, stream), never on thread layout.
inline std::vector<std::size_t> sample_flip_set(double flip_prob,
                                                std::uint64_t seed,
                                                std::uint64_t stream,
                                                std::size_t n) {
  RandomStream rng(seed, stream);
  std::vector<std::size_t> flips;
  for (std::size_t i = 0; i < n; ++i) {
    if (rng.uniform() < flip_prob) flips.push_back(i);
  }
  return flips;
}

inline std::string describe_predicate(
    const std::vector<LinearSurrogate>& surrogates) {
  std::string out;
  for (const LinearSurrogate& s : surrogates) {
    if (!out.empty()) out += " & ";
    out += "misclassified[test=" + std::to_string(s.test_index()) + "]";
  }
  return out;
}

inline PSReport finalize_report(std::vector<PSEstimate> estimates,
                                std::uint64_t min_trials) {
  for (PSEstimate& e : estimates) {
    e.defined = e.trials > 0;
    e.ps = e.defined
               ? static_cast<double>(e.successes) / static_cast<double>(e.trials)
               : 0.0;
    e.low_confidence = e.trials < min_trials;
  }
  std::sort(estimates.begin(), estimates.end(),
            [](const PSEstimate& a, const PSEstimate& b) {
              return a.ps != b.ps ? a.ps > b.ps : a.index < b.index;
            });
  PSReport report;
  report.estimates = std::move(estimates);
  report.min_trials = min_trials;
  return report;
}

}  // namespace detail

/// One world from the prior: Y_i = y_i with probability 1 - flip_prob, else
/// -y_i. Deterministic in (prior.seed, stream).
inline World sample_world(const PriorConfig& prior,
                          const std::vector<int>& observed_labels,
                          std::uint64_t stream) {
  World w{observed_labels};
  for (std::size_t i : detail::sample_flip_set(prior.flip_prob, prior.seed,
                                               stream, observed_labels.size())) {
    w.labels[i] = -w.labels[i];
  }
  return w;
}

/// Rejection sampler with sample reuse: every sampled world is shared across
/// all labels. Per world, worlds where the error already holds are rejected
/// (observe(!phi)); in the remaining worlds each flipped label is restored in
/// turn (the intervention Y_i := y_i) and counted as a success when the
/// intervention recreates the error.
///
/// Margins are accumulated per world from the precomputed observed-labels
/// base, so results are bitwise identical for any thread count.
inline PSReport estimate_ps(const std::vector<LinearSurrogate>& surrogates,
                            const std::vector<int>& observed_labels,
                            const PriorConfig& prior, unsigned threads = 1,
                            std::uint64_t min_trials = 30) {
  if (surrogates.empty()) {
    throw std::invalid_argument("estimate_ps: need at least one surrogate");
  }
  const std::size_t n = observed_labels.size();
  if (n == 0) {
    throw std::invalid_argument("estimate_ps: empty label vector");
  }
  validate(prior);
  for (const LinearSurrogate& s : surrogates) {
    if (s.num_labels() != n) {
      throw std::invalid_argument("estimate_ps: surrogate/world size mismatch");
    }
  }

  const std::size_t k = surrogates.size();
  std::vector<double> base_margins(k);
  for (std::size_t s = 0; s < k; ++s) {
    base_margins[s] = surrogates[s].margin(observed_labels);
  }

  struct Partial {
    std::vector<std::uint64_t> trials, successes;
    std::uint64_t accepted = 0, rejected = 0;
  };

  const std::size_t m = prior.num_samples;
  const unsigned t_count = std::max(1u, threads);
  std::vector<Partial> partials(t_count);

  auto worker = [&](unsigned t) {
    Partial& part = partials[t];
    part.trials.assign(n, 0);
    part.successes.assign(n, 0);
    std::vector<double> margins(k);
    for (std::size_t world = t; world < m; world += t_count) {
      const auto flips = detail::sample_flip_set(prior.flip_prob, prior.seed,
                                                 world, n);
      margins = base_margins;
      for (std::size_t i : flips) {
        const double delta = -2.0 * observed_labels[i];
        for (std::size_t s = 0; s < k; ++s) {
          margins[s] += delta * surrogates[s].coeff(i);
        }
      }
      bool phi = true;
      for (std::size_t s = 0; s < k; ++s) {
        if (!surrogates[s].misclassified_at(margins[s])) {
          phi = false;
          break;
        }
      }
      if (phi) {
        ++part.rejected;
        continue;
      }
      ++part.accepted;
      for (std::size_t i : flips) {
        ++part.trials[i];
        const double delta = 2.0 * observed_labels[i];
        bool phi_after = true;
        for (std::size_t s = 0; s < k; ++s) {
          if (!surrogates[s].misclassified_at(margins[s] +
                                              delta * surrogates[s].coeff(i))) {
            phi_after = false;
            break;
          }
        }
        if (phi_after) ++part.successes[i];
      }
    }
  };

  if (t_count == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(t_count);
    for (unsigned t = 0; t < t_count; ++t) pool.emplace_back(worker, t);
    for (std::thread& th : pool) th.join();
  }

  std::vector<PSEstimate> estimates(n);
  for (std::size_t i = 0; i < n; ++i) estimates[i].index = i;
  std::uint64_t accepted = 0, rejected = 0;
  for (const Partial& part : partials) {
    accepted += part.accepted;
    rejected += part.rejected;
    for (std::size_t i = 0; i < n; ++i) {
      estimates[i].trials += part.trials[i];
      estimates[i].successes += part.successes[i];
    }
  }

  PSReport report = detail::finalize_report(std::move(estimates), min_trials);
  report.accepted_worlds = accepted;
  report.rejected_worlds = rejected;
  report.seed = prior.seed;
  report.num_samples = m;
  report.flip_prob = prior.flip_prob;
  report.predicate = detail::describe_predicate(surrogates);
  return report;
}

/// Alternative multi-test aggregator: instead of conditioning on the
/// conjunction of all misclassification predicates, run the sampler once per
/// test point and average each label's defined PS values. Not the default;
/// the conjunction form is the primary semantics. trials/successes are
/// summed across runs for diagnostics, so ps != successes/trials here.
inline PSReport estimate_ps_averaged(
    const std::vector<LinearSurrogate>& surrogates,
    const std::vector<int>& observed_labels, const PriorConfig& prior,
    unsigned threads = 1, std::uint64_t min_trials = 30) {
  if (surrogates.empty()) {
    throw std::invalid_argument("estimate_ps_averaged: need a surrogate");
  }
  const std::size_t n = observed_labels.size();
  std::vector<PSEstimate> merged(n);
  std::vector<std::size_t> defined_count(n, 0);
  std::vector<double> ps_sum(n, 0.0);
  std::uint64_t accepted = 0, rejected = 0;
  for (std::size_t i = 0; i < n; ++i) merged[i].index = i;

  for (const LinearSurrogate& s : surrogates) {
    const PSReport single =
        estimate_ps({s}, observed_labels, prior, threads, min_trials);
    accepted += single.accepted_worlds;
    rejected += single.rejected_worlds;
    for (const PSEstimate& e : single.estimates) {
      merged[e.index].trials += e.trials;
      merged[e.index].successes += e.successes;
      if (e.defined) {
        ps_sum[e.index] += e.ps;
        ++defined_count[e.index];
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    merged[i].defined = defined_count[i] > 0;
    merged[i].ps = merged[i].defined
                       ? ps_sum[i] / static_cast<double>(defined_count[i])
                       : 0.0;
    merged[i].low_confidence = merged[i].trials < min_trials;
  }
  std::sort(merged.begin(), merged.end(),
            [](const PSEstimate& a, const PSEstimate& b) {
              return a.ps != b.ps ? a.ps > b.ps : a.index < b.index;
            });
  PSReport report;
  report.estimates = std::move(merged);
  report.accepted_worlds = accepted;
  report.rejected_worlds = rejected;
  report.seed = prior.seed;
  report.num_samples = prior.num_samples;
  report.flip_prob = prior.flip_prob;
  report.min_trials = min_trials;
  report.predicate = "avg(" + detail::describe_predicate(surrogates) + ")";
  return report;
}

/// Naive per-label sampler: for each label, draw num_samples fresh worlds,
/// observe Y_i != y_i, observe !phi, intervene, return phi. Quadratically
/// more work than estimate_ps; kept as an executable statement of the
/// unoptimized program for equivalence testing.
inline PSReport naive_estimate_ps(const std::vector<LinearSurrogate>& surrogates,
                                  const std::vector<int>& observed_labels,
                                  const PriorConfig& prior,
                                  std::uint64_t min_trials = 30) {
  if (surrogates.empty()) {
    throw std::invalid_argument("naive_estimate_ps: need at least one surrogate");
  }
  validate(prior);
  const std::size_t n = observed_labels.size();
  const std::size_t k = surrogates.size();
  std::vector<double> base_margins(k);
  for (std::size_t s = 0; s < k; ++s) {
    base_margins[s] = surrogates[s].margin(observed_labels);
  }

  std::vector<PSEstimate> estimates(n);
  std::vector<double> margins(k);
  for (std::size_t label = 0; label < n; ++label) {
    PSEstimate& est = estimates[label];
    est.index = label;
    for (std::size_t sample = 0; sample < prior.num_samples; ++sample) {
      // Streams disjoint from estimate_ps's (world-indexed) streams.
      const std::uint64_t stream = (label + 1) * 0x100000000ull + sample;
      const auto flips = detail::sample_flip_set(prior.flip_prob, prior.seed,
                                                 stream, n);
      if (!std::binary_search(flips.begin(), flips.end(), label)) {
        continue;  // observe(Y_i != y_i) failed
      }
      margins = base_margins;
      for (std::size_t i : flips) {
        const double delta = -2.0 * observed_labels[i];
        for (std::size_t s = 0; s < k; ++s) {
          margins[s] += delta * surrogates[s].coeff(i);
        }
      }
      bool phi = true;
      for (std::size_t s = 0; s < k; ++s) {
        if (!surrogates[s].misclassified_at(margins[s])) {
          phi = false;
          break;
        }
      }
      if (phi) continue;  // observe(!phi) failed
      ++est.trials;
      const double delta = 2.0 * observed_labels[label];
      bool phi_after = true;
      for (std::size_t s = 0; s < k; ++s) {
        if (!surrogates[s].misclassified_at(margins[s] +
                                            delta * surrogates[s].coeff(label))) {
          phi_after = false;
          break;
        }
      }
      if (phi_after) ++est.successes;
    }
  }

  PSReport report = detail::finalize_report(std::move(estimates), min_trials);
  report.accepted_worlds = 0;
  report.rejected_worlds = 0;
  report.seed = prior.seed;
  report.num_samples = prior.num_samples;
  report.flip_prob = prior.flip_prob;
  report.predicate = detail::describe_predicate(surrogates);
  return report;
}

/// Exact PS by enumerating all 2^N worlds, weighted by the prior
/// p(w) = eps^flips (1-eps)^(N-flips). The brute-force oracle for the
/// sampling engine; refuses N > 20.
///
/// trials/successes count contributing worlds (every world has positive
/// prior weight); ps is the probability-weighted ratio, which coincides with
/// the count ratio at eps = 0.5.
inline PSReport exact_ps(const std::vector<LinearSurrogate>& surrogates,
                         const std::vector<int>& observed_labels,
                         double flip_prob) {
  if (surrogates.empty()) {
    throw std::invalid_argument("exact_ps: need at least one surrogate");
  }
  const std::size_t n = observed_labels.size();
  if (n == 0 || n > 20) {
    throw std::invalid_argument("exact_ps: requires 1 <= N <= 20");
  }
  if (!(flip_prob > 0.0) || !(flip_prob <= 0.5)) {
    throw std::invalid_argument("exact_ps: flip_prob must be in (0, 0.5]");
  }
  const std::size_t k = surrogates.size();

  std::vector<double> base_margins(k);
  for (std::size_t s = 0; s < k; ++s) {
    base_margins[s] = surrogates[s].margin(observed_labels);
  }

  // weight[f] = eps^f (1-eps)^(n-f)
  std::vector<double> weight(n + 1);
  for (std::size_t f = 0; f <= n; ++f) {
    double w = 1.0;
    for (std::size_t i = 0; i < f; ++i) w *= flip_prob;
    for (std::size_t i = f; i < n; ++i) w *= 1.0 - flip_prob;
    weight[f] = w;
  }

  std::vector<PSEstimate> estimates(n);
  std::vector<double> numerators(n, 0.0), denominators(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) estimates[i].index = i;

  std::vector<double> margins(k);
  const std::uint64_t worlds = 1ull << n;
  for (std::uint64_t mask = 0; mask < worlds; ++mask) {
    margins = base_margins;
    int flip_count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(mask & (1ull << i))) continue;
      ++flip_count;
      const double delta = -2.0 * observed_labels[i];
      for (std::size_t s = 0; s < k; ++s) {
        margins[s] += delta * surrogates[s].coeff(i);
      }
    }
    bool phi = true;
    for (std::size_t s = 0; s < k; ++s) {
      if (!surrogates[s].misclassified_at(margins[s])) {
        phi = false;
        break;
      }
    }
    if (phi) continue;  // conditioning: only worlds without the error count
    const double p = weight[static_cast<std::size_t>(flip_count)];
    for (std::size_t i = 0; i < n; ++i) {
      if (!(mask & (1ull << i))) continue;
      ++estimates[i].trials;
      denominators[i] += p;
      const double delta = 2.0 * observed_labels[i];
      bool phi_after = true;
      for (std::size_t s = 0; s < k; ++s) {
        if (!surrogates[s].misclassified_at(margins[s] +
                                            delta * surrogates[s].coeff(i))) {
          phi_after = false;
          break;
        }
      }
      if (phi_after) {
        ++estimates[i].successes;
        numerators[i] += p;
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    estimates[i].defined = estimates[i].trials > 0;
    estimates[i].ps =
        estimates[i].defined ? numerators[i] / denominators[i] : 0.0;
    estimates[i].low_confidence = false;  // exact values carry no noise
  }
  std::sort(estimates.begin(), estimates.end(),
            [](const PSEstimate& a, const PSEstimate& b) {
              return a.ps != b.ps ? a.ps > b.ps : a.index < b.index;
            });

  PSReport report;
  report.estimates = std::move(estimates);
  report.num_samples = 0;
  report.flip_prob = flip_prob;
  report.predicate = detail::describe_predicate(surrogates);
  return report;
}

/// Proposed causes: defined estimates with ps >= tau, ordered by
/// (ps descending, index ascending), optionally truncated to top_k.
inline std::vector<std::size_t> rank_and_threshold(
    const PSReport& report, double tau,
    std::optional<std::size_t> top_k = std::nullopt) {
  if (tau < 0.0 || tau > 1.0) {
    throw std::invalid_argument("rank_and_threshold: tau must be in [0, 1]");
  }
  std::vector<std::size_t> out;
  for (const PSEstimate& e : report.estimates) {
    if (!e.defined || e.ps < tau) continue;
    out.push_back(e.index);
    if (top_k && out.size() >= *top_k) break;
  }
  return out;
}

}  // namespace psdebug

#endif  // PSDEBUG_PS_HPP
