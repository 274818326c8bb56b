// End-to-end walkthrough: corrupt a synthetic task, train, and rank the
// training labels most likely to have caused the new test errors.

#include <iostream>

#include "psdebug/psdebug.hpp"

int main() {
  using namespace psdebug;

  // A mostly-separated two-Gaussian task, split 40/30/30.
  const Dataset full = gen_2gauss(2500, 4.6, 1);
  const auto parts = split(full, 0.4, 0.3, 2);

  // Train on clean labels, then on labels with 10% random flips.
  LRHyper hyper;
  hyper.iterations = 400;
  hyper.step_size = 0.01;
  const auto [clean_model, clean_profile] = train_lr(parts.train, hyper);
  NoiseSpec noise;
  noise.mode = NoiseMode::random;
  noise.rate = 0.1;
  noise.seed = 3;
  const auto [noisy_train, record] = inject_noise(parts.train, noise);
  const auto [noisy_model, profile] = train_lr(noisy_train, hyper);

  const auto new_errors =
      find_new_misclassifications(clean_model, noisy_model, parts.test);
  std::cout << "noise introduced " << new_errors.size()
            << " new test misclassifications\n";
  if (new_errors.empty()) return 0;

  // Gray-box surrogate for the first new error, then PS per training label.
  const LabeledPoint& bad = parts.test.point(new_errors[0]);
  const auto surrogate = build_lr_surrogate(profile, noisy_train, bad.features,
                                            bad.label, new_errors[0]);
  PriorConfig prior;
  prior.flip_prob = 0.1;
  prior.num_samples = 50000;
  prior.seed = 99;
  const PSReport report =
      estimate_ps({surrogate}, noisy_train.labels(), prior);

  std::cout << "top suspected causes (index, ps, was actually corrupted):\n";
  std::size_t shown = 0;
  for (const PSEstimate& e : report.estimates) {
    if (!e.defined || shown == 10) break;
    std::cout << "  " << e.index << "  " << e.ps << "  "
              << (record.contains(e.index) ? "yes" : "no") << "\n";
    ++shown;
  }
  return 0;
}
