#ifndef PSDEBUG_PSDEBUG_HPP
#define PSDEBUG_PSDEBUG_HPP

// Umbrella header: root-causing mislabeled training points by scoring each
// label's probability of sufficiency for observed test misclassifications,
// using gray-box surrogates of logistic regression and boosted trees.

#include "psdebug/dataset.hpp"
#include "psdebug/eval.hpp"
#include "psdebug/gbdt.hpp"
#include "psdebug/io.hpp"
#include "psdebug/logreg.hpp"
#include "psdebug/ps.hpp"
#include "psdebug/rng.hpp"
#include "psdebug/surrogate.hpp"

#endif  // PSDEBUG_PSDEBUG_HPP
