#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "psdebug/dataset.hpp"
#include "psdebug/gbdt.hpp"
#include "psdebug/rng.hpp"

using namespace psdebug;

TEST_CASE("residuals follow the loss gradient") {
  const std::vector<int> labels{1, -1, 1};
  const double sigma = 0.1;

  SECTION("zero scores halve the raw pull") {
    const auto r = residuals(labels, {0.0, 0.0, 0.0}, sigma);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      CHECK(r[i] == Catch::Approx(labels[i] * sigma).margin(1e-15));
    }
  }

  SECTION("well-classified points have vanishing residuals") {
    const auto r = residuals({1}, {400.0}, sigma);
    CHECK(std::abs(r[0]) < 1e-12);
  }

  SECTION("residual equals -dL/dF by central differences") {
    const double h = 1e-6;
    for (int y : {-1, 1}) {
      for (double f : {-1.0, 0.0, 1.0}) {
        const auto r = residuals({y}, {f}, sigma);
        const double fd = -(boost_loss({y}, {f + h}, sigma) -
                            boost_loss({y}, {f - h}, sigma)) /
                          (2.0 * h);
        CHECK(r[0] == Catch::Approx(fd).margin(1e-6));
      }
    }
  }

  SECTION("magnitude bound |ybar| < 2 sigma") {
    RandomStream rng(3);
    for (int i = 0; i < 200; ++i) {
      const int y = rng.uniform() < 0.5 ? -1 : 1;
      const double f = 10.0 * rng.normal();
      const auto r = residuals({y}, {f}, sigma);
      CHECK(std::abs(r[0]) < 2.0 * sigma);
    }
  }
}

TEST_CASE("leaf_score is the per-leaf Newton step") {
  const double sigma = 0.1;
  // Single member at F=0, y=+1: ybar = sigma, score = 1/sigma.
  CHECK(leaf_score({sigma}, sigma) == Catch::Approx(1.0 / sigma).margin(1e-12));
  CHECK(leaf_score({0.0, 0.0}, sigma) == 0.0);

  // Negating all member labels negates the score.
  const std::vector<int> labels{1, 1, -1};
  const std::vector<int> negated{-1, -1, 1};
  const std::vector<double> scores{0.3, -0.2, 0.1};
  std::vector<double> flipped_scores{-0.3, 0.2, -0.1};
  const auto r = residuals(labels, scores, sigma);
  const auto rn = residuals(negated, flipped_scores, sigma);
  CHECK(leaf_score(rn, sigma) == Catch::Approx(-leaf_score(r, sigma)).margin(1e-12));

  CHECK_THROWS_AS(leaf_score({}, sigma), std::invalid_argument);
}

TEST_CASE("regression tree splitting") {
  GBDTHyper hyper;
  hyper.max_depth = 1;
  hyper.min_leaf_size = 1;

  SECTION("constant targets give a single leaf") {
    Dataset ds(1);
    for (int i = 0; i < 6; ++i) {
      ds.add(LabeledPoint{{static_cast<double>(i)}, 1});
    }
    const Tree tree = fit_regression_tree(ds, {2.0, 2.0, 2.0, 2.0, 2.0, 2.0},
                                          hyper);
    CHECK(tree.num_leaves() == 1);
  }

  SECTION("step targets split between the levels") {
    Dataset ds(1);
    for (int i = 0; i < 4; ++i) {
      ds.add(LabeledPoint{{static_cast<double>(i)}, 1});
    }
    const Tree tree = fit_regression_tree(ds, {-1.0, -1.0, 1.0, 1.0}, hyper);
    REQUIRE(tree.num_leaves() == 2);
    const auto& root = tree.nodes()[0];
    CHECK(root.feature == 0);
    CHECK(root.threshold > 1.0);
    CHECK(root.threshold < 2.0);

    // Exhaustively scoring every candidate cut confirms the choice.
    const std::vector<double> targets{-1.0, -1.0, 1.0, 1.0};
    double best_sse = 1e18;
    double best_threshold = 0.0;
    for (std::size_t cut = 1; cut < 4; ++cut) {
      double left = 0, right = 0, nl = 0, nr = 0;
      for (std::size_t i = 0; i < 4; ++i) {
        (i < cut ? left : right) += targets[i];
        (i < cut ? nl : nr) += 1;
      }
      double sse = 0;
      for (std::size_t i = 0; i < 4; ++i) {
        const double mean = i < cut ? left / nl : right / nr;
        sse += (targets[i] - mean) * (targets[i] - mean);
      }
      if (sse < best_sse) {
        best_sse = sse;
        best_threshold = (static_cast<double>(cut - 1) + cut) / 2.0;
      }
    }
    CHECK(root.threshold == Catch::Approx(best_threshold));
  }

  SECTION("depth 0 keeps everything in the root leaf") {
    Dataset ds(1);
    ds.add(LabeledPoint{{0.0}, 1});
    ds.add(LabeledPoint{{1.0}, -1});
    hyper.max_depth = 0;
    const Tree tree = fit_regression_tree(ds, {0.5, -0.5}, hyper);
    CHECK(tree.num_leaves() == 1);
    CHECK(tree.leaf_of({123.0}) == 0);
  }

  SECTION("min_leaf_size blocks unbalanced splits") {
    Dataset ds(1);
    for (int i = 0; i < 6; ++i) {
      ds.add(LabeledPoint{{static_cast<double>(i)}, 1});
    }
    hyper.max_depth = 3;
    hyper.min_leaf_size = 3;
    const Tree tree =
        fit_regression_tree(ds, {-1, -1, -1, 1, 1, 1}, hyper);
    CHECK(tree.num_leaves() == 2);  // only the 3|3 cut is legal
  }
}

TEST_CASE("train_gbdt on a single root leaf") {
  Dataset ds(1);
  ds.add(LabeledPoint{{0.0}, 1});
  ds.add(LabeledPoint{{1.0}, 1});
  GBDTHyper hyper;
  hyper.num_trees = 1;
  hyper.max_depth = 0;
  hyper.min_leaf_size = 1;
  const auto [model, profile] = train_gbdt(ds, hyper);
  const double root_score = model.trees[0].leaf_score_value(0);
  CHECK(model.score({-5.0}) == root_score);
  CHECK(model.score({42.0}) == root_score);
}

TEST_CASE("train_gbdt fits 2gauss and profiles consistently") {
  const Dataset train = gen_2gauss(200, 6.0, 11);
  const auto [model, profile] = train_gbdt(train, GBDTHyper{});

  const double train_error =
      static_cast<double>(evaluation_score(model, train)) /
      static_cast<double>(train.size());
  CHECK(train_error <= 0.05);

  // Leaf memberships partition the training indices, per tree.
  for (std::size_t t = 0; t < profile.trees.size(); ++t) {
    std::set<std::size_t> seen;
    for (const LeafStats& leaf : profile.leaves[t]) {
      for (std::size_t i : leaf.members) {
        CHECK(seen.insert(i).second);
      }
    }
    CHECK(seen.size() == train.size());
  }

  // Recomputing each leaf score from stored members and residuals
  // reproduces the tree's scores exactly.
  for (std::size_t t = 0; t < profile.trees.size(); ++t) {
    for (std::size_t k = 0; k < profile.leaves[t].size(); ++k) {
      const LeafStats& leaf = profile.leaves[t][k];
      std::vector<double> member_residuals;
      for (std::size_t i : leaf.members) {
        member_residuals.push_back(profile.residual_rounds[t][i]);
      }
      const double recomputed = leaf_score(member_residuals, profile.sigma);
      CHECK(recomputed == leaf.score);
      CHECK(leaf.score ==
            profile.trees[t].leaf_score_value(static_cast<int>(k)));
    }
  }

  // Ensemble score decomposes over per-tree leaf scores from the profile.
  for (std::size_t i = 0; i < 20; ++i) {
    const auto& x = train.point(i).features;
    double from_profile = 0.0;
    for (std::size_t t = 0; t < profile.trees.size(); ++t) {
      const int leaf = profile.trees[t].leaf_of(x);
      from_profile += profile.leaves[t][static_cast<std::size_t>(leaf)].score;
    }
    CHECK(model.score(x) == Catch::Approx(from_profile).margin(1e-12));
  }
}

TEST_CASE("training loss never increases across rounds") {
  const Dataset train = gen_concentric(300, 1.0, 3.0, 5);
  const GBDTHyper hyper;
  const std::vector<int> labels = train.labels();

  std::vector<double> scores(train.size(), 0.0);
  double previous = boost_loss(labels, scores, hyper.learning_rate);
  const auto [model, profile] = train_gbdt(train, hyper);
  for (const Tree& tree : model.trees) {
    for (std::size_t i = 0; i < train.size(); ++i) {
      scores[i] += tree.score_at(train.point(i).features);
    }
    const double loss = boost_loss(labels, scores, hyper.learning_rate);
    CHECK(loss <= previous + 1e-9);
    previous = loss;
  }
}

TEST_CASE("gbdt classification rules") {
  const GBDTModel empty;
  CHECK(empty.score({1.0, 2.0}) == 0.0);
  CHECK(empty.classify({1.0, 2.0}) == 1);  // score 0 classifies +1

  const Dataset train = gen_2gauss(100, 6.0, 2);
  GBDTHyper hyper;
  hyper.num_trees = 5;
  const auto [model, profile] = train_gbdt(train, hyper);

  // Flipping the sign of every leaf score flips every nonzero decision.
  GBDTModel negated = model;
  for (Tree& tree : negated.trees) {
    std::vector<Tree::Node> nodes = tree.nodes();
    for (auto& n : nodes) n.score = -n.score;
    tree = Tree(std::move(nodes));
  }
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto& x = train.point(i).features;
    CHECK(negated.score(x) == Catch::Approx(-model.score(x)).margin(1e-12));
    if (model.score(x) != 0.0) {
      CHECK(gbdt_classify(negated, x) == -gbdt_classify(model, x));
    }
  }
}

TEST_CASE("gbdt training is deterministic") {
  const Dataset train = gen_concentric(200, 1.0, 3.0, 31);
  const auto [m1, p1] = train_gbdt(train, GBDTHyper{});
  const auto [m2, p2] = train_gbdt(train, GBDTHyper{});
  for (std::size_t i = 0; i < train.size(); ++i) {
    CHECK(m1.score(train.point(i).features) == m2.score(train.point(i).features));
  }
  CHECK(p1.residual_rounds == p2.residual_rounds);
}

TEST_CASE("train_gbdt rejects bad inputs") {
  CHECK_THROWS_AS(train_gbdt(Dataset(2), GBDTHyper{}), std::invalid_argument);
  Dataset ds(1);
  ds.add(LabeledPoint{{0.0}, 1});
  GBDTHyper hyper;
  hyper.num_trees = 0;
  CHECK_THROWS_AS(train_gbdt(ds, hyper), std::invalid_argument);
}
