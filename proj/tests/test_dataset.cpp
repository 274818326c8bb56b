#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "psdebug/dataset.hpp"

using namespace psdebug;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "psdebug_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("gen_2gauss produces balanced labeled classes") {
  const Dataset ds = gen_2gauss(1000, 6.0, 42);
  REQUIRE(ds.size() == 1000);
  REQUIRE(ds.dim() == 2);
  std::size_t neg = 0, pos = 0;
  for (const auto& p : ds.points()) {
    (p.label == -1 ? neg : pos)++;
  }
  CHECK(neg == 500);
  CHECK(pos == 500);
}

TEST_CASE("gen_2gauss minimal and invalid cases") {
  const Dataset ds = gen_2gauss(2, 6.0, 7);
  REQUIRE(ds.size() == 2);
  CHECK(ds.label(0) == -1);
  CHECK(ds.label(1) == 1);
  CHECK_THROWS_AS(gen_2gauss(1, 6.0, 7), std::invalid_argument);
  CHECK_THROWS_AS(gen_2gauss(100, -1.0, 7), std::invalid_argument);
}

TEST_CASE("generators are pure functions of their arguments") {
  CHECK(gen_2gauss(1000, 6.0, 42) == gen_2gauss(1000, 6.0, 42));
  CHECK(gen_concentric(500, 1.0, 3.0, 9) == gen_concentric(500, 1.0, 3.0, 9));
  CHECK_FALSE(gen_2gauss(1000, 6.0, 42) == gen_2gauss(1000, 6.0, 43));
}

TEST_CASE("gen_concentric radii concentrate near their targets") {
  const Dataset ds = gen_concentric(2000, 1.0, 3.0, 42);
  REQUIRE(ds.size() == 2000);
  REQUIRE(ds.dim() == 2);
  double inner_mean = 0.0, outer_mean = 0.0;
  std::size_t inner_count = 0, outer_count = 0;
  for (const auto& p : ds.points()) {
    const double r = std::hypot(p.features[0], p.features[1]);
    if (p.label == -1) {
      inner_mean += r;
      ++inner_count;
    } else {
      outer_mean += r;
      ++outer_count;
    }
  }
  inner_mean /= static_cast<double>(inner_count);
  outer_mean /= static_cast<double>(outer_count);
  CHECK(std::abs(inner_mean - 1.0) < 0.1);
  CHECK(std::abs(outer_mean - 3.0) < 0.3);

  CHECK(gen_concentric(2, 1.0, 3.0, 1).size() == 2);
  CHECK_THROWS_AS(gen_concentric(10, 3.0, 1.0, 1), std::invalid_argument);
}

TEST_CASE("dataset rejects invalid points") {
  Dataset ds(2);
  CHECK_THROWS_AS(ds.add(LabeledPoint{{1.0}, 1}), std::invalid_argument);
  CHECK_THROWS_AS(ds.add(LabeledPoint{{1.0, 2.0}, 0}), std::invalid_argument);
  CHECK_THROWS_AS(ds.add(LabeledPoint{{1.0, std::nan("")}, 1}),
                  std::invalid_argument);
  ds.add(LabeledPoint{{1.0, 2.0}, -1});
  CHECK(ds.size() == 1);
}

TEST_CASE("csv round trip") {
  const auto path = temp_file("roundtrip.csv");
  const Dataset ds = gen_2gauss(100, 6.0, 1);
  save_csv(ds, path.string());
  const Dataset loaded = load_csv(path.string());
  REQUIRE(loaded.size() == ds.size());
  REQUIRE(loaded.dim() == ds.dim());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(loaded.label(i) == ds.label(i));
    for (std::size_t j = 0; j < ds.dim(); ++j) {
      CHECK(loaded.point(i).features[j] ==
            Catch::Approx(ds.point(i).features[j]).margin(1e-12));
    }
  }
}

TEST_CASE("csv parses a minimal file") {
  const auto path = temp_file("minimal.csv");
  std::ofstream(path) << "f1,f2,label\n0.5,-1.25,1\n";
  const Dataset ds = load_csv(path.string());
  REQUIRE(ds.size() == 1);
  REQUIRE(ds.dim() == 2);
  CHECK(ds.point(0).features[0] == 0.5);
  CHECK(ds.point(0).features[1] == -1.25);
  CHECK(ds.label(0) == 1);
}

TEST_CASE("csv errors name the offending line") {
  const auto check_error = [](const std::string& content,
                              const std::string& needle) {
    const auto path = temp_file("bad.csv");
    std::ofstream(path) << content;
    try {
      load_csv(path.string());
      FAIL("expected CsvError");
    } catch (const CsvError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  check_error("f1,f2,label\n0.5,-1.25,0\n", ":2");      // label outside domain
  check_error("f1,oops,label\n0.5,-1.25,1\n", ":1");    // malformed header
  check_error("f1,f2,label\n0.5,abc,1\n", ":2");        // non-numeric feature
  check_error("f1,f2,label\n0.5,1\n", ":2");            // ragged row
  check_error("f1,f2,label\n1,2,1\n0.5,0.5,0.5,1\n", ":3");
}

TEST_CASE("split partitions with rounded sizes") {
  const Dataset ds = gen_2gauss(1250, 6.0, 3);
  const auto parts = split(ds, 0.8, 0.1, 11);
  CHECK(parts.train.size() == 1000);
  CHECK(parts.test.size() == 125);
  CHECK(parts.validation.size() == 125);

  // Union is the original multiset.
  std::multiset<std::pair<double, double>> original, combined;
  for (const auto& p : ds.points()) {
    original.insert({p.features[0], p.features[1]});
  }
  for (const Dataset* part : {&parts.train, &parts.test, &parts.validation}) {
    for (const auto& p : part->points()) {
      combined.insert({p.features[0], p.features[1]});
    }
  }
  CHECK(original == combined);

  const auto again = split(ds, 0.8, 0.1, 11);
  CHECK(again.train == parts.train);
  CHECK(again.test == parts.test);
  CHECK(again.validation == parts.validation);

  CHECK_THROWS_AS(split(ds, 0.8, 0.3, 1), std::invalid_argument);
  CHECK_THROWS_AS(split(ds, -0.1, 0.5, 1), std::invalid_argument);
}

TEST_CASE("random noise flips exactly round(rate*N) labels") {
  const Dataset ds = gen_2gauss(1000, 6.0, 5);
  NoiseSpec spec;
  spec.mode = NoiseMode::random;
  spec.rate = 0.1;
  spec.seed = 17;
  const auto [noisy, record] = inject_noise(ds, spec);
  REQUIRE(record.count() == 100);
  CHECK(std::is_sorted(record.flipped_indices.begin(),
                       record.flipped_indices.end()));
  for (std::size_t j = 0; j < record.count(); ++j) {
    const std::size_t i = record.flipped_indices[j];
    CHECK(noisy.label(i) == -record.original_labels[j]);
    CHECK(record.original_labels[j] == ds.label(i));
  }
  // Labels stay in the domain and untouched points are untouched.
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK((noisy.label(i) == -1 || noisy.label(i) == 1));
    if (!record.contains(i)) CHECK(noisy.label(i) == ds.label(i));
  }

  SECTION("exact counts at other rates") {
    spec.rate = 0.25;
    CHECK(inject_noise(ds, spec).second.count() == 250);
    spec.rate = 0.0004;  // round(0.4) == 0 -> precondition violated
    CHECK_THROWS_AS(inject_noise(ds, spec), std::invalid_argument);
  }
}

TEST_CASE("noise restore is the identity") {
  const Dataset ds = gen_concentric(300, 1.0, 3.0, 8);
  NoiseSpec spec;
  spec.mode = NoiseMode::random;
  spec.rate = 0.2;
  spec.seed = 23;
  const auto [noisy, record] = inject_noise(ds, spec);
  CHECK(restore_labels(noisy, record) == ds);
}

TEST_CASE("systematic noise records only real changes") {
  Dataset ds(1);
  for (int i = 0; i < 10; ++i) {
    ds.add(LabeledPoint{{static_cast<double>(i)}, i < 5 ? -1 : 1});
  }
  NoiseSpec spec;
  spec.mode = NoiseMode::systematic;
  spec.selector = FeatureSelector{0, FeatureSelector::Kind::greater_than, 6.5};
  spec.forced_label = 1;
  const auto [noisy, record] = inject_noise(ds, spec);
  // Points 7, 8, 9 match but already carry the forced label: no-op flips.
  CHECK(record.count() == 0);
  CHECK(noisy == ds);

  spec.selector = FeatureSelector{0, FeatureSelector::Kind::greater_than, 2.5};
  const auto [noisy2, record2] = inject_noise(ds, spec);
  CHECK(record2.flipped_indices == std::vector<std::size_t>{3, 4});
  CHECK(noisy2.label(3) == 1);
  CHECK(noisy2.label(4) == 1);

  spec.selector = FeatureSelector{0, FeatureSelector::Kind::greater_than, 99.0};
  CHECK_THROWS_AS(inject_noise(ds, spec), EmptySelectionError);

  spec.selector.reset();
  CHECK_THROWS_AS(inject_noise(ds, spec), std::invalid_argument);
}

TEST_CASE("systematic noise with exact-value selector") {
  Dataset ds(2);
  ds.add(LabeledPoint{{1.0, 0.0}, -1});
  ds.add(LabeledPoint{{0.0, 1.0}, -1});
  ds.add(LabeledPoint{{1.0, 1.0}, -1});
  NoiseSpec spec;
  spec.mode = NoiseMode::systematic;
  spec.selector = FeatureSelector{0, FeatureSelector::Kind::equals, 1.0};
  spec.forced_label = 1;
  const auto [noisy, record] = inject_noise(ds, spec);
  CHECK(record.flipped_indices == std::vector<std::size_t>{0, 2});
}
