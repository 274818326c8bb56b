#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "psdebug/io.hpp"

// Spawns the installed binary; PSDEBUG_CLI_PATH is injected by the build.

namespace {

namespace fs = std::filesystem;

const std::string kCli = PSDEBUG_CLI_PATH;

fs::path work_dir() {
  const auto dir = fs::temp_directory_path() / "psdebug_cli_tests";
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " >" +
                          (work_dir() / "stdout.txt").string() + " 2>" +
                          (work_dir() / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::size_t count_lines(const fs::path& path) {
  std::ifstream in(path);
  std::size_t lines = 0;
  std::string line;
  while (std::getline(in, line)) ++lines;
  return lines;
}

}  // namespace

TEST_CASE("gen writes the requested csv") {
  const auto out = work_dir() / "gen.csv";
  REQUIRE(run("gen --dataset 2gauss --n 1250 --seed 42 --out " + out.string()) ==
          0);
  CHECK(count_lines(out) == 1251);  // header + rows

  const auto conc = work_dir() / "conc.csv";
  REQUIRE(run("gen --dataset concentric --n 2000 --seed 1 --out " +
              conc.string()) == 0);
  CHECK(count_lines(conc) == 2001);
}

TEST_CASE("usage errors exit with code 2") {
  CHECK(run("gen --dataset 2gauss --n 10") == 2);        // missing --out
  CHECK(run("gen --bogus-flag 1 --out x.csv") == 2);     // unknown flag
  CHECK(run("gen --dataset triangles --out x.csv") == 2);
  CHECK(run("") == 2);                                   // no subcommand
  CHECK(run("--help") == 0);
  // Contextually required flags count as usage errors too.
  const auto data = work_dir() / "usage.csv";
  REQUIRE(run("gen --dataset 2gauss --n 50 --seed 1 --out " + data.string()) ==
          0);
  CHECK(run("noise --in " + data.string() +
            " --out a.csv --record r.json --mode systematic --value 1") == 2);
  CHECK(run("debug --algo lr --train " + data.string() + " --test " +
            data.string() + " --profile nope.json --tests auto --out o.json") ==
        2);
}

TEST_CASE("runtime errors exit with code 1") {
  CHECK(run("noise --in /nonexistent.csv --out a.csv --record r.json") == 1);
  const auto data = work_dir() / "few.csv";
  REQUIRE(run("gen --dataset 2gauss --n 100 --seed 3 --out " + data.string()) ==
          0);
  // Selector matches nothing.
  CHECK(run("noise --in " + data.string() + " --out a.csv --record r.json" +
            " --mode systematic --feature 0 --op gt --value 1e12" +
            " --forced-label 1") == 1);
}

TEST_CASE("full pipeline: gen, noise, train, debug") {
  const auto dir = work_dir();
  const auto full = dir / "full.csv";
  const auto train_csv = dir / "train.csv";
  const auto test_csv = dir / "test.csv";
  const auto noisy_csv = dir / "noisy.csv";
  const auto record_json = dir / "record.json";
  const auto model_json = dir / "model.json";
  const auto profile_json = dir / "profile.json";
  const auto report_json = dir / "report.json";

  REQUIRE(run("gen --dataset 2gauss --n 2500 --separation 4.6 --seed 1 --out " +
              full.string()) == 0);

  // Split by hand through the library (the CLI works on prepared files).
  {
    const auto ds = psdebug::load_csv(full.string());
    const auto parts = psdebug::split(ds, 0.4, 0.3, 2);
    psdebug::save_csv(parts.train, train_csv.string());
    psdebug::save_csv(parts.test, test_csv.string());
  }

  REQUIRE(run("noise --in " + train_csv.string() + " --out " +
              noisy_csv.string() + " --record " + record_json.string() +
              " --mode random --rate 0.1 --seed 3") == 0);
  const auto record = psdebug::noise_record_from_document(
      psdebug::read_document(record_json.string()));
  CHECK(record.count() == 100);

  REQUIRE(run("train --algo lr --train " + noisy_csv.string() +
              " --iterations 400 --step-size 0.01 --model-out " +
              model_json.string() + " --profile-out " + profile_json.string()) ==
          0);
  const auto model_doc = psdebug::read_document(model_json.string());
  CHECK(model_doc.at("kind") == "lr_model");
  CHECK(model_doc.contains("invocation"));

  const std::string debug_cmd =
      "debug --algo lr --train " + noisy_csv.string() + " --test " +
      test_csv.string() + " --profile " + profile_json.string() +
      " --tests auto --clean-train " + train_csv.string() +
      " --samples 20000 --epsilon 0.1 --seed 9 --out " + report_json.string();
  REQUIRE(run(debug_cmd) == 0);

  const auto report = psdebug::ps_report_from_document(
      psdebug::read_document(report_json.string()));
  CHECK(report.estimates.size() == 1000);  // one estimate per training label

  SECTION("identical command lines produce byte-identical outputs") {
    const std::string first = slurp(report_json);
    REQUIRE(run(debug_cmd) == 0);
    CHECK(slurp(report_json) == first);
  }

  SECTION("explicit test indices work without a clean dataset") {
    const auto explicit_json = dir / "explicit.json";
    REQUIRE(run("debug --algo lr --train " + noisy_csv.string() + " --test " +
                test_csv.string() + " --profile " + profile_json.string() +
                " --tests 0,3 --samples 5000 --seed 9 --tau 0.5 --out " +
                explicit_json.string()) == 0);
    CHECK(fs::exists(explicit_json));
  }
}

TEST_CASE("gbdt pipeline through train and debug") {
  const auto dir = work_dir();
  const auto full = dir / "gfull.csv";
  const auto train_csv = dir / "gtrain.csv";
  const auto test_csv = dir / "gtest.csv";
  const auto noisy_csv = dir / "gnoisy.csv";
  const auto record_json = dir / "grecord.json";
  const auto model_json = dir / "gmodel.json";
  const auto profile_json = dir / "gprofile.json";
  const auto report_json = dir / "greport.json";

  REQUIRE(run("gen --dataset 2gauss --n 400 --separation 4.0 --seed 2 --out " +
              full.string()) == 0);
  {
    const auto ds = psdebug::load_csv(full.string());
    const auto parts = psdebug::split(ds, 0.6, 0.2, 5);
    psdebug::save_csv(parts.train, train_csv.string());
    psdebug::save_csv(parts.test, test_csv.string());
  }
  REQUIRE(run("noise --in " + train_csv.string() + " --out " +
              noisy_csv.string() + " --record " + record_json.string() +
              " --mode systematic --feature 1 --op gt --value 1.0 " +
              "--forced-label 1 --seed 3") == 0);
  REQUIRE(run("train --algo gbdt --train " + noisy_csv.string() +
              " --trees 10 --model-out " + model_json.string() +
              " --profile-out " + profile_json.string()) == 0);
  REQUIRE(run("debug --algo gbdt --train " + noisy_csv.string() + " --test " +
              test_csv.string() + " --profile " + profile_json.string() +
              " --tests auto --clean-train " + train_csv.string() +
              " --samples 20000 --seed 4 --out " + report_json.string()) == 0);
  const auto report = psdebug::ps_report_from_document(
      psdebug::read_document(report_json.string()));
  CHECK(report.estimates.size() == 240);
}

TEST_CASE("eval and sweep run from a config file") {
  const auto dir = work_dir();
  const auto cfg_path = dir / "cfg.json";
  {
    psdebug::WorkflowConfig cfg;
    cfg.dataset.kind = psdebug::DatasetSpec::Kind::two_gauss;
    cfg.dataset.n_points = 1000;
    cfg.dataset.separation = 4.6;
    cfg.dataset.seed = 1;
    cfg.split = {0.4, 0.3, 2};
    cfg.lr.iterations = 400;
    cfg.lr.step_size = 0.01;
    cfg.noise.mode = psdebug::NoiseMode::random;
    cfg.noise.rate = 0.1;
    cfg.noise.seed = 3;
    cfg.prior = {0.1, 17, 10000};
    psdebug::write_document(psdebug::to_json(cfg), cfg_path.string());
  }

  const auto report_json = dir / "eval_report.json";
  REQUIRE(run("eval --config " + cfg_path.string() + " --out " +
              report_json.string()) == 0);
  const auto doc = psdebug::read_document(report_json.string());
  CHECK(doc.at("kind") == "eval_report");
  CHECK(doc.contains("config"));
  CHECK_FALSE(doc.contains("runtime_seconds"));

  const auto sweep_csv = dir / "sweep.csv";
  REQUIRE(run("sweep --config " + cfg_path.string() + " --out " +
              sweep_csv.string()) == 0);
  std::ifstream in(sweep_csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "tau,flips,validation_error");
  CHECK(count_lines(sweep_csv) >= 3);
}
