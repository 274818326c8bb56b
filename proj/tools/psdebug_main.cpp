// psdebug: find the training labels most likely to have caused test
// misclassifications, by scoring each label's probability of sufficiency
// under counterfactual relabelings of the training set.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "psdebug/psdebug.hpp"

namespace {

using psdebug::json;

// Flag combinations CLI11 cannot express declaratively; exits with the
// usage code (2) rather than the runtime code (1).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::vector<std::size_t> parse_test_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string token = text.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start);
    if (token.empty()) {
      throw UsageError("--tests: empty index in list '" + text + "'");
    }
    std::size_t pos = 0;
    const unsigned long long value = std::stoull(token, &pos);
    if (pos != token.size()) {
      throw UsageError("--tests: bad index '" + token + "'");
    }
    out.push_back(static_cast<std::size_t>(value));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

struct GenOptions {
  std::string dataset = "2gauss";
  std::size_t n = 1250;
  std::uint64_t seed = 0;
  double separation = 6.0;
  double inner = 1.0;
  double outer = 3.0;
  std::string out;
};

int cmd_gen(const GenOptions& opt) {
  psdebug::Dataset ds =
      opt.dataset == "2gauss"
          ? psdebug::gen_2gauss(opt.n, opt.separation, opt.seed)
          : psdebug::gen_concentric(opt.n, opt.inner, opt.outer, opt.seed);
  psdebug::save_csv(ds, opt.out);
  std::cout << "gen: wrote " << ds.size() << " points (dim " << ds.dim()
            << ") to " << opt.out << "\n";
  return 0;
}

struct NoiseOptions {
  std::string in, out, record;
  std::string mode = "random";
  double rate = 0.1;
  std::optional<std::size_t> feature;
  std::string op = "gt";
  double value = 0.0;
  std::optional<int> forced_label;
  std::uint64_t seed = 0;
};

int cmd_noise(const NoiseOptions& opt) {
  const psdebug::Dataset ds = psdebug::load_csv(opt.in);
  psdebug::NoiseSpec spec;
  spec.rate = opt.rate;
  spec.seed = opt.seed;
  if (opt.mode == "random") {
    spec.mode = psdebug::NoiseMode::random;
  } else {
    spec.mode = psdebug::NoiseMode::systematic;
    if (!opt.feature || !opt.forced_label) {
      throw UsageError(
          "noise: systematic mode requires --feature and --forced-label");
    }
    psdebug::FeatureSelector sel;
    sel.feature = *opt.feature;
    sel.kind = opt.op == "eq" ? psdebug::FeatureSelector::Kind::equals
                              : psdebug::FeatureSelector::Kind::greater_than;
    sel.value = opt.value;
    spec.selector = sel;
    spec.forced_label = *opt.forced_label;
  }
  const auto [noisy, record] = psdebug::inject_noise(ds, spec);
  psdebug::save_csv(noisy, opt.out);
  json doc = psdebug::to_document(record, spec);
  doc["invocation"] = json{{"command", "noise"},
                           {"in", opt.in},
                           {"out", opt.out},
                           {"seed", opt.seed}};
  psdebug::write_document(doc, opt.record);
  std::cout << "noise: flipped " << record.count() << " of " << ds.size()
            << " labels; wrote " << opt.out << " and " << opt.record << "\n";
  return 0;
}

struct TrainOptions {
  std::string algo = "lr";
  std::string train;
  std::string model_out, profile_out;
  psdebug::LRHyper lr;
  psdebug::GBDTHyper gbdt;
};

int cmd_train(const TrainOptions& opt) {
  const psdebug::Dataset train = psdebug::load_csv(opt.train);
  const psdebug::Algo algo = psdebug::algo_from_name(opt.algo);
  json invocation{{"command", "train"},
                  {"algo", opt.algo},
                  {"train", opt.train}};

  std::size_t train_errors = 0;
  if (algo == psdebug::Algo::logistic_regression) {
    const auto [model, profile] = psdebug::train_lr(train, opt.lr);
    train_errors = psdebug::evaluation_score(model, train);
    json model_doc = psdebug::to_document(model);
    json profile_doc = psdebug::to_document(profile);
    invocation["hyper"] = psdebug::to_json(opt.lr);
    model_doc["invocation"] = invocation;
    profile_doc["invocation"] = invocation;
    psdebug::write_document(model_doc, opt.model_out);
    psdebug::write_document(profile_doc, opt.profile_out);
  } else {
    const auto [model, profile] = psdebug::train_gbdt(train, opt.gbdt);
    train_errors = psdebug::evaluation_score(model, train);
    json model_doc = psdebug::to_document(model);
    json profile_doc = psdebug::to_document(profile);
    invocation["hyper"] = psdebug::to_json(opt.gbdt);
    model_doc["invocation"] = invocation;
    profile_doc["invocation"] = invocation;
    psdebug::write_document(model_doc, opt.model_out);
    psdebug::write_document(profile_doc, opt.profile_out);
  }
  std::cout << "train: " << opt.algo << " on " << train.size()
            << " points, training errors " << train_errors << "; wrote "
            << opt.model_out << " and " << opt.profile_out << "\n";
  return 0;
}

struct DebugOptions {
  std::string algo = "lr";
  std::string train, test, profile;
  std::string tests = "auto";
  std::string clean_train;
  std::size_t k = 1;
  std::size_t samples = 100000;
  double epsilon = 0.1;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::uint64_t min_trials = 30;
  std::optional<double> tau;
  std::string out;
};

int cmd_debug(const DebugOptions& opt) {
  if (opt.tests == "auto" && opt.clean_train.empty()) {
    throw UsageError(
        "debug: --tests auto needs --clean-train to define 'new' "
        "misclassifications");
  }
  const psdebug::Dataset train = psdebug::load_csv(opt.train);
  const psdebug::Dataset test = psdebug::load_csv(opt.test);
  const psdebug::Algo algo = psdebug::algo_from_name(opt.algo);
  const json profile_doc = psdebug::read_document(opt.profile);

  psdebug::LRProfile lr_profile;
  psdebug::GBDTProfile gbdt_profile;
  if (algo == psdebug::Algo::logistic_regression) {
    lr_profile = psdebug::lr_profile_from_document(profile_doc);
  } else {
    gbdt_profile = psdebug::gbdt_profile_from_document(profile_doc);
  }

  std::vector<std::size_t> test_indices;
  if (opt.tests == "auto") {
    const psdebug::Dataset clean = psdebug::load_csv(opt.clean_train);
    if (algo == psdebug::Algo::logistic_regression) {
      const auto [clean_model, clean_profile] =
          psdebug::train_lr(clean, lr_profile.hyper);
      (void)clean_profile;
      const psdebug::LRModel noisy_model =
          psdebug::reconstruct_lr_model(lr_profile, train);
      test_indices =
          psdebug::find_new_misclassifications(clean_model, noisy_model, test);
    } else {
      const auto [clean_model, clean_profile] =
          psdebug::train_gbdt(clean, gbdt_profile.hyper);
      (void)clean_profile;
      const psdebug::GBDTModel noisy_model =
          psdebug::model_from_profile(gbdt_profile);
      test_indices =
          psdebug::find_new_misclassifications(clean_model, noisy_model, test);
    }
    if (test_indices.empty()) {
      throw std::runtime_error(
          "debug: no new misclassifications found; nothing to root-cause");
    }
    if (test_indices.size() > opt.k) test_indices.resize(opt.k);
  } else {
    test_indices = parse_test_list(opt.tests);
    for (std::size_t t : test_indices) {
      if (t >= test.size()) {
        throw std::invalid_argument("debug: test index " + std::to_string(t) +
                                    " out of range");
      }
    }
  }

  std::vector<psdebug::LinearSurrogate> surrogates;
  surrogates.reserve(test_indices.size());
  for (std::size_t t : test_indices) {
    const psdebug::LabeledPoint& p = test.point(t);
    surrogates.push_back(
        algo == psdebug::Algo::logistic_regression
            ? psdebug::build_lr_surrogate(lr_profile, train, p.features,
                                          p.label, t)
            : psdebug::build_gbdt_surrogate(gbdt_profile, p.features, p.label,
                                            t));
  }

  psdebug::PriorConfig prior{opt.epsilon, opt.seed, opt.samples};
  psdebug::PSReport report = psdebug::estimate_ps(
      surrogates, train.labels(), prior, opt.threads, opt.min_trials);
  if (report.accepted_worlds == 0) {
    throw std::runtime_error(
        "debug: zero accepted worlds; every sampled world already shows the "
        "error, so no PS estimate is defined");
  }
  if (opt.tau) report.threshold = *opt.tau;

  json doc = psdebug::to_document(report);
  doc["invocation"] = json{{"command", "debug"},
                           {"algo", opt.algo},
                           {"train", opt.train},
                           {"test", opt.test},
                           {"profile", opt.profile},
                           {"tests", opt.tests},
                           {"samples", opt.samples},
                           {"epsilon", opt.epsilon},
                           {"seed", opt.seed},
                           {"min_trials", opt.min_trials}};
  psdebug::write_document(doc, opt.out);

  std::cout << "debug: " << report.estimates.size() << " estimates over "
            << report.accepted_worlds << " accepted / "
            << report.rejected_worlds << " rejected worlds; wrote " << opt.out
            << "\n";
  if (opt.tau) {
    const auto causes = psdebug::rank_and_threshold(report, *opt.tau);
    std::cout << "debug: " << causes.size() << " causes with ps >= " << *opt.tau
              << ":";
    for (std::size_t i : causes) std::cout << " " << i;
    std::cout << "\n";
  }
  return 0;
}

struct EvalOptions {
  std::string config;
  std::string out;
  std::optional<unsigned> threads;
  std::optional<std::uint64_t> seed;
  std::string sweep_out;
  std::string curve_out;
  bool force_sweep = false;  // set by the sweep subcommand
};

int cmd_eval(const EvalOptions& opt) {
  psdebug::WorkflowConfig cfg = psdebug::load_workflow_config(opt.config);
  if (opt.threads) cfg.threads = *opt.threads;
  if (opt.seed) cfg.prior.seed = *opt.seed;
  if (opt.force_sweep || !opt.sweep_out.empty()) cfg.include_sweep = true;

  const psdebug::EvalReport report = psdebug::run_workflow(cfg);

  if (!opt.out.empty()) {
    json doc = psdebug::to_document(report, cfg);
    doc["invocation"] = json{{"command", opt.force_sweep ? "sweep" : "eval"},
                             {"config", opt.config}};
    psdebug::write_document(doc, opt.out);
  }
  if (!opt.sweep_out.empty()) {
    psdebug::write_sweep_csv(report.sweep_curve, opt.sweep_out);
  }
  if (!opt.curve_out.empty()) {
    psdebug::write_curve_csv(report.multi_test_curve, opt.curve_out);
  }

  const std::string prefix = opt.force_sweep ? "sweep: " : "eval: ";
  std::cout << prefix;
  if (report.precision_defined) {
    std::cout << "precision " << report.precision << ", recall "
              << report.recall;
  } else {
    std::cout << "precision undefined";
  }
  std::cout << "; validation clean/noisy/fixed " << report.validation_errors[0]
            << "/" << report.validation_errors[1] << "/"
            << report.validation_errors[2] << "; runtime "
            << report.runtime_seconds << "s\n";
  if (!report.diagnostic.empty()) {
    std::cout << prefix << "note: " << report.diagnostic << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "psdebug: root-cause analysis of training-label noise via "
      "probability-of-sufficiency scores"};
  app.require_subcommand(1);

  GenOptions gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "generate a synthetic dataset");
  gen_cmd->add_option("--dataset", gen.dataset, "2gauss|concentric")
      ->check(CLI::IsMember({"2gauss", "concentric"}));
  gen_cmd->add_option("--n", gen.n, "number of points");
  gen_cmd->add_option("--seed", gen.seed, "generator seed");
  gen_cmd->add_option("--separation", gen.separation, "2gauss class separation");
  gen_cmd->add_option("--inner", gen.inner, "concentric inner radius");
  gen_cmd->add_option("--outer", gen.outer, "concentric outer radius");
  gen_cmd->add_option("--out", gen.out, "output CSV path")->required();

  NoiseOptions noise;
  CLI::App* noise_cmd =
      app.add_subcommand("noise", "inject label noise into a dataset");
  noise_cmd->add_option("--in", noise.in, "input CSV")->required();
  noise_cmd->add_option("--out", noise.out, "noisy CSV path")->required();
  noise_cmd->add_option("--record", noise.record, "noise record JSON path")
      ->required();
  noise_cmd->add_option("--mode", noise.mode, "random|systematic")
      ->check(CLI::IsMember({"random", "systematic"}));
  noise_cmd->add_option("--rate", noise.rate, "random flip rate in [0,0.5]");
  noise_cmd->add_option("--feature", noise.feature,
                        "systematic selector feature index (0-based)");
  noise_cmd->add_option("--op", noise.op, "selector comparison: gt|eq")
      ->check(CLI::IsMember({"gt", "eq"}));
  noise_cmd->add_option("--value", noise.value, "selector threshold/value");
  noise_cmd->add_option("--forced-label", noise.forced_label,
                        "label forced onto selected points (-1|1)");
  noise_cmd->add_option("--seed", noise.seed, "noise seed");

  TrainOptions train;
  CLI::App* train_cmd =
      app.add_subcommand("train", "train a classifier and record its profile");
  train_cmd->add_option("--algo", train.algo, "lr|gbdt")
      ->check(CLI::IsMember({"lr", "gbdt"}));
  train_cmd->add_option("--train", train.train, "training CSV")->required();
  train_cmd->add_option("--model-out", train.model_out, "model JSON path")
      ->required();
  train_cmd->add_option("--profile-out", train.profile_out, "profile JSON path")
      ->required();
  train_cmd->add_option("--iterations", train.lr.iterations, "lr iterations");
  train_cmd->add_option("--step-size", train.lr.step_size, "lr step size");
  train_cmd->add_option("--l2", train.lr.l2_penalty, "lr L2 penalty");
  train_cmd->add_option("--trees", train.gbdt.num_trees, "gbdt tree count");
  train_cmd->add_option("--depth", train.gbdt.max_depth, "gbdt max depth");
  train_cmd->add_option("--learning-rate", train.gbdt.learning_rate,
                        "gbdt learning rate");
  train_cmd->add_option("--min-leaf", train.gbdt.min_leaf_size,
                        "gbdt minimum leaf size");

  DebugOptions debug;
  CLI::App* debug_cmd = app.add_subcommand(
      "debug", "rank training labels by probability of sufficiency");
  debug_cmd->add_option("--algo", debug.algo, "lr|gbdt")
      ->check(CLI::IsMember({"lr", "gbdt"}));
  debug_cmd->add_option("--train", debug.train, "noisy training CSV")
      ->required();
  debug_cmd->add_option("--test", debug.test, "test CSV")->required();
  debug_cmd->add_option("--profile", debug.profile, "profile JSON")->required();
  debug_cmd->add_option("--tests", debug.tests,
                        "'auto' or comma-separated test indices");
  debug_cmd->add_option("--clean-train", debug.clean_train,
                        "clean training CSV (required with --tests auto)");
  debug_cmd->add_option("--k", debug.k,
                        "with --tests auto, number of misclassifications to "
                        "combine");
  debug_cmd->add_option("--samples", debug.samples, "number of sampled worlds");
  debug_cmd->add_option("--epsilon", debug.epsilon, "prior flip probability");
  debug_cmd->add_option("--seed", debug.seed, "sampler seed");
  debug_cmd->add_option("--threads", debug.threads, "worker threads");
  debug_cmd->add_option("--min-trials", debug.min_trials,
                        "low-confidence threshold on trials");
  debug_cmd->add_option("--tau", debug.tau, "PS threshold for the cause list");
  debug_cmd->add_option("--out", debug.out, "PS report JSON path")->required();

  EvalOptions eval;
  CLI::App* eval_cmd = app.add_subcommand(
      "eval", "run the full noise-injection evaluation workflow");
  eval_cmd->add_option("--config", eval.config, "workflow config JSON")
      ->required();
  eval_cmd->add_option("--out", eval.out, "evaluation report JSON path")
      ->required();
  eval_cmd->add_option("--threads", eval.threads, "worker threads");
  eval_cmd->add_option("--seed", eval.seed, "override prior seed");
  eval_cmd->add_option("--sweep-out", eval.sweep_out, "sweep curve CSV path");
  eval_cmd->add_option("--curve-out", eval.curve_out,
                       "multi-test curve CSV path");

  EvalOptions sweep;
  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep", "threshold sweep: flip ps-ranked prefixes and retrain");
  sweep_cmd->add_option("--config", sweep.config, "workflow config JSON")
      ->required();
  sweep_cmd->add_option("--out", sweep.sweep_out, "sweep CSV path")->required();
  sweep_cmd->add_option("--threads", sweep.threads, "worker threads");
  sweep_cmd->add_option("--seed", sweep.seed, "override prior seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen(gen);
    if (noise_cmd->parsed()) return cmd_noise(noise);
    if (train_cmd->parsed()) return cmd_train(train);
    if (debug_cmd->parsed()) return cmd_debug(debug);
    if (eval_cmd->parsed()) return cmd_eval(eval);
    if (sweep_cmd->parsed()) {
      sweep.force_sweep = true;
      return cmd_eval(sweep);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
