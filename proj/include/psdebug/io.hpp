#ifndef PSDEBUG_IO_HPP
#define PSDEBUG_IO_HPP

#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "psdebug/dataset.hpp"
#include "psdebug/eval.hpp"
#include "psdebug/gbdt.hpp"
#include "psdebug/logreg.hpp"
#include "psdebug/ps.hpp"

// Structured text documents. Everything except datasets (CSV) is persisted
// as schema-versioned JSON with a `kind` discriminator, written with stable
// field order so identical runs produce byte-identical files.

namespace psdebug {

using json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

class DocumentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline json document_header(const std::string& kind) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["kind"] = kind;
  return doc;
}

inline void check_document(const json& doc, const std::string& kind) {
  if (!doc.is_object() || !doc.contains("kind") || doc["kind"] != kind) {
    throw DocumentError("expected a '" + kind + "' document");
  }
  if (!doc.contains("format_version") ||
      doc["format_version"].get<int>() != kFormatVersion) {
    throw DocumentError("unsupported format_version in '" + kind + "' document");
  }
}

}  // namespace detail

inline void write_document(const json& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DocumentError("cannot open '" + path + "' for writing");
  out << doc.dump(2) << "\n";
  if (!out) throw DocumentError("write to '" + path + "' failed");
}

inline json read_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DocumentError("cannot open '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DocumentError("malformed document '" + path + "': " + e.what());
  }
  return doc;
}

// ---------------------------------------------------------------------------
// Hyperparameters
// ---------------------------------------------------------------------------

inline json to_json(const LRHyper& h) {
  return json{{"iterations", h.iterations},
              {"step_size", h.step_size},
              {"l2_penalty", h.l2_penalty}};
}

inline LRHyper lr_hyper_from_json(const json& j) {
  LRHyper h;
  h.iterations = j.value("iterations", h.iterations);
  h.step_size = j.value("step_size", h.step_size);
  h.l2_penalty = j.value("l2_penalty", h.l2_penalty);
  return h;
}

inline json to_json(const GBDTHyper& h) {
  return json{{"num_trees", h.num_trees},
              {"max_depth", h.max_depth},
              {"learning_rate", h.learning_rate},
              {"min_leaf_size", h.min_leaf_size}};
}

inline GBDTHyper gbdt_hyper_from_json(const json& j) {
  GBDTHyper h;
  h.num_trees = j.value("num_trees", h.num_trees);
  h.max_depth = j.value("max_depth", h.max_depth);
  h.learning_rate = j.value("learning_rate", h.learning_rate);
  h.min_leaf_size = j.value("min_leaf_size", h.min_leaf_size);
  return h;
}

// ---------------------------------------------------------------------------
// Trees (nested nodes)
// ---------------------------------------------------------------------------

namespace detail {

inline json tree_node_to_json(const Tree& tree, int index) {
  const Tree::Node& n = tree.nodes()[static_cast<std::size_t>(index)];
  if (n.is_leaf()) {
    return json{{"leaf", n.leaf}, {"score", n.score}};
  }
  json out;
  out["feature"] = n.feature;
  out["threshold"] = n.threshold;
  out["left"] = tree_node_to_json(tree, n.left);
  out["right"] = tree_node_to_json(tree, n.right);
  return out;
}

inline int tree_node_from_json(const json& j, std::vector<Tree::Node>& nodes) {
  const auto index = static_cast<int>(nodes.size());
  nodes.emplace_back();
  if (j.contains("leaf")) {
    nodes[static_cast<std::size_t>(index)].leaf = j.at("leaf").get<int>();
    nodes[static_cast<std::size_t>(index)].score = j.at("score").get<double>();
    return index;
  }
  const int feature = j.at("feature").get<int>();
  const double threshold = j.at("threshold").get<double>();
  const int left = tree_node_from_json(j.at("left"), nodes);
  const int right = tree_node_from_json(j.at("right"), nodes);
  Tree::Node& n = nodes[static_cast<std::size_t>(index)];
  n.feature = feature;
  n.threshold = threshold;
  n.left = left;
  n.right = right;
  return index;
}

}  // namespace detail

inline json to_json(const Tree& tree) {
  return detail::tree_node_to_json(tree, 0);
}

inline Tree tree_from_json(const json& j) {
  std::vector<Tree::Node> nodes;
  detail::tree_node_from_json(j, nodes);
  return Tree(std::move(nodes));
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

inline json to_document(const LRModel& model) {
  json doc = detail::document_header("lr_model");
  doc["theta"] = model.theta;
  return doc;
}

inline LRModel lr_model_from_document(const json& doc) {
  detail::check_document(doc, "lr_model");
  return LRModel{doc.at("theta").get<std::vector<double>>()};
}

inline json to_document(const GBDTModel& model) {
  json doc = detail::document_header("gbdt_model");
  doc["base_score"] = model.base_score;
  json trees = json::array();
  for (const Tree& t : model.trees) trees.push_back(to_json(t));
  doc["trees"] = std::move(trees);
  return doc;
}

inline GBDTModel gbdt_model_from_document(const json& doc) {
  detail::check_document(doc, "gbdt_model");
  GBDTModel model;
  model.base_score = doc.at("base_score").get<double>();
  for (const json& t : doc.at("trees")) model.trees.push_back(tree_from_json(t));
  return model;
}

// ---------------------------------------------------------------------------
// Profiles
// ---------------------------------------------------------------------------

inline json to_document(const LRProfile& profile) {
  json doc = detail::document_header("lr_profile");
  doc["hyper"] = to_json(profile.hyper);
  doc["theta_prev"] = profile.theta_prev;
  doc["alpha_last"] = profile.alpha_last;
  doc["g"] = profile.g;
  doc["labels"] = profile.labels;
  return doc;
}

inline LRProfile lr_profile_from_document(const json& doc) {
  detail::check_document(doc, "lr_profile");
  LRProfile p;
  p.hyper = lr_hyper_from_json(doc.at("hyper"));
  p.theta_prev = doc.at("theta_prev").get<std::vector<double>>();
  p.alpha_last = doc.at("alpha_last").get<double>();
  p.g = doc.at("g").get<std::vector<double>>();
  p.labels = doc.at("labels").get<std::vector<int>>();
  return p;
}

inline json to_document(const GBDTProfile& profile) {
  json doc = detail::document_header("gbdt_profile");
  doc["hyper"] = to_json(profile.hyper);
  doc["sigma"] = profile.sigma;
  doc["labels"] = profile.labels;
  json trees = json::array();
  for (const Tree& t : profile.trees) trees.push_back(to_json(t));
  doc["trees"] = std::move(trees);
  json rounds = json::array();
  for (const auto& leaf_stats : profile.leaves) {
    json leaves = json::array();
    for (const LeafStats& s : leaf_stats) {
      leaves.push_back(json{{"members", s.members},
                            {"denominator", s.denominator},
                            {"score", s.score}});
    }
    rounds.push_back(std::move(leaves));
  }
  doc["leaves"] = std::move(rounds);
  doc["residuals"] = profile.residual_rounds;
  return doc;
}

inline GBDTProfile gbdt_profile_from_document(const json& doc) {
  detail::check_document(doc, "gbdt_profile");
  GBDTProfile p;
  p.hyper = gbdt_hyper_from_json(doc.at("hyper"));
  p.sigma = doc.at("sigma").get<double>();
  p.labels = doc.at("labels").get<std::vector<int>>();
  for (const json& t : doc.at("trees")) p.trees.push_back(tree_from_json(t));
  for (const json& leaves : doc.at("leaves")) {
    std::vector<LeafStats> stats;
    for (const json& s : leaves) {
      LeafStats ls;
      ls.members = s.at("members").get<std::vector<std::size_t>>();
      ls.denominator = s.at("denominator").get<double>();
      ls.score = s.at("score").get<double>();
      stats.push_back(std::move(ls));
    }
    p.leaves.push_back(std::move(stats));
  }
  p.residual_rounds =
      doc.at("residuals").get<std::vector<std::vector<double>>>();
  return p;
}

// ---------------------------------------------------------------------------
// Surrogates
// ---------------------------------------------------------------------------

inline json to_document(const LinearSurrogate& s) {
  json doc = detail::document_header("surrogate");
  doc["test_index"] = s.test_index();
  doc["expected_label"] = s.expected_label();
  doc["num_labels"] = s.num_labels();
  doc["bias"] = s.bias();
  if (s.is_sparse()) {
    json indices = json::array();
    json values = json::array();
    for (const auto& [i, w] : s.nonzero_coeffs()) {
      indices.push_back(i);
      values.push_back(w);
    }
    doc["storage"] = "sparse";
    doc["indices"] = std::move(indices);
    doc["coeffs"] = std::move(values);
  } else {
    std::vector<double> coeffs(s.num_labels());
    for (std::size_t i = 0; i < coeffs.size(); ++i) coeffs[i] = s.coeff(i);
    doc["storage"] = "dense";
    doc["coeffs"] = std::move(coeffs);
  }
  return doc;
}

inline LinearSurrogate surrogate_from_document(const json& doc) {
  detail::check_document(doc, "surrogate");
  const auto test_index = doc.at("test_index").get<std::size_t>();
  const int expected = doc.at("expected_label").get<int>();
  const auto n = doc.at("num_labels").get<std::size_t>();
  const double bias = doc.at("bias").get<double>();
  if (doc.at("storage") == "sparse") {
    const auto indices = doc.at("indices").get<std::vector<std::size_t>>();
    const auto values = doc.at("coeffs").get<std::vector<double>>();
    if (indices.size() != values.size()) {
      throw DocumentError("surrogate: indices/coeffs length mismatch");
    }
    std::vector<std::pair<std::size_t, double>> coeffs;
    coeffs.reserve(indices.size());
    for (std::size_t j = 0; j < indices.size(); ++j) {
      coeffs.emplace_back(indices[j], values[j]);
    }
    return LinearSurrogate::sparse(test_index, expected, bias,
                                   std::move(coeffs), n);
  }
  return LinearSurrogate::dense(test_index, expected, bias,
                                doc.at("coeffs").get<std::vector<double>>());
}

// ---------------------------------------------------------------------------
// Noise
// ---------------------------------------------------------------------------

inline json to_json(const NoiseSpec& spec) {
  json j;
  j["mode"] = spec.mode == NoiseMode::random ? "random" : "systematic";
  j["rate"] = spec.rate;
  j["seed"] = spec.seed;
  if (spec.selector) {
    j["selector"] = json{
        {"feature", spec.selector->feature},
        {"op",
         spec.selector->kind == FeatureSelector::Kind::greater_than ? "gt"
                                                                    : "eq"},
        {"value", spec.selector->value}};
  }
  if (spec.forced_label) j["forced_label"] = *spec.forced_label;
  return j;
}

inline NoiseSpec noise_spec_from_json(const json& j) {
  NoiseSpec spec;
  const std::string mode = j.value("mode", "random");
  if (mode == "random") {
    spec.mode = NoiseMode::random;
  } else if (mode == "systematic") {
    spec.mode = NoiseMode::systematic;
  } else {
    throw DocumentError("noise mode must be random|systematic");
  }
  spec.rate = j.value("rate", spec.rate);
  spec.seed = j.value("seed", spec.seed);
  if (j.contains("selector")) {
    FeatureSelector sel;
    const json& s = j.at("selector");
    sel.feature = s.at("feature").get<std::size_t>();
    const std::string op = s.value("op", "gt");
    if (op == "gt") {
      sel.kind = FeatureSelector::Kind::greater_than;
    } else if (op == "eq") {
      sel.kind = FeatureSelector::Kind::equals;
    } else {
      throw DocumentError("selector op must be gt|eq");
    }
    sel.value = s.at("value").get<double>();
    spec.selector = sel;
  }
  if (j.contains("forced_label")) {
    spec.forced_label = j.at("forced_label").get<int>();
  }
  return spec;
}

inline json to_document(const NoiseRecord& record, const NoiseSpec& spec) {
  json doc = detail::document_header("noise_record");
  doc["spec"] = to_json(spec);
  doc["flipped_indices"] = record.flipped_indices;
  doc["original_labels"] = record.original_labels;
  return doc;
}

inline NoiseRecord noise_record_from_document(const json& doc) {
  detail::check_document(doc, "noise_record");
  NoiseRecord record;
  record.flipped_indices =
      doc.at("flipped_indices").get<std::vector<std::size_t>>();
  record.original_labels = doc.at("original_labels").get<std::vector<int>>();
  return record;
}

// ---------------------------------------------------------------------------
// PS reports
// ---------------------------------------------------------------------------

inline json to_document(const PSReport& report) {
  json doc = detail::document_header("ps_report");
  doc["metadata"] = json{{"seed", report.seed},
                         {"num_samples", report.num_samples},
                         {"flip_prob", report.flip_prob},
                         {"min_trials", report.min_trials},
                         {"threshold", report.threshold},
                         {"predicate", report.predicate}};
  doc["accepted_worlds"] = report.accepted_worlds;
  doc["rejected_worlds"] = report.rejected_worlds;
  json estimates = json::array();
  for (const PSEstimate& e : report.estimates) {
    estimates.push_back(json{{"index", e.index},
                             {"ps", e.ps},
                             {"trials", e.trials},
                             {"successes", e.successes},
                             {"defined", e.defined},
                             {"low_confidence", e.low_confidence}});
  }
  doc["estimates"] = std::move(estimates);
  return doc;
}

inline PSReport ps_report_from_document(const json& doc) {
  detail::check_document(doc, "ps_report");
  PSReport report;
  const json& meta = doc.at("metadata");
  report.seed = meta.at("seed").get<std::uint64_t>();
  report.num_samples = meta.at("num_samples").get<std::size_t>();
  report.flip_prob = meta.at("flip_prob").get<double>();
  report.min_trials = meta.at("min_trials").get<std::uint64_t>();
  report.threshold = meta.at("threshold").get<double>();
  report.predicate = meta.at("predicate").get<std::string>();
  report.accepted_worlds = doc.at("accepted_worlds").get<std::uint64_t>();
  report.rejected_worlds = doc.at("rejected_worlds").get<std::uint64_t>();
  for (const json& e : doc.at("estimates")) {
    PSEstimate est;
    est.index = e.at("index").get<std::size_t>();
    est.ps = e.at("ps").get<double>();
    est.trials = e.at("trials").get<std::uint64_t>();
    est.successes = e.at("successes").get<std::uint64_t>();
    est.defined = e.at("defined").get<bool>();
    est.low_confidence = e.at("low_confidence").get<bool>();
    report.estimates.push_back(est);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Workflow config
// ---------------------------------------------------------------------------

inline json to_json(const PriorConfig& prior) {
  return json{{"flip_prob", prior.flip_prob},
              {"seed", prior.seed},
              {"num_samples", prior.num_samples}};
}

inline PriorConfig prior_from_json(const json& j) {
  PriorConfig prior;
  prior.flip_prob = j.value("flip_prob", prior.flip_prob);
  prior.seed = j.value("seed", prior.seed);
  prior.num_samples = j.value("num_samples", prior.num_samples);
  return prior;
}

inline json to_json(const WorkflowConfig& cfg) {
  json j;
  json ds;
  switch (cfg.dataset.kind) {
    case DatasetSpec::Kind::two_gauss:
      ds["generator"] = "2gauss";
      ds["n_points"] = cfg.dataset.n_points;
      ds["separation"] = cfg.dataset.separation;
      ds["seed"] = cfg.dataset.seed;
      break;
    case DatasetSpec::Kind::concentric:
      ds["generator"] = "concentric";
      ds["n_points"] = cfg.dataset.n_points;
      ds["inner_radius"] = cfg.dataset.inner_radius;
      ds["outer_radius"] = cfg.dataset.outer_radius;
      ds["seed"] = cfg.dataset.seed;
      break;
    case DatasetSpec::Kind::csv:
      ds["train_csv"] = cfg.dataset.train_csv;
      ds["test_csv"] = cfg.dataset.test_csv;
      ds["validation_csv"] = cfg.dataset.validation_csv;
      break;
  }
  j["dataset"] = std::move(ds);
  if (cfg.dataset.kind != DatasetSpec::Kind::csv) {
    j["split"] = json{{"train_frac", cfg.split.train_frac},
                      {"test_frac", cfg.split.test_frac},
                      {"seed", cfg.split.seed}};
  }
  j["algorithm"] = algo_name(cfg.algorithm);
  j["lr"] = to_json(cfg.lr);
  j["gbdt"] = to_json(cfg.gbdt);
  j["noise"] = to_json(cfg.noise);
  j["prior"] = to_json(cfg.prior);
  j["num_tests"] = cfg.num_tests;
  j["multi_test_aggregator"] =
      cfg.aggregator == MultiTestAggregator::average ? "average" : "conjunction";
  if (cfg.threshold) j["threshold"] = *cfg.threshold;
  if (cfg.top_k) j["top_k"] = *cfg.top_k;
  j["min_trials"] = cfg.min_trials;
  j["include_sweep"] = cfg.include_sweep;
  j["multi_test_ks"] = cfg.multi_test_ks;
  return j;
}

inline WorkflowConfig workflow_config_from_json(const json& j) {
  WorkflowConfig cfg;
  const json& ds = j.at("dataset");
  if (ds.contains("generator")) {
    const std::string gen = ds.at("generator").get<std::string>();
    if (gen == "2gauss") {
      cfg.dataset.kind = DatasetSpec::Kind::two_gauss;
      cfg.dataset.separation = ds.value("separation", cfg.dataset.separation);
    } else if (gen == "concentric") {
      cfg.dataset.kind = DatasetSpec::Kind::concentric;
      cfg.dataset.inner_radius =
          ds.value("inner_radius", cfg.dataset.inner_radius);
      cfg.dataset.outer_radius =
          ds.value("outer_radius", cfg.dataset.outer_radius);
    } else {
      throw DocumentError("unknown generator '" + gen + "' (2gauss|concentric)");
    }
    cfg.dataset.n_points = ds.value("n_points", cfg.dataset.n_points);
    cfg.dataset.seed = ds.value("seed", cfg.dataset.seed);
  } else {
    cfg.dataset.kind = DatasetSpec::Kind::csv;
    cfg.dataset.train_csv = ds.at("train_csv").get<std::string>();
    cfg.dataset.test_csv = ds.at("test_csv").get<std::string>();
    cfg.dataset.validation_csv = ds.at("validation_csv").get<std::string>();
  }
  if (j.contains("split")) {
    const json& sp = j.at("split");
    cfg.split.train_frac = sp.value("train_frac", cfg.split.train_frac);
    cfg.split.test_frac = sp.value("test_frac", cfg.split.test_frac);
    cfg.split.seed = sp.value("seed", cfg.split.seed);
  }
  cfg.algorithm = algo_from_name(j.value("algorithm", std::string("lr")));
  if (j.contains("lr")) cfg.lr = lr_hyper_from_json(j.at("lr"));
  if (j.contains("gbdt")) cfg.gbdt = gbdt_hyper_from_json(j.at("gbdt"));
  cfg.noise = noise_spec_from_json(j.at("noise"));
  if (j.contains("prior")) cfg.prior = prior_from_json(j.at("prior"));
  cfg.num_tests = j.value("num_tests", cfg.num_tests);
  const std::string agg =
      j.value("multi_test_aggregator", std::string("conjunction"));
  if (agg == "average") {
    cfg.aggregator = MultiTestAggregator::average;
  } else if (agg == "conjunction") {
    cfg.aggregator = MultiTestAggregator::conjunction;
  } else {
    throw DocumentError("multi_test_aggregator must be conjunction|average");
  }
  if (j.contains("threshold")) cfg.threshold = j.at("threshold").get<double>();
  if (j.contains("top_k")) cfg.top_k = j.at("top_k").get<std::size_t>();
  cfg.min_trials = j.value("min_trials", cfg.min_trials);
  cfg.include_sweep = j.value("include_sweep", cfg.include_sweep);
  if (j.contains("multi_test_ks")) {
    cfg.multi_test_ks = j.at("multi_test_ks").get<std::vector<std::size_t>>();
  }
  return cfg;
}

inline WorkflowConfig load_workflow_config(const std::string& path) {
  return workflow_config_from_json(read_document(path));
}

// ---------------------------------------------------------------------------
// Eval reports and curves
// ---------------------------------------------------------------------------

/// Serialized without runtime_seconds: identical configurations must produce
/// byte-identical report files regardless of wall clock or thread count.
inline json to_document(const EvalReport& report, const WorkflowConfig& cfg) {
  json doc = detail::document_header("eval_report");
  doc["config"] = to_json(cfg);
  if (report.precision_defined) {
    doc["precision"] = report.precision;
    doc["recall"] = report.recall;
  } else {
    doc["precision"] = nullptr;
    doc["recall"] = nullptr;
  }
  doc["validation_errors"] = json{{"clean", report.validation_errors[0]},
                                  {"noisy", report.validation_errors[1]},
                                  {"fixed", report.validation_errors[2]}};
  doc["new_misclassifications"] = report.new_misclassifications;
  doc["suggested_causes"] = report.suggested_causes;
  doc["injected_flips"] = report.injected_flips;
  doc["diagnostic"] = report.diagnostic;
  if (!report.sweep_curve.empty()) {
    json curve = json::array();
    for (const SweepPoint& p : report.sweep_curve) {
      curve.push_back(json{{"tau", p.tau},
                           {"flips", p.flips},
                           {"validation_error", p.validation_error}});
    }
    doc["sweep_curve"] = std::move(curve);
  }
  if (!report.multi_test_curve.empty()) {
    json curve = json::array();
    for (const CurvePoint& p : report.multi_test_curve) {
      curve.push_back(json{{"k", p.k}, {"precision", p.precision}});
    }
    doc["multi_test_curve"] = std::move(curve);
  }
  return doc;
}

inline void write_sweep_csv(const std::vector<SweepPoint>& curve,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DocumentError("cannot open '" + path + "' for writing");
  out << "tau,flips,validation_error\n";
  for (const SweepPoint& p : curve) {
    out << detail::format_double(p.tau) << "," << p.flips << ","
        << detail::format_double(p.validation_error) << "\n";
  }
}

inline void write_curve_csv(const std::vector<CurvePoint>& curve,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DocumentError("cannot open '" + path + "' for writing");
  out << "k,precision\n";
  for (const CurvePoint& p : curve) {
    out << p.k << "," << detail::format_double(p.precision) << "\n";
  }
}

}  // namespace psdebug

#endif  // PSDEBUG_IO_HPP
