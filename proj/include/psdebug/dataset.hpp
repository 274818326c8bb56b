#ifndef PSDEBUG_DATASET_HPP
#define PSDEBUG_DATASET_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "psdebug/rng.hpp"

namespace psdebug {

/// One training or test instance: a feature vector and a label in {-1, +1}.
struct LabeledPoint {
  std::vector<double> features;
  int label = 1;

  bool operator==(const LabeledPoint&) const = default;
};

inline bool valid_label(int label) { return label == -1 || label == 1; }

/// Ordered, fixed-dimension collection of labeled points. Indices are stable:
/// point i keeps index i across label mutation, which is what ties noise
/// records, PS estimates, and suggested causes together.
///
/// Immutable after construction except through the copy-and-mutate helpers,
/// so datasets can be shared freely across threads.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::size_t dim) : dim_(dim) {}

  Dataset(std::size_t dim, std::vector<LabeledPoint> points) : dim_(dim) {
    points_.reserve(points.size());
    for (auto& p : points) add(std::move(p));
  }

  std::size_t size() const { return points_.size(); }
  std::size_t dim() const { return dim_; }
  bool empty() const { return points_.empty(); }

  const LabeledPoint& point(std::size_t i) const { return points_.at(i); }
  const LabeledPoint& operator[](std::size_t i) const { return points_[i]; }
  const std::vector<LabeledPoint>& points() const { return points_; }

  int label(std::size_t i) const { return points_.at(i).label; }

  std::vector<int> labels() const {
    std::vector<int> out(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) out[i] = points_[i].label;
    return out;
  }

  void add(LabeledPoint point) {
    if (point.features.size() != dim_) {
      throw std::invalid_argument("dataset: point dimension " +
                                  std::to_string(point.features.size()) +
                                  " does not match dataset dim " +
                                  std::to_string(dim_));
    }
    if (!valid_label(point.label)) {
      throw std::invalid_argument("dataset: label must be -1 or +1, got " +
                                  std::to_string(point.label));
    }
    for (double f : point.features) {
      if (!std::isfinite(f)) {
        throw std::invalid_argument("dataset: non-finite feature value");
      }
    }
    points_.push_back(std::move(point));
  }

  /// Copy with one label replaced.
  Dataset with_label(std::size_t index, int new_label) const {
    Dataset out = *this;
    if (index >= out.points_.size()) {
      throw std::out_of_range("with_label: index out of range");
    }
    if (!valid_label(new_label)) {
      throw std::invalid_argument("with_label: label must be -1 or +1");
    }
    out.points_[index].label = new_label;
    return out;
  }

  /// Copy with the labels at `indices` negated.
  Dataset with_flipped(const std::vector<std::size_t>& indices) const {
    Dataset out = *this;
    for (std::size_t i : indices) {
      if (i >= out.points_.size()) {
        throw std::out_of_range("with_flipped: index out of range");
      }
      out.points_[i].label = -out.points_[i].label;
    }
    return out;
  }

  bool operator==(const Dataset&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<LabeledPoint> points_;
};

// ---------------------------------------------------------------------------
// Noise injection
// ---------------------------------------------------------------------------

/// Predicate over feature vectors used by systematic noise: a single feature
/// compared against a threshold (greater-than) or an exact value.
struct FeatureSelector {
  enum class Kind { greater_than, equals };

  std::size_t feature = 0;
  Kind kind = Kind::greater_than;
  double value = 0.0;

  bool matches(const std::vector<double>& x) const {
    const double v = x.at(feature);
    return kind == Kind::greater_than ? v > value : v == value;
  }

  std::string describe() const {
    return "f" + std::to_string(feature + 1) +
           (kind == Kind::greater_than ? " > " : " == ") + std::to_string(value);
  }
};

enum class NoiseMode { random, systematic };

struct NoiseSpec {
  NoiseMode mode = NoiseMode::random;
  double rate = 0.1;  // used in random mode only, in [0, 0.5]
  std::optional<FeatureSelector> selector;  // required in systematic mode
  std::optional<int> forced_label;          // required in systematic mode
  std::uint64_t seed = 0;
};

/// Ground truth for the precision metric: which indices were corrupted and
/// what they said before. Parallel arrays sorted ascending by index.
struct NoiseRecord {
  std::vector<std::size_t> flipped_indices;
  std::vector<int> original_labels;

  std::size_t count() const { return flipped_indices.size(); }

  bool contains(std::size_t index) const {
    return std::binary_search(flipped_indices.begin(), flipped_indices.end(),
                              index);
  }
};

class EmptySelectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Corrupts labels per the spec. Random mode flips exactly round(rate*N)
/// uniformly chosen labels. Systematic mode forces the label of every
/// selected point and records only the points that actually changed.
inline std::pair<Dataset, NoiseRecord> inject_noise(const Dataset& ds,
                                                    const NoiseSpec& spec) {
  NoiseRecord record;
  Dataset noisy = ds;

  if (spec.mode == NoiseMode::random) {
    if (spec.rate < 0.0 || spec.rate > 0.5) {
      throw std::invalid_argument("inject_noise: rate must be in [0, 0.5]");
    }
    const auto n_flips = static_cast<std::size_t>(
        std::llround(spec.rate * static_cast<double>(ds.size())));
    if (n_flips < 1) {
      throw std::invalid_argument(
          "inject_noise: random mode needs rate*N >= 1");
    }
    // Partial Fisher-Yates: the first n_flips entries are a uniform sample.
    std::vector<std::size_t> order(ds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    RandomStream rng(spec.seed);
    for (std::size_t i = 0; i < n_flips; ++i) {
      const std::size_t j =
          i + static_cast<std::size_t>(rng.uniform_below(order.size() - i));
      std::swap(order[i], order[j]);
    }
    std::vector<std::size_t> flips(order.begin(),
                                   order.begin() + static_cast<long>(n_flips));
    std::sort(flips.begin(), flips.end());
    for (std::size_t i : flips) {
      record.flipped_indices.push_back(i);
      record.original_labels.push_back(ds.label(i));
    }
    noisy = ds.with_flipped(flips);
  } else {
    if (!spec.selector || !spec.forced_label) {
      throw std::invalid_argument(
          "inject_noise: systematic mode requires selector and forced_label");
    }
    if (!valid_label(*spec.forced_label)) {
      throw std::invalid_argument("inject_noise: forced_label must be -1 or +1");
    }
    std::size_t matched = 0;
    std::vector<std::size_t> changed;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (!spec.selector->matches(ds.point(i).features)) continue;
      ++matched;
      if (ds.label(i) != *spec.forced_label) changed.push_back(i);
    }
    if (matched == 0) {
      throw EmptySelectionError("inject_noise: selector " +
                                spec.selector->describe() +
                                " matches no points");
    }
    for (std::size_t i : changed) {
      record.flipped_indices.push_back(i);
      record.original_labels.push_back(ds.label(i));
    }
    noisy = ds.with_flipped(changed);
  }
  return {std::move(noisy), std::move(record)};
}

/// Undoes a noise record; inject_noise followed by restore is the identity.
inline Dataset restore_labels(const Dataset& ds, const NoiseRecord& record) {
  Dataset out = ds;
  for (std::size_t j = 0; j < record.flipped_indices.size(); ++j) {
    out = out.with_label(record.flipped_indices[j], record.original_labels[j]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generators
// ---------------------------------------------------------------------------

/// Two isotropic unit-variance Gaussians on the x-axis, centers at
/// (-separation/2, 0) and (+separation/2, 0). First half labeled -1, second
/// half +1.
inline Dataset gen_2gauss(std::size_t n_points, double separation,
                          std::uint64_t seed) {
  if (n_points < 2) {
    throw std::invalid_argument("gen_2gauss: need at least 2 points");
  }
  if (separation <= 0.0) {
    throw std::invalid_argument("gen_2gauss: separation must be positive");
  }
  Dataset ds(2);
  RandomStream rng(seed);
  const std::size_t n_neg = n_points / 2;
  for (std::size_t i = 0; i < n_points; ++i) {
    const bool neg = i < n_neg;
    const double cx = neg ? -separation / 2.0 : separation / 2.0;
    LabeledPoint p;
    p.features = {cx + rng.normal(), rng.normal()};
    p.label = neg ? -1 : 1;
    ds.add(std::move(p));
  }
  return ds;
}

/// Two rings: label -1 at radii around inner_radius, +1 around outer_radius.
/// Angles uniform, radii Gaussian-perturbed with a fixed 0.35 std so the
/// classes overlap enough that a linear separator is near-useless.
inline Dataset gen_concentric(std::size_t n_points, double inner_radius,
                              double outer_radius, std::uint64_t seed) {
  if (n_points < 2) {
    throw std::invalid_argument("gen_concentric: need at least 2 points");
  }
  if (inner_radius >= outer_radius) {
    throw std::invalid_argument(
        "gen_concentric: inner_radius must be < outer_radius");
  }
  constexpr double kRadialStd = 0.35;
  constexpr double kTwoPi = 2.0 * 3.14159265358979323846;
  Dataset ds(2);
  RandomStream rng(seed);
  const std::size_t n_inner = n_points / 2;
  for (std::size_t i = 0; i < n_points; ++i) {
    const bool inner = i < n_inner;
    const double target = inner ? inner_radius : outer_radius;
    const double r = target + kRadialStd * rng.normal();
    const double angle = kTwoPi * rng.uniform();
    LabeledPoint p;
    p.features = {r * std::cos(angle), r * std::sin(angle)};
    p.label = inner ? -1 : 1;
    ds.add(std::move(p));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Split
// ---------------------------------------------------------------------------

struct SplitResult {
  Dataset train;
  Dataset test;
  Dataset validation;
};

/// Disjoint shuffled partition into train/test/validation. Sizes are
/// round(frac * N) for train and test; validation takes the remainder.
inline SplitResult split(const Dataset& ds, double train_frac,
                         double test_frac, std::uint64_t seed) {
  if (train_frac <= 0.0 || test_frac <= 0.0 ||
      train_frac + test_frac >= 1.0) {
    throw std::invalid_argument(
        "split: fractions must be positive with train_frac + test_frac < 1");
  }
  std::vector<std::size_t> order(ds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  RandomStream rng(seed);
  shuffle(order, rng);

  const auto n = static_cast<double>(ds.size());
  const auto n_train = static_cast<std::size_t>(std::llround(train_frac * n));
  const auto n_test = static_cast<std::size_t>(std::llround(test_frac * n));
  if (n_train + n_test > ds.size()) {
    throw std::invalid_argument("split: rounded sizes exceed dataset size");
  }

  SplitResult out{Dataset(ds.dim()), Dataset(ds.dim()), Dataset(ds.dim())};
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const LabeledPoint& p = ds.point(order[i]);
    if (i < n_train) {
      out.train.add(p);
    } else if (i < n_train + n_test) {
      out.test.add(p);
    } else {
      out.validation.add(p);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV persistence
// ---------------------------------------------------------------------------

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const int len = std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}

inline double parse_feature(const std::string& token, const std::string& path,
                            std::size_t line_no) {
  double value = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw CsvError(path + ":" + std::to_string(line_no) +
                   ": non-numeric feature value '" + token + "'");
  }
  return value;
}

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

/// Schema: header `f1,...,fn,label`, one row per point, label -1 or 1.
inline void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CsvError("save_csv: cannot open '" + path + "' for writing");
  for (std::size_t j = 0; j < ds.dim(); ++j) out << "f" << (j + 1) << ",";
  out << "label\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const LabeledPoint& p = ds.point(i);
    for (double f : p.features) out << detail::format_double(f) << ",";
    out << p.label << "\n";
  }
  if (!out) throw CsvError("save_csv: write to '" + path + "' failed");
}

inline Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("load_csv: cannot open '" + path + "'");

  std::string line;
  std::size_t line_no = 0;

  if (!std::getline(in, line)) {
    throw CsvError(path + ":1: missing header");
  }
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = detail::split_line(line);
  if (header.size() < 2 || header.back() != "label") {
    throw CsvError(path + ":1: malformed header, expected f1,...,fn,label");
  }
  const std::size_t dim = header.size() - 1;
  for (std::size_t j = 0; j < dim; ++j) {
    if (header[j] != "f" + std::to_string(j + 1)) {
      throw CsvError(path + ":1: malformed header column '" + header[j] + "'");
    }
  }

  Dataset ds(dim);
  bool saw_blank = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {  // only legal as trailing whitespace
      saw_blank = true;
      continue;
    }
    if (saw_blank) {
      throw CsvError(path + ":" + std::to_string(line_no - 1) +
                     ": blank line inside data");
    }
    auto tokens = detail::split_line(line);
    if (tokens.size() != dim + 1) {
      throw CsvError(path + ":" + std::to_string(line_no) + ": expected " +
                     std::to_string(dim + 1) + " columns, got " +
                     std::to_string(tokens.size()));
    }
    LabeledPoint p;
    p.features.reserve(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      p.features.push_back(detail::parse_feature(tokens[j], path, line_no));
    }
    const std::string& lab = tokens[dim];
    if (lab == "1") {
      p.label = 1;
    } else if (lab == "-1") {
      p.label = -1;
    } else {
      throw CsvError(path + ":" + std::to_string(line_no) +
                     ": label must be -1 or 1, got '" + lab + "'");
    }
    ds.add(std::move(p));
  }
  return ds;
}

}  // namespace psdebug

#endif  // PSDEBUG_DATASET_HPP
