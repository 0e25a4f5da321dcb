#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wdro/errors.hpp"
#include "wdro/rng.hpp"

namespace wdro {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

// Neumaier-compensated sum; keeps uniform 1/n weights summing to 1 within
// a few ulps for any practical n.
template <typename Range>
double compensated_sum(const Range& values) {
  double sum = 0.0;
  double carry = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      carry += (sum - t) + v;
    else
      carry += (v - t) + sum;
    sum = t;
  }
  return sum + carry;
}

}  // namespace detail

/// Finite-support distribution sum_i p_i delta_{(x_i, y_i)}.
///
/// Immutable after construction. Rows of `points` are feature vectors,
/// `labels` holds +1/-1, and `weights` are positive and sum to one.
class Dataset {
 public:
  Dataset(Matrix points, Vector labels, Vector weights)
      : points_(std::move(points)), labels_(std::move(labels)), weights_(std::move(weights)) {
    validate();
  }

  /// Dataset with uniform weights 1/n.
  static Dataset uniform(Matrix points, Vector labels) {
    const auto n = points.rows();
    Vector weights = Vector::Constant(n, n > 0 ? 1.0 / static_cast<double>(n) : 0.0);
    return Dataset(std::move(points), std::move(labels), std::move(weights));
  }

  Eigen::Index size() const { return points_.rows(); }
  Eigen::Index dim() const { return points_.cols(); }

  const Matrix& points() const { return points_; }
  const Vector& labels() const { return labels_; }
  const Vector& weights() const { return weights_; }

  auto point(Eigen::Index i) const { return points_.row(i); }
  double label(Eigen::Index i) const { return labels_[i]; }
  double weight(Eigen::Index i) const { return weights_[i]; }

  /// Copy with labels replaced; points and weights unchanged.
  Dataset with_labels(Vector labels) const { return Dataset(points_, std::move(labels), weights_); }
  Dataset with(Matrix points, Vector labels) const {
    return Dataset(std::move(points), std::move(labels), weights_);
  }

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.points_ == b.points_ && a.labels_ == b.labels_ && a.weights_ == b.weights_;
  }

 private:
  void validate() const {
    const auto n = points_.rows();
    require(n >= 1, "dataset must contain at least one point");
    require(points_.cols() >= 1, "dataset must have dimension at least one");
    require(labels_.size() == n, "label count does not match point count");
    require(weights_.size() == n, "weight count does not match point count");
    require(points_.allFinite(), "dataset points must be finite");
    for (Eigen::Index i = 0; i < n; ++i) {
      require(labels_[i] == 1.0 || labels_[i] == -1.0,
              "label of point " + std::to_string(i) + " is not +1 or -1");
      require(weights_[i] > 0.0 && std::isfinite(weights_[i]),
              "weight of point " + std::to_string(i) + " is not positive");
    }
    const double total = detail::compensated_sum(weights_);
    require(std::abs(total - 1.0) <= 1e-12, "weights must sum to 1");
  }

  Matrix points_;
  Vector labels_;
  Vector weights_;
};

enum class CorruptionKind { FlipLabels, InjectAdversarial };

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::FlipLabels;
  double fraction = 0.0;
  std::uint64_t seed = 0;
};

/// Number of points touched by a corruption of the given fraction:
/// floor(fraction * n), with a 1e-9 guard so that e.g. 0.29 * 100 gives 29.
inline Eigen::Index corrupted_count(double fraction, Eigen::Index n) {
  return static_cast<Eigen::Index>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

namespace detail {

inline void check_fraction(double fraction) {
  require(std::isfinite(fraction) && fraction >= 0.0 && fraction <= 0.5,
          "corruption fraction must lie in [0, 0.5]");
}

// k distinct indices from [0, n), by a partial Fisher-Yates shuffle.
inline std::vector<Eigen::Index> choose_indices(Eigen::Index n, Eigen::Index k, Rng& rng) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  for (Eigen::Index i = 0; i < k; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, n - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng.engine()))]);
  }
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

}  // namespace detail

/// n points uniform on [-10, 10]^d labelled by the sign of the first
/// coordinate. A point whose first coordinate is exactly zero is redrawn.
inline Dataset generate_separable(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  require(n >= 1 && d >= 1, "generate_separable needs n >= 1 and d >= 1");
  Rng rng(seed, streams::kGenerate);
  Matrix points(n, d);
  Vector labels(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    do {
      for (Eigen::Index j = 0; j < d; ++j) points(i, j) = rng.uniform(-10.0, 10.0);
    } while (points(i, 0) == 0.0);
    labels[i] = points(i, 0) > 0.0 ? 1.0 : -1.0;
  }
  return Dataset::uniform(std::move(points), std::move(labels));
}

/// Negates the labels of floor(fraction * n) uniformly chosen points.
inline Dataset flip_labels(const Dataset& ds, double fraction, std::uint64_t seed) {
  detail::check_fraction(fraction);
  Rng rng(seed, streams::kFlip);
  Vector labels = ds.labels();
  for (auto i : detail::choose_indices(ds.size(), corrupted_count(fraction, ds.size()), rng))
    labels[i] = -labels[i];
  return ds.with_labels(std::move(labels));
}

/// Indices that inject_adversarial(ds, fraction, seed) modifies for a
/// dataset of n points.
inline std::vector<Eigen::Index> adversarial_indices(Eigen::Index n, double fraction, std::uint64_t seed) {
  detail::check_fraction(fraction);
  Rng rng(seed, streams::kInject);
  return detail::choose_indices(n, corrupted_count(fraction, n), rng);
}

/// Moves floor(fraction * n) uniformly chosen points to x_1 = -10 with
/// label +1, i.e. far on the wrong side of the canonical hyperplane x_1 = 0.
inline Dataset inject_adversarial(const Dataset& ds, double fraction, std::uint64_t seed) {
  Matrix points = ds.points();
  Vector labels = ds.labels();
  for (auto i : adversarial_indices(ds.size(), fraction, seed)) {
    points(i, 0) = -10.0;
    labels[i] = 1.0;
  }
  return ds.with(std::move(points), std::move(labels));
}

inline Dataset corrupt(const Dataset& ds, const CorruptionSpec& spec) {
  return spec.kind == CorruptionKind::FlipLabels ? flip_labels(ds, spec.fraction, spec.seed)
                                                 : inject_adversarial(ds, spec.fraction, spec.seed);
}

// ---------------------------------------------------------------------------
// CSV: header "x1,...,xd,y[,p]", one point per line, 17 significant digits.

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string_view::npos ? comma : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double parse_number(std::string_view field, std::size_t line_no) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size())
    throw IoError("line " + std::to_string(line_no) + ": malformed number '" + std::string(field) + "'");
  return value;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Parses a dataset from CSV text. A missing `p` column means uniform
/// weights. Errors name the offending line (the header is line 1).
inline Dataset parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty CSV input: missing header");
  const auto header = detail::split_commas(detail::trim(line));
  std::size_t d = 0;
  while (d < header.size() && detail::trim(header[d]) == "x" + std::to_string(d + 1)) ++d;
  if (d == 0 || d >= header.size() || detail::trim(header[d]) != "y")
    throw IoError("line 1: header must be x1,...,xd,y[,p]");
  bool has_weights = false;
  if (header.size() == d + 2) {
    if (detail::trim(header[d + 1]) != "p") throw IoError("line 1: last header column must be p");
    has_weights = true;
  } else if (header.size() != d + 1) {
    throw IoError("line 1: header must be x1,...,xd,y[,p]");
  }
  const std::size_t columns = header.size();

  std::vector<double> coords, labels, weights;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_commas(detail::trim(line));
    if (fields.size() != columns)
      throw IoError("line " + std::to_string(line_no) + ": expected " + std::to_string(columns) +
                    " columns, found " + std::to_string(fields.size()));
    for (std::size_t j = 0; j < d; ++j) coords.push_back(detail::parse_number(fields[j], line_no));
    const double y = detail::parse_number(fields[d], line_no);
    if (y != 1.0 && y != -1.0)
      throw IoError("line " + std::to_string(line_no) + ": label must be +1 or -1");
    labels.push_back(y);
    if (has_weights) {
      const double p = detail::parse_number(fields[d + 1], line_no);
      if (!(p > 0.0)) throw IoError("line " + std::to_string(line_no) + ": weight must be positive");
      weights.push_back(p);
    }
  }
  const auto n = static_cast<Eigen::Index>(labels.size());
  if (n == 0) throw IoError("CSV contains no data rows");
  Matrix points = Eigen::Map<Matrix>(coords.data(), n, static_cast<Eigen::Index>(d));
  Vector y = Eigen::Map<Vector>(labels.data(), n);
  try {
    if (!has_weights) return Dataset::uniform(std::move(points), std::move(y));
    return Dataset(std::move(points), std::move(y), Eigen::Map<Vector>(weights.data(), n));
  } catch (const ValidationError& e) {
    throw IoError(std::string("invalid dataset: ") + e.what());
  }
}

inline void write_csv(std::ostream& out, const Dataset& ds, bool include_weights = true) {
  for (Eigen::Index j = 0; j < ds.dim(); ++j) out << 'x' << (j + 1) << ',';
  out << 'y' << (include_weights ? ",p" : "") << '\n';
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    for (Eigen::Index j = 0; j < ds.dim(); ++j) out << detail::format_double(ds.points()(i, j)) << ',';
    out << (ds.label(i) > 0 ? "1" : "-1");
    if (include_weights) out << ',' << detail::format_double(ds.weight(i));
    out << '\n';
  }
}

inline Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return parse_csv(in);
}

inline void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_csv(out, ds);
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace wdro
