#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "wdro/data.hpp"
#include "wdro/errors.hpp"

namespace wdro {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Linear classifier x -> sign(<w, x> + b).
struct Hyperplane {
  Vector w;
  double b = 0.0;

  Hyperplane() = default;
  Hyperplane(Vector w_, double b_) : w(std::move(w_)), b(b_) {}

  /// Stacked (w, b) as a (d+1)-vector.
  Vector stacked() const {
    Vector x(w.size() + 1);
    x << w, b;
    return x;
  }

  static Hyperplane from_stacked(const Vector& x) {
    return Hyperplane(x.head(x.size() - 1), x[x.size() - 1]);
  }

  Hyperplane scaled(double alpha) const { return Hyperplane(alpha * w, alpha * b); }

  /// The canonical separator of the synthetic data: w = e_1, b = 0.
  static Hyperplane canonical(Eigen::Index d) {
    Vector w = Vector::Zero(d);
    w[0] = 1.0;
    return Hyperplane(std::move(w), 0.0);
  }
};

/// Euclidean distance from (x, y) to the set of points w misclassifies:
/// max{0, y(<w,x> + b)} / |w|, and for w = 0 either +inf (y b > 0) or 0.
template <typename Point>
double distance(const Hyperplane& h, const Eigen::MatrixBase<Point>& x, double y) {
  const double norm = h.w.norm();
  if (norm == 0.0) return y * h.b > 0.0 ? kInfinity : 0.0;
  return std::max(0.0, y * (h.w.dot(x) + h.b)) / norm;
}

/// Distance of every dataset point; entries may be +inf when w = 0.
inline Vector distances(const Dataset& ds, const Hyperplane& h) {
  require(h.w.size() == ds.dim(), "hyperplane dimension does not match dataset");
  Vector out(ds.size());
  for (Eigen::Index i = 0; i < ds.size(); ++i) out[i] = distance(h, ds.point(i), ds.label(i));
  return out;
}

/// Points with d(w, xi) below this are treated as misclassified.
inline double zero_distance_tolerance(double point_norm) { return 1e-12 * (1.0 + point_norm); }

/// Misclassified index set I(w), margin eta(w) on the remaining points and
/// the probability mass of I(w).
struct MarginProfile {
  std::vector<Eigen::Index> misclassified;
  double eta = kInfinity;
  double misclass_mass = 0.0;
};

inline MarginProfile margin_profile(const Hyperplane& h, const Dataset& ds) {
  const Vector dist = distances(ds, h);
  MarginProfile profile;
  std::vector<double> mass;
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    if (dist[i] <= zero_distance_tolerance(ds.point(i).norm())) {
      profile.misclassified.push_back(i);
      mass.push_back(ds.weight(i));
    } else {
      profile.eta = std::min(profile.eta, dist[i]);
    }
  }
  profile.misclass_mass = detail::compensated_sum(mass);
  return profile;
}

/// Number of points with y(<w,x> + b) <= 0.
inline Eigen::Index misclassified_count(const Dataset& ds, const Hyperplane& h) {
  const Vector scores = (ds.points() * h.w).array() + h.b;
  return (ds.labels().array() * scores.array() <= 0.0).count();
}

struct GeneralizedMargin {
  double rho_star = 1.0;    // least misclassified mass over the candidates
  double gamma_star = 0.0;  // best margin among candidates attaining rho_star
  double rho_bar = 1.0;     // least subset mass strictly above rho_star
  std::vector<std::size_t> optimal;  // candidates attaining (rho_star, gamma_star)
};

namespace detail {

inline constexpr double kMassTieTolerance = 1e-12;

// Smallest subset-weight sum strictly above `floor`, by enumeration of all
// 2^n subsets. Each sum is accumulated in descending-weight order.
inline double least_subset_mass_above(std::span<const double> weights, double floor) {
  std::vector<double> sorted(weights.begin(), weights.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const std::size_t n = sorted.size();
  double best = kInfinity;
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << n); ++mask) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (mask >> j & 1U) sum += sorted[j];
    if (sum > floor + kMassTieTolerance && sum < best) best = sum;
  }
  return best;
}

}  // namespace detail

/// Generalized maximum margin over an explicit finite set of classifiers.
///
/// rho_bar is exact (all subsets) for n <= 20; for 20 < n <= 30 it is taken
/// over the candidates' misclassified masses and their single-point
/// increments. Larger n is rejected.
inline GeneralizedMargin generalized_margin(const Dataset& ds, std::span<const Hyperplane> candidates) {
  require(!candidates.empty(), "generalized_margin needs at least one candidate");
  require(ds.size() <= 30, "generalized_margin supports at most 30 points");

  std::vector<MarginProfile> profiles;
  profiles.reserve(candidates.size());
  for (const auto& h : candidates) profiles.push_back(margin_profile(h, ds));

  GeneralizedMargin out;
  out.rho_star = kInfinity;
  for (const auto& p : profiles) out.rho_star = std::min(out.rho_star, p.misclass_mass);
  out.gamma_star = -kInfinity;
  for (std::size_t k = 0; k < profiles.size(); ++k) {
    if (profiles[k].misclass_mass > out.rho_star + detail::kMassTieTolerance) continue;
    if (profiles[k].eta > out.gamma_star) {
      out.gamma_star = profiles[k].eta;
      out.optimal.assign(1, k);
    } else if (profiles[k].eta == out.gamma_star) {
      out.optimal.push_back(k);
    }
  }

  std::vector<double> weights(ds.weights().data(), ds.weights().data() + ds.size());
  if (ds.size() <= 20) {
    out.rho_bar = detail::least_subset_mass_above(weights, out.rho_star);
  } else {
    out.rho_bar = kInfinity;
    auto consider = [&](double m) {
      if (m > out.rho_star + detail::kMassTieTolerance) out.rho_bar = std::min(out.rho_bar, m);
    };
    for (const auto& p : profiles) {
      consider(p.misclass_mass);
      std::vector<bool> in(weights.size(), false);
      for (auto i : p.misclassified) in[static_cast<std::size_t>(i)] = true;
      for (std::size_t j = 0; j < weights.size(); ++j)
        if (!in[j]) consider(p.misclass_mass + weights[j]);
    }
  }
  return out;
}

/// Sine of the angle between two nonzero vectors.
inline double sin_angle(const Vector& u, const Vector& v) {
  require(u.size() == v.size(), "sin_angle: dimension mismatch");
  const double uu = u.squaredNorm();
  const double vv = v.squaredNorm();
  require(uu > 0.0 && vv > 0.0, "sin_angle: zero vector");
  const double uv = u.dot(v);
  return std::sqrt(std::max(0.0, 1.0 - uv * uv / (uu * vv)));
}

}  // namespace wdro
