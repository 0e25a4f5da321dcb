#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "wdro/data.hpp"
#include "wdro/geometry.hpp"

namespace wdro {

/// Worst-case misclassification probability over the Wasserstein ball and
/// the dual multiplier that attains it. t_star = +inf encodes the limit
/// t -> inf (radius zero); t_star = 0 encodes the limit t -> 0+.
struct WorstCaseResult {
  double value = 0.0;
  double t_star = 0.0;
};

/// sup_t { rho t + E[min{0, d - t}] } and the maximizing t; `value` is that
/// supremum divided by rho, i.e. CVaR_rho of the distance.
struct CvarResult {
  double value = 0.0;
  double scaled = 0.0;  // rho * CVaR_rho
  double t = 0.0;
};

namespace detail {

// Finite distances, zeros snapped to exactly 0 with the same tolerance used
// for the misclassified set, plus their weights. Infinite distances are
// dropped: for every t > 0 they contribute nothing to either objective.
struct DistanceTable {
  std::vector<double> d;  // ascending
  std::vector<double> p;
};

inline DistanceTable distance_table(const Dataset& ds, const Hyperplane& h) {
  const Vector dist = distances(ds, h);
  std::vector<Eigen::Index> order;
  order.reserve(static_cast<std::size_t>(ds.size()));
  for (Eigen::Index i = 0; i < ds.size(); ++i)
    if (std::isfinite(dist[i])) order.push_back(i);
  std::vector<double> snapped(static_cast<std::size_t>(ds.size()), 0.0);
  for (auto i : order)
    snapped[static_cast<std::size_t>(i)] =
        dist[i] <= zero_distance_tolerance(ds.point(i).norm()) ? 0.0 : dist[i];
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return snapped[static_cast<std::size_t>(a)] < snapped[static_cast<std::size_t>(b)];
  });
  DistanceTable table;
  for (auto i : order) {
    table.d.push_back(snapped[static_cast<std::size_t>(i)]);
    table.p.push_back(ds.weight(i));
  }
  return table;
}

inline void check_epsilon(double epsilon) {
  require(std::isfinite(epsilon) && epsilon >= 0.0, "epsilon must be a finite nonnegative number");
}

inline void check_rho(double rho) {
  require(rho > 0.0 && rho < 1.0, "rho must lie strictly between 0 and 1");
}

}  // namespace detail

/// Minimizes the convex piecewise-linear dual
///   phi(t) = eps t + sum_i p_i max{0, 1 - t d_i},  t > 0,
/// exactly, by evaluating every breakpoint t = 1/d_i and the limit t -> 0+.
/// At eps = 0 the infimum is the limit t -> inf, the nominal misclassified mass.
inline WorstCaseResult worst_case_prob_dual(const Dataset& ds, const Hyperplane& h, double epsilon) {
  detail::check_epsilon(epsilon);
  const auto table = detail::distance_table(ds, h);
  const std::size_t m = table.d.size();

  std::size_t first_positive = 0;
  while (first_positive < m && table.d[first_positive] == 0.0) ++first_positive;
  const double zero_mass = detail::compensated_sum(std::span(table.p).first(first_positive));
  if (epsilon == 0.0) return {zero_mass, kInfinity};

  // t -> 0+: every finite-distance point contributes its full weight.
  WorstCaseResult best{detail::compensated_sum(table.p), 0.0};

  // phi(1/d_k) = eps/d_k + zero_mass + sum_{d_j < d_k} p_j (1 - d_j/d_k).
  double mass_below = 0.0;   // sum of p_j with 0 < d_j < d_k
  double moment_below = 0.0; // sum of p_j d_j over the same points
  std::size_t k = first_positive;
  while (k < m) {
    const double dk = table.d[k];
    const double value = epsilon / dk + zero_mass + (mass_below - moment_below / dk);
    if (value < best.value) best = {value, 1.0 / dk};
    // Ties at d_k contribute zero at t = 1/d_k; fold them in afterwards.
    for (; k < m && table.d[k] == dk; ++k) {
      mass_below += table.p[k];
      moment_below += table.p[k] * table.d[k];
    }
  }
  best.value = std::min(best.value, 1.0);
  return best;
}

/// The same worst-case probability as the primal fractional knapsack
///   max sum v_i  s.t. 0 <= v_i <= p_i, sum d_i v_i <= eps,
/// solved greedily in increasing order of d_i.
inline double worst_case_prob_knapsack(const Dataset& ds, const Hyperplane& h, double epsilon) {
  detail::check_epsilon(epsilon);
  const auto table = detail::distance_table(ds, h);
  std::vector<double> taken;
  double budget = epsilon;
  for (std::size_t k = 0; k < table.d.size(); ++k) {
    if (table.d[k] == 0.0) {
      taken.push_back(table.p[k]);
      continue;
    }
    if (budget <= 0.0) break;
    const double v = std::min(table.p[k], budget / table.d[k]);
    taken.push_back(v);
    budget -= v * table.d[k];
  }
  return std::min(1.0, detail::compensated_sum(taken));
}

/// CVaR_rho of the distance to misclassification, low values being risky:
///   sup_{t > 0} { t + (1/rho) E[min{0, d - t}] }.
/// The concave objective is maximized over its breakpoints t = d_i; the
/// left-most maximizer is reported. Returns +inf when the points at finite
/// distance carry less than rho of the mass.
inline CvarResult cvar_distance(const Dataset& ds, const Hyperplane& h, double rho) {
  detail::check_rho(rho);
  const auto table = detail::distance_table(ds, h);
  const std::size_t m = table.d.size();

  CvarResult best{0.0, 0.0, 0.0};  // limit t -> 0+
  double mass_below = 0.0;
  double moment_below = 0.0;
  std::size_t k = 0;
  while (k < m) {
    const double dk = table.d[k];
    if (dk > 0.0) {
      // rho d_k + sum_{d_j < d_k} p_j (d_j - d_k)
      const double scaled = rho * dk - dk * mass_below + moment_below;
      if (scaled > best.scaled) best = {0.0, scaled, dk};
    }
    for (; k < m && table.d[k] == dk; ++k) {
      mass_below += table.p[k];
      moment_below += table.p[k] * table.d[k];
    }
  }
  if (rho > mass_below && mass_below < 1.0 - 1e-15) {
    // Beyond the last finite breakpoint the slope rho - mass_below stays positive.
    best = {kInfinity, kInfinity, kInfinity};
    return best;
  }
  best.value = best.scaled / rho;
  return best;
}

struct ChanceCvarCheck {
  bool chance_holds = false;  // worst-case probability <= rho
  bool cvar_holds = false;    // rho * CVaR_rho >= eps
  double worst_case = 0.0;
  double rho_cvar = 0.0;
};

/// Absolute slack applied to both comparisons so that exact boundary cases
/// are not decided by rounding.
inline constexpr double kBoundaryTolerance = 1e-12;

/// Evaluates both sides of the chance-constraint / CVaR equivalence.
inline ChanceCvarCheck check_chance_cvar(const Dataset& ds, const Hyperplane& h, double epsilon,
                                         double rho) {
  require(std::isfinite(epsilon) && epsilon > 0.0, "epsilon must be positive");
  ChanceCvarCheck out;
  out.worst_case = worst_case_prob_dual(ds, h, epsilon).value;
  out.rho_cvar = cvar_distance(ds, h, rho).scaled;
  out.chance_holds = out.worst_case <= rho + kBoundaryTolerance;
  out.cvar_holds = out.rho_cvar >= epsilon - kBoundaryTolerance;
  return out;
}

struct CvarRadius {
  double epsilon = 0.0;
  std::vector<std::size_t> argmax;
};

/// eps = rho * max_w CVaR_rho(d(w, .)) over the candidates, with every
/// candidate within 1e-10 of the maximum.
inline CvarRadius cvar_radius(const Dataset& ds, std::span<const Hyperplane> candidates, double rho) {
  require(!candidates.empty(), "cvar_radius needs at least one candidate");
  std::vector<double> scaled;
  scaled.reserve(candidates.size());
  for (const auto& h : candidates) scaled.push_back(cvar_distance(ds, h, rho).scaled);
  CvarRadius out;
  out.epsilon = *std::max_element(scaled.begin(), scaled.end());
  for (std::size_t k = 0; k < scaled.size(); ++k)
    if (scaled[k] >= out.epsilon - 1e-10) out.argmax.push_back(k);
  return out;
}

}  // namespace wdro
