#pragma once

// Test-only reference computations. Each one reaches its answer by a route
// that shares no code with the library: brute-force enumeration, direct
// formulas, finite differences, or plain quadrature.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Distance to misclassification from the defining formula.
inline double distance(const Eigen::VectorXd& w, double b, const Eigen::VectorXd& x, double y) {
  const double norm = std::sqrt(w.dot(w));
  if (norm == 0.0) return y * b > 0.0 ? kInf : 0.0;
  const double margin = y * (w.dot(x) + b);
  return margin > 0.0 ? margin / norm : 0.0;
}

/// max sum_i v_i subject to 0 <= v_i <= p_i and sum_i d_i v_i <= eps, by
/// enumerating every vertex of the feasible polytope. A vertex has all
/// coordinates at a bound except possibly one, which the budget then fixes.
/// Points with infinite distance can take no mass.
inline double knapsack_lp(const std::vector<double>& d, const std::vector<double>& p, double eps) {
  const std::size_t n = d.size();
  double best = 0.0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    double used = 0.0, mass = 0.0;
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      if (!(mask >> i & 1u)) continue;
      if (std::isinf(d[i])) ok = false;
      used += d[i] * p[i];
      mass += p[i];
    }
    if (!ok) continue;
    if (used <= eps) best = std::max(best, mass);
    // one fractional coordinate, chosen among those at the lower bound
    for (std::size_t j = 0; j < n; ++j) {
      if (mask >> j & 1u || std::isinf(d[j]) || d[j] <= 0.0) continue;
      const double v = (eps - used) / d[j];
      if (v >= 0.0 && v <= p[j]) best = std::max(best, mass + v);
    }
  }
  return best;
}

/// rho * CVaR_rho of the distance as the integral of its lower quantile
/// function over [0, rho]; +inf when the finite distances carry less than
/// rho of the mass.
inline double rho_cvar_quantile(std::vector<double> d, std::vector<double> p, double rho) {
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
  double remaining = rho, total = 0.0;
  for (std::size_t i : order) {
    if (remaining <= 0.0) break;
    const double take = std::min(remaining, p[i]);
    if (std::isinf(d[i])) return kInf;
    total += take * d[i];
    remaining -= take;
  }
  return remaining > 1e-15 ? kInf : total;
}

/// Central finite-difference gradient with per-coordinate step
/// h = rel * max(1, |x_j|).
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                   double rel = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = rel * std::max(1.0, std::abs(x[j]));
    Eigen::VectorXd xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    g[j] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

inline double ramp(double r) { return r <= 0.0 ? 1.0 : (r >= 1.0 ? 0.0 : 1.0 - r); }

/// E[ramp(w1 r + w2 x2)] for r ~ U(0,1), x2 ~ U(-1,1) by the composite
/// midpoint rule on a grid x grid lattice.
inline double midpoint_uniform_risk(double w1, double w2, int grid) {
  double total = 0.0;
  const double hr = 1.0 / grid, hx = 2.0 / grid;
  for (int i = 0; i < grid; ++i) {
    const double r = (i + 0.5) * hr;
    for (int j = 0; j < grid; ++j) total += ramp(w1 * r + w2 * (-1.0 + (j + 0.5) * hx));
  }
  return total / (static_cast<double>(grid) * grid);
}

/// The same expectation by adaptive Simpson integration over r of the
/// x2-integral, which is evaluated in closed form for each r.
inline double slice_uniform_risk(double w1, double w2) {
  auto inner = [&](double r) {
    // (1/2) * integral over x2 in [-1, 1] of ramp(w1 r + w2 x2)
    const double a = w1 * r;
    if (w2 == 0.0) return ramp(a);
    auto prim = [&](double s) {  // antiderivative of ramp(s) in s
      if (s <= 0.0) return s;
      if (s >= 1.0) return 0.5;
      return s - 0.5 * s * s;
    };
    const double lo = a - std::abs(w2), hi = a + std::abs(w2);
    return (prim(hi) - prim(lo)) / (2.0 * std::abs(w2));
  };
  std::function<double(double, double, double, double, double, int)> adapt =
      [&](double a, double b, double fa, double fm, double fb, int depth) -> double {
    const double m = 0.5 * (a + b);
    const double lm = inner(0.5 * (a + m)), rm = inner(0.5 * (m + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    const double left = (m - a) / 6.0 * (fa + 4.0 * lm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * rm + fb);
    if (depth > 40 || std::abs(left + right - whole) < 1e-14) return left + right;
    return adapt(a, m, fa, lm, fm, depth + 1) + adapt(m, b, fm, rm, fb, depth + 1);
  };
  return adapt(0.0, 1.0, inner(0.0), inner(0.5), inner(1.0), 0);
}

}  // namespace oracle
