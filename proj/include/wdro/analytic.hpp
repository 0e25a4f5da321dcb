#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "wdro/data.hpp"
#include "wdro/errors.hpp"
#include "wdro/geometry.hpp"
#include "wdro/loss.hpp"

// Uniform two-dimensional model: x uniform on [-1, 1]^2 labelled by
// sign(x_1), intercept fixed at zero. Writing y x_1 = r ~ U(0, 1), the
// risk of w = (w1, w2) is E[L_R(w1 r + w2 x2)] with x2 ~ U(-1, 1), i.e. an
// integral over the rectangle [0, 1] x [-1, 1] with density 1/2. The
// integrand is affine on the strip 0 < w1 r + w2 x2 < 1 and constant off it,
// so every quantity below is an exact polygon moment.

namespace wdro::analytic {

using Point2 = Eigen::Vector2d;

struct UniformModel {
  double epsilon = 0.1;
  int grid_per_axis = 400;  // midpoint fallback near w = 0

  void validate() const {
    require(std::isfinite(epsilon) && epsilon > 0.0, "epsilon must be positive");
    require(grid_per_axis >= 200, "grid_per_axis must be at least 200");
  }
};

/// Area and first moments (integrals of r and of x2) of a polygon.
struct Moments {
  double area = 0.0;
  double mr = 0.0;
  double mx = 0.0;
};

namespace detail {

using Polygon = std::vector<Point2>;

inline Polygon rectangle() { return {{0.0, -1.0}, {1.0, -1.0}, {1.0, 1.0}, {0.0, 1.0}}; }

// Sutherland-Hodgman clip of a convex polygon to {p : <a, p> <= c}.
inline Polygon clip(const Polygon& poly, const Point2& a, double c) {
  Polygon out;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& p = poly[i];
    const Point2& q = poly[(i + 1) % n];
    const double fp = a.dot(p) - c;
    const double fq = a.dot(q) - c;
    if (fp <= 0.0) out.push_back(p);
    if ((fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0)) out.push_back(p + (fp / (fp - fq)) * (q - p));
  }
  return out;
}

inline Moments moments(const Polygon& poly) {
  Moments m;
  const std::size_t n = poly.size();
  if (n < 3) return m;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& p = poly[i];
    const Point2& q = poly[(i + 1) % n];
    const double cross = p.x() * q.y() - q.x() * p.y();
    m.area += cross;
    m.mr += (p.x() + q.x()) * cross;
    m.mx += (p.y() + q.y()) * cross;
  }
  m.area /= 2.0;
  m.mr /= 6.0;
  m.mx /= 6.0;
  return m;
}

struct Regions {
  Moments negative;  // w1 r + w2 x2 <= 0
  Moments strip;     // 0 < w1 r + w2 x2 < 1
};

inline Regions regions(const Point2& w) {
  const Polygon rect = rectangle();
  Regions out;
  out.negative = moments(clip(rect, w, 0.0));
  out.strip = moments(clip(clip(rect, -w, 0.0), w, 1.0));
  return out;
}

// Composite midpoint rule for E[L_R(w1 r + w2 x2)] on a grid x grid mesh.
inline double midpoint_risk(const Point2& w, int grid) {
  const double hr = 1.0 / grid;
  const double hx = 2.0 / grid;
  double total = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double r = (i + 0.5) * hr;
    double row = 0.0;
    for (int j = 0; j < grid; ++j) row += ramp(w.x() * r + w.y() * (-1.0 + (j + 0.5) * hx));
    total += row;
  }
  return total / (static_cast<double>(grid) * grid);
}

inline constexpr double kDegenerateNorm = 1e-10;

}  // namespace detail

/// E[L_R(w1 r + w2 x2)], exactly.
inline double risk(const UniformModel& model, const Point2& w) {
  if (w.norm() < detail::kDegenerateNorm) return detail::midpoint_risk(w, model.grid_per_axis);
  const auto reg = detail::regions(w);
  return 0.5 * (reg.negative.area + reg.strip.area - w.x() * reg.strip.mr - w.y() * reg.strip.mx);
}

/// F_eps(w) = eps/2 |w|^2 + E[L_R(w1 r + w2 x2)].
inline double f_epsilon(const UniformModel& model, const Point2& w) {
  model.validate();
  return 0.5 * model.epsilon * w.squaredNorm() + risk(model, w);
}

/// Gradient of F_eps away from the origin:
///   (eps w1 - E[1(0 < s < 1) r], eps w2 - E[1(0 < s < 1) x2]).
inline Point2 stationarity_residual(const UniformModel& model, const Point2& w) {
  model.validate();
  require(w.squaredNorm() > 0.0, "stationarity residual is undefined at w = 0");
  const auto strip = detail::regions(w).strip;
  return {model.epsilon * w.x() - 0.5 * strip.mr, model.epsilon * w.y() - 0.5 * strip.mx};
}

/// Global minimizer (w1(eps), 0) and its value, from the stationarity
/// condition restricted to the w1 axis.
struct ClosedForm {
  double w1 = 0.0;
  double value = 0.0;
};

inline ClosedForm closed_form_minimizer(double epsilon) {
  require(epsilon > 0.0, "epsilon must be positive");
  if (epsilon <= 0.5) return {std::cbrt(1.0 / (2.0 * epsilon)), 3.0 * std::cbrt(epsilon / 32.0)};
  return {1.0 / (2.0 * epsilon), 1.0 - 1.0 / (8.0 * epsilon)};
}

/// F_eps on the positive w1 axis: eps/2 w1^2 + (1 - w1/2) for w1 < 1,
/// eps/2 w1^2 + 1/(2 w1) for w1 >= 1.
inline double axis_value(double epsilon, double w1) {
  require(w1 >= 0.0, "axis_value expects w1 >= 0");
  return 0.5 * epsilon * w1 * w1 + (w1 < 1.0 ? 1.0 - 0.5 * w1 : 0.5 / w1);
}

/// Richardson-extrapolated one-sided difference quotient
/// (F(a u) - F(0)) / a over a = 1e-3, 1e-4, 1e-5.
inline double origin_directional_derivative(const UniformModel& model, const Point2& direction) {
  model.validate();
  const double f0 = f_epsilon(model, Point2::Zero());
  std::array<double, 3> q{};
  const std::array<double, 3> steps{1e-3, 1e-4, 1e-5};
  for (std::size_t k = 0; k < steps.size(); ++k)
    q[k] = (f_epsilon(model, steps[k] * direction) - f0) / steps[k];
  const double r0 = (10.0 * q[1] - q[0]) / 9.0;
  const double r1 = (10.0 * q[2] - q[1]) / 9.0;
  return (100.0 * r1 - r0) / 99.0;
}

struct OriginDerivatives {
  double along_plus_e1 = 0.0;
  double along_minus_e1 = 0.0;
};

inline OriginDerivatives origin_directional_derivatives(const UniformModel& model) {
  return {origin_directional_derivative(model, {1.0, 0.0}),
          origin_directional_derivative(model, {-1.0, 0.0})};
}

struct StationaryPoint {
  Point2 w;
  double residual = 0.0;  // infinity norm
  double value = 0.0;     // F_eps(w)
};

struct ScanResult {
  std::vector<StationaryPoint> points;
  int candidates = 0;  // grid cells passed to refinement
  int rejected = 0;    // candidates whose refinement failed
  int duplicates = 0;  // refined onto an already listed point
  double threshold = 0.0;
};

namespace detail {

inline double residual_norm(const UniformModel& model, const Point2& w) {
  return stationarity_residual(model, w).lpNorm<Eigen::Infinity>();
}

struct Refinement {
  bool ok = false;
  Point2 w;
  double residual = 0.0;
};

// Damped Newton iteration on the residual with a central-difference
// Jacobian. Fails if it leaves the (slightly enlarged) box, collapses onto
// the excluded origin, or stalls above the acceptance tolerance.
inline Refinement refine(const UniformModel& model, Point2 w, double lo, double hi, double min_norm) {
  constexpr double kAccept = 1e-10;
  Point2 res = stationarity_residual(model, w);
  double norm = res.lpNorm<Eigen::Infinity>();
  for (int it = 0; it < 100 && norm > 1e-14; ++it) {
    const double h = 1e-7 * std::max(1.0, w.norm());
    Eigen::Matrix2d jac;
    for (int j = 0; j < 2; ++j) {
      Point2 e = Point2::Zero();
      e[j] = h;
      if ((w + e).norm() < min_norm || (w - e).norm() < min_norm) return {false, w, norm};
      jac.col(j) = (stationarity_residual(model, w + e) - stationarity_residual(model, w - e)) / (2.0 * h);
    }
    const double det = jac.determinant();
    if (!std::isfinite(det) || std::abs(det) < 1e-300) break;
    const Point2 step = jac.inverse() * res;
    double t = 1.0;
    bool moved = false;
    while (t > 1e-10) {
      const Point2 trial = w - t * step;
      if (trial.norm() >= min_norm) {
        const Point2 tr = stationarity_residual(model, trial);
        const double tn = tr.lpNorm<Eigen::Infinity>();
        if (tn < norm) {
          w = trial;
          res = tr;
          norm = tn;
          moved = true;
          break;
        }
      }
      t *= 0.5;
    }
    if (!moved) break;
    if (w.norm() < min_norm || w.minCoeff() < lo || w.maxCoeff() > hi) return {false, w, norm};
  }
  return {norm <= kAccept, w, norm};
}

}  // namespace detail

/// Grid scan of the stationarity residual over [lo, hi]^2 (cell centres).
/// Cells whose residual infinity-norm is below 10 * (hi - lo) / grid and is
/// a local minimum among their neighbours are refined; refined points
/// closer than 1e-6 are merged. Points collapsing onto the origin, where
/// F_eps is not differentiable, are rejected.
inline ScanResult scan_stationary_points(const UniformModel& model, double lo, double hi, int grid) {
  model.validate();
  require(grid >= 100, "grid must be at least 100");
  require(hi > lo, "empty scan box");
  const double cell = (hi - lo) / grid;
  ScanResult out;
  out.threshold = 10.0 * cell;

  auto center = [&](int i) { return lo + (i + 0.5) * cell; };
  std::vector<double> norms(static_cast<std::size_t>(grid) * grid);
  auto at = [&](int i, int j) -> double& { return norms[static_cast<std::size_t>(i) * grid + j]; };
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j) {
      const Point2 w(center(i), center(j));
      at(i, j) = w.squaredNorm() > 0.0 ? detail::residual_norm(model, w) : kInfinity;
    }

  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      const double v = at(i, j);
      if (!(v < out.threshold)) continue;
      bool local_min = true;
      for (int di = -1; di <= 1 && local_min; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
          const int a = i + di, b = j + dj;
          if ((di || dj) && a >= 0 && a < grid && b >= 0 && b < grid && at(a, b) < v) {
            local_min = false;
            break;
          }
        }
      if (!local_min) continue;
      ++out.candidates;
      const auto refined = detail::refine(model, {center(i), center(j)}, lo - cell, hi + cell, cell);
      if (!refined.ok) {
        ++out.rejected;
        continue;
      }
      const bool duplicate = std::any_of(out.points.begin(), out.points.end(), [&](const StationaryPoint& p) {
        return (p.w - refined.w).norm() < 1e-6;
      });
      if (duplicate) {
        ++out.duplicates;
        continue;
      }
      out.points.push_back({refined.w, refined.residual, f_epsilon(model, refined.w)});
    }
  }
  return out;
}

/// g(r) = 1/2 * integral of x2 over [max(-1, -w1 r/w2), min(1, (1 - w1 r)/w2)]
/// for w1, w2 > 0: the x2-moment of the strip along the line of fixed r.
inline double slice_moment(const Point2& w, double r) {
  require(w.x() > 0.0 && w.y() > 0.0, "slice_moment expects w1, w2 > 0");
  const double lo = std::max(-1.0, -w.x() * r / w.y());
  const double hi = std::min(1.0, (1.0 - w.x() * r) / w.y());
  return hi > lo ? 0.25 * (hi * hi - lo * lo) : 0.0;
}

/// Integration self-test for w1, w2 > 0: the strip's x2-moment from the
/// polygon route minus the integral over r in [0, 1] of slice_moment,
/// evaluated piecewise by Simpson's rule (exact, since slice_moment is
/// quadratic between its breakpoints).
inline double integration_self_test(const Point2& w) {
  std::vector<double> cuts{0.0, 1.0};
  for (double c : {w.y() / w.x(), (1.0 - w.y()) / w.x(), (1.0 + w.y()) / w.x(), 1.0 / w.x()})
    if (c > 0.0 && c < 1.0) cuts.push_back(c);
  std::sort(cuts.begin(), cuts.end());
  double integral = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double a = cuts[k], b = cuts[k + 1];
    integral += (b - a) / 6.0 * (slice_moment(w, a) + 4.0 * slice_moment(w, 0.5 * (a + b)) + slice_moment(w, b));
  }
  return 0.5 * detail::regions(w).strip.mx - integral;
}

/// Components of -sum_i p_i psi'_sigma(y_i(<w, x_i> + b)) y_i x_i: the
/// right-hand side of the smoothed stationarity condition eps w = (...),
/// split into the first coordinate and the rest.
struct FlipBalance {
  double first = 0.0;
  Vector others;
};

inline FlipBalance label_flip_balance(const Dataset& ds, const Hyperplane& h, double sigma) {
  require(sigma > 0.0, "sigma must be positive");
  require(h.w.size() == ds.dim(), "hyperplane dimension does not match dataset");
  const Vector scores = (ds.points() * h.w).array() + h.b;
  Vector coeff(ds.size());
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    const double y = ds.label(i);
    coeff[i] = -ds.weight(i) * smoothed_ramp_deriv(y * scores[i], sigma) * y;
  }
  const Vector total = ds.points().transpose() * coeff;
  return {total[0], total.tail(ds.dim() - 1)};
}

}  // namespace wdro::analytic
