#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>

#include "wdro/errors.hpp"

namespace wdro {

enum class LossKind { Ramp, SmoothedRamp, SmoothedHinge };

/// Which scalar loss to apply to the signed score y(<w,x> + b), plus the
/// smoothing temperature used by the smoothed variants.
struct LossSpec {
  LossKind kind = LossKind::SmoothedRamp;
  double sigma = 0.02;

  bool smooth() const { return kind != LossKind::Ramp; }

  void validate() const {
    if (smooth())
      require(std::isfinite(sigma) && sigma > 0.0, "sigma must be positive for smoothed losses");
  }
};

inline std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Ramp:
      return "ramp";
    case LossKind::SmoothedRamp:
      return "sramp";
    case LossKind::SmoothedHinge:
      return "shinge";
  }
  return "?";
}

inline LossKind parse_loss_kind(std::string_view name) {
  if (name == "ramp") return LossKind::Ramp;
  if (name == "sramp") return LossKind::SmoothedRamp;
  if (name == "shinge") return LossKind::SmoothedHinge;
  throw ValidationError("unknown loss '" + std::string(name) + "' (expected ramp|sramp|shinge)");
}

/// Loss value together with its first derivative in the score.
struct LossValue {
  double value;
  double deriv;
};

namespace detail {

// sigma * log1p(exp(-|a| / sigma)): the overshoot of the softmax of {a, 0}
// above max{a, 0}. Never exceeds sigma * ln 2.
inline double softmax_excess(double a, double sigma) {
  return sigma * std::log1p(std::exp(-std::abs(a) / sigma));
}

inline double logistic(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace detail

/// Ramp loss: 1 for r <= 0, 1 - r on (0, 1), 0 for r >= 1.
inline double ramp(double r) {
  if (r <= 0.0) return 1.0;
  if (r >= 1.0) return 0.0;
  return 1.0 - r;
}

/// Softmax surrogate of the ramp loss,
///   sigma * log((exp(1/sigma) + exp(r/sigma)) / (1 + exp(r/sigma))),
/// evaluated as ramp(r) plus the difference of the two softmax excesses so
/// that exp(1/sigma) is never formed.
inline double smoothed_ramp(double r, double sigma) {
  return ramp(r) + detail::softmax_excess(1.0 - r, sigma) - detail::softmax_excess(r, sigma);
}

/// d/dr smoothed_ramp. The derivative is symmetric about r = 1/2, so it is
/// evaluated at the reflected point r' = max(r, 1 - r) >= 1/2, where
///   psi'(r') = -logistic((1 - r')/sigma) * (1 - exp(-1/sigma)) / (1 + exp(-r'/sigma))
/// has no cancellation. Strictly negative until it underflows for
/// |r - 1/2| beyond roughly 745 sigma.
inline double smoothed_ramp_deriv(double r, double sigma) {
  const double rr = r >= 0.5 ? r : 1.0 - r;
  const double gap = -std::expm1(-1.0 / sigma);
  return -detail::logistic((1.0 - rr) / sigma) * gap / (1.0 + std::exp(-rr / sigma));
}

/// sigma * log(1 + exp((1 - r)/sigma)), the softmax smoothing of max{1 - r, 0}.
inline double smoothed_hinge(double r, double sigma) {
  return std::max(1.0 - r, 0.0) + detail::softmax_excess(1.0 - r, sigma);
}

inline double smoothed_hinge_deriv(double r, double sigma) {
  return -detail::logistic((1.0 - r) / sigma);
}

/// Value and derivative for the loss selected by `spec`. The derivative of
/// the exact ramp is reported as NaN; callers needing gradients must use a
/// smoothed kind.
inline LossValue evaluate_loss(const LossSpec& spec, double r) {
  switch (spec.kind) {
    case LossKind::Ramp:
      return {ramp(r), std::nan("")};
    case LossKind::SmoothedRamp:
      return {smoothed_ramp(r, spec.sigma), smoothed_ramp_deriv(r, spec.sigma)};
    case LossKind::SmoothedHinge:
      return {smoothed_hinge(r, spec.sigma), smoothed_hinge_deriv(r, spec.sigma)};
  }
  return {std::nan(""), std::nan("")};
}

}  // namespace wdro
