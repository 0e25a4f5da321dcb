#pragma once

#include <cmath>
#include <string_view>

#include "wdro/data.hpp"
#include "wdro/errors.hpp"
#include "wdro/geometry.hpp"
#include "wdro/loss.hpp"

namespace wdro {

enum class RegKind { Norm, SquaredNorm };

/// Regularized empirical risk
///   Norm:        eps |w|        + sum_i p_i loss(y_i(<w,x_i> + b))
///   SquaredNorm: eps_bar/2 |w|^2 + sum_i p_i loss(y_i(<w,x_i> + b))
/// The intercept is never regularized.
struct ObjectiveSpec {
  LossSpec loss;
  RegKind reg_kind = RegKind::SquaredNorm;
  double reg_weight = 0.1;
  bool regularize_intercept = false;

  void validate() const {
    loss.validate();
    require(std::isfinite(reg_weight) && reg_weight >= 0.0, "regularization weight must be nonnegative");
    require(!regularize_intercept, "intercept regularization is not supported");
  }
};

/// Objective value and gradient with respect to the stacked (w, b).
struct Evaluation {
  double value = 0.0;
  Vector gradient;
};

inline double regularizer(RegKind kind, double weight, const Vector& w) {
  return kind == RegKind::Norm ? weight * w.norm() : 0.5 * weight * w.squaredNorm();
}

/// Value and gradient for an arbitrary per-point loss. `loss_fn(r)` must
/// return a LossValue. The sum runs sequentially in row order.
template <typename LossFn>
Evaluation evaluate_with(LossFn&& loss_fn, RegKind reg_kind, double reg_weight, const Dataset& ds,
                         const Hyperplane& h) {
  require(h.w.size() == ds.dim(), "hyperplane dimension does not match dataset");
  const Vector scores = (ds.points() * h.w).array() + h.b;
  Vector coeff(ds.size());  // p_i * loss'(r_i) * y_i
  double risk = 0.0;
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    const double y = ds.label(i);
    const LossValue l = loss_fn(y * scores[i]);
    risk += ds.weight(i) * l.value;
    coeff[i] = ds.weight(i) * l.deriv * y;
  }
  Evaluation out;
  out.value = regularizer(reg_kind, reg_weight, h.w) + risk;
  out.gradient.resize(ds.dim() + 1);
  out.gradient.head(ds.dim()).noalias() = ds.points().transpose() * coeff;
  out.gradient[ds.dim()] = coeff.sum();
  if (reg_kind == RegKind::SquaredNorm) {
    out.gradient.head(ds.dim()) += reg_weight * h.w;
  } else {
    const double norm = h.w.norm();
    if (norm > 0.0) out.gradient.head(ds.dim()) += (reg_weight / norm) * h.w;
  }
  return out;
}

/// Objective value and gradient. Requires a smoothed loss.
inline Evaluation evaluate(const ObjectiveSpec& spec, const Dataset& ds, const Hyperplane& h) {
  spec.validate();
  require(spec.loss.smooth(), "gradient requested for the nonsmooth ramp loss");
  return evaluate_with([&](double r) { return evaluate_loss(spec.loss, r); }, spec.reg_kind,
                       spec.reg_weight, ds, h);
}

/// Objective value only; valid for every loss, including the exact ramp.
inline double evaluate_value(const ObjectiveSpec& spec, const Dataset& ds, const Hyperplane& h) {
  spec.validate();
  require(h.w.size() == ds.dim(), "hyperplane dimension does not match dataset");
  const Vector scores = (ds.points() * h.w).array() + h.b;
  double risk = 0.0;
  for (Eigen::Index i = 0; i < ds.size(); ++i)
    risk += ds.weight(i) * evaluate_loss(spec.loss, ds.label(i) * scores[i]).value;
  return regularizer(spec.reg_kind, spec.reg_weight, h.w) + risk;
}

/// Callable view of an objective over stacked (w, b) vectors, as consumed
/// by the solvers. Holds a reference to the dataset.
class EmpiricalObjective {
 public:
  EmpiricalObjective(ObjectiveSpec spec, const Dataset& ds) : spec_(spec), ds_(&ds) {
    spec_.validate();
    require(spec_.loss.smooth(), "solvers need a smoothed loss");
  }

  Evaluation operator()(const Vector& x) const {
    return evaluate_with([this](double r) { return evaluate_loss(spec_.loss, r); }, spec_.reg_kind,
                         spec_.reg_weight, *ds_, Hyperplane::from_stacked(x));
  }

  Eigen::Index dimension() const { return ds_->dim() + 1; }
  const ObjectiveSpec& spec() const { return spec_; }
  const Dataset& dataset() const { return *ds_; }

 private:
  ObjectiveSpec spec_;
  const Dataset* ds_;
};

/// (w0, b0, t) of the distance-based formulation: t = |w| and (w0, b0) =
/// (w, b)/t, or (0, b, 0) when w = 0.
struct DroVariables {
  Vector w0;
  double b0 = 0.0;
  double t = 0.0;
};

inline DroVariables to_dro_variables(const Hyperplane& h) {
  const double t = h.w.norm();
  if (t == 0.0) return {Vector::Zero(h.w.size()), h.b, 0.0};
  return {h.w / t, h.b / t, t};
}

inline Hyperplane from_dro_variables(const DroVariables& v) {
  if (v.t == 0.0) return Hyperplane(Vector::Zero(v.w0.size()), v.b0);
  return Hyperplane(v.t * v.w0, v.t * v.b0);
}

/// The norm-regularization weight eps = eps_bar |w| that corresponds to a
/// squared-norm weight eps_bar at the solution w.
inline double imputed_epsilon(double reg_weight_bar, const Hyperplane& h) {
  require(reg_weight_bar >= 0.0, "regularization weight must be nonnegative");
  return reg_weight_bar * h.w.norm();
}

}  // namespace wdro
