#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "wdro/objective.hpp"

using namespace wdro;

namespace {

Dataset random_dataset(std::mt19937_64& gen, int n, int d) {
  std::normal_distribution<double> normal;
  Matrix x(n, d);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = normal(gen);
    y[i] = normal(gen) > 0 ? 1.0 : -1.0;
  }
  return Dataset::uniform(x, y);
}

Hyperplane random_plane(std::mt19937_64& gen, int d, double scale = 1.0) {
  std::normal_distribution<double> normal;
  Vector w(d);
  for (int j = 0; j < d; ++j) w[j] = scale * normal(gen);
  return Hyperplane(w, scale * normal(gen));
}

double relative_error(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), 1.0});
}

}  // namespace

TEST(Objective, ValueAtOriginAndSlopeOnBoxData) {
  const auto ds = generate_separable(5000, 3, 8);
  ObjectiveSpec spec;
  spec.loss = {LossKind::SmoothedRamp, 0.02};
  const auto e = evaluate(spec, ds, Hyperplane(Vector::Zero(3), 0.0));
  EXPECT_NEAR(e.value, 1.0 - 0.02 * std::log(2.0), 1e-12);
  const double mean_yx1 = (ds.labels().array() * ds.points().col(0).array()).mean();
  EXPECT_NEAR(e.gradient[0], smoothed_ramp_deriv(0.0, 0.02) * mean_yx1, 1e-10);
  EXPECT_LT(e.gradient[0], 0.0);
  EXPECT_NEAR(mean_yx1, 5.0, 0.2);  // E[|x1|] on [-10, 10]
}

TEST(Objective, ConstantLossHasZeroGradient) {
  std::mt19937_64 gen(1);
  const auto ds = random_dataset(gen, 20, 3);
  const auto h = random_plane(gen, 3);
  const auto e = evaluate_with([](double) { return LossValue{0.7, 0.0}; }, RegKind::SquaredNorm, 0.0, ds, h);
  EXPECT_NEAR(e.value, 0.7, 1e-15);
  EXPECT_EQ(e.gradient.norm(), 0.0);
}

TEST(Objective, GradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(2024);
  int config = 0;
  for (int d : {2, 10})
    for (int n : {16, 256})
      for (double sigma : {0.02, 0.1})
        for (auto kind : {LossKind::SmoothedRamp, LossKind::SmoothedHinge})
          for (auto reg : {RegKind::SquaredNorm, RegKind::Norm})
            for (int rep = 0; rep < 2; ++rep, ++config) {
              const auto ds = random_dataset(gen, n, d);
              const auto h = random_plane(gen, d, 0.3);
              ObjectiveSpec spec{{kind, sigma}, reg, 0.05 + 0.1 * rep, false};
              const auto e = evaluate(spec, ds, h);
              const auto fd = oracle::fd_gradient(
                  [&](const Eigen::VectorXd& x) { return evaluate_value(spec, ds, Hyperplane::from_stacked(x)); },
                  h.stacked());
              EXPECT_LE(relative_error(e.gradient, fd), 1e-5) << config;
              EXPECT_NEAR(e.value, evaluate_value(spec, ds, h), 1e-14);
            }
}

TEST(Objective, PermutationInvariantAndBounded) {
  std::mt19937_64 gen(3);
  const auto ds = random_dataset(gen, 40, 4);
  std::vector<int> perm(40);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), gen);
  Matrix x(40, 4);
  Vector y(40);
  for (int i = 0; i < 40; ++i) {
    x.row(i) = ds.point(perm[i]);
    y[i] = ds.label(perm[i]);
  }
  const Dataset shuffled = Dataset::uniform(x, y);
  ObjectiveSpec spec;
  for (int trial = 0; trial < 20; ++trial) {
    const auto h = random_plane(gen, 4, 2.0);
    const double v = evaluate_value(spec, ds, h);
    EXPECT_NEAR(v, evaluate_value(spec, shuffled, h), 1e-13);
    const double reg = regularizer(spec.reg_kind, spec.reg_weight, h.w);
    EXPECT_GE(v, reg);
    EXPECT_LE(v, reg + 1.0);
  }
}

TEST(Objective, InterceptIsNotRegularized) {
  std::mt19937_64 gen(4);
  const auto ds = random_dataset(gen, 10, 2);
  auto zero_loss = [](double) { return LossValue{0.0, 0.0}; };
  const Hyperplane h(Vector::Constant(2, 1.0), 5.0);
  const auto e = evaluate_with(zero_loss, RegKind::SquaredNorm, 0.4, ds, h);
  EXPECT_DOUBLE_EQ(e.value, 0.4);
  EXPECT_DOUBLE_EQ(e.gradient[2], 0.0);
  ObjectiveSpec bad;
  bad.regularize_intercept = true;
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(Objective, RampIsValueOnly) {
  std::mt19937_64 gen(5);
  const auto ds = random_dataset(gen, 10, 2);
  ObjectiveSpec spec{{LossKind::Ramp, 0.02}, RegKind::Norm, 0.1, false};
  const auto h = random_plane(gen, 2);
  EXPECT_THROW(evaluate(spec, ds, h), ValidationError);
  EXPECT_THROW(EmpiricalObjective(spec, ds), ValidationError);
  double risk = 0.0;
  for (Eigen::Index i = 0; i < ds.size(); ++i)
    risk += oracle::ramp(ds.label(i) * (h.w.dot(ds.point(i).transpose()) + h.b)) / 10.0;
  EXPECT_NEAR(evaluate_value(spec, ds, h), 0.1 * h.w.norm() + risk, 1e-14);
  spec.reg_weight = -1.0;
  EXPECT_THROW(evaluate_value(spec, ds, h), ValidationError);
}

TEST(DroVariables, Conversions) {
  Vector w(2);
  w << 3, 4;
  const auto v = to_dro_variables(Hyperplane(w, 5.0));
  EXPECT_DOUBLE_EQ(v.w0[0], 0.6);
  EXPECT_DOUBLE_EQ(v.w0[1], 0.8);
  EXPECT_DOUBLE_EQ(v.b0, 1.0);
  EXPECT_DOUBLE_EQ(v.t, 5.0);
  const auto back = from_dro_variables(v);
  EXPECT_NEAR((back.w - w).norm(), 0.0, 1e-15);
  EXPECT_NEAR(back.b, 5.0, 1e-15);

  const auto z = to_dro_variables(Hyperplane(Vector::Zero(3), -2.0));
  EXPECT_EQ(z.w0.norm(), 0.0);
  EXPECT_EQ(z.b0, -2.0);
  EXPECT_EQ(z.t, 0.0);
}

TEST(DroVariables, ImputedEpsilon) {
  Vector w(1);
  w << 3.744;
  EXPECT_NEAR(imputed_epsilon(0.001, Hyperplane(w, 0.0)), 0.003744, 1e-15);
  w << 0.1703;
  EXPECT_NEAR(imputed_epsilon(10.0, Hyperplane(w, 0.0)), 1.703, 1e-14);
  EXPECT_EQ(imputed_epsilon(0.5, Hyperplane(Vector::Zero(2), 1.0)), 0.0);
  EXPECT_THROW(imputed_epsilon(-1.0, Hyperplane(w, 0.0)), ValidationError);
}

TEST(EmpiricalObjective, WrapsEvaluate) {
  std::mt19937_64 gen(6);
  const auto ds = random_dataset(gen, 30, 3);
  ObjectiveSpec spec;
  EmpiricalObjective f(spec, ds);
  EXPECT_EQ(f.dimension(), 4);
  const auto h = random_plane(gen, 3);
  const auto a = f(h.stacked());
  const auto b = evaluate(spec, ds, h);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.gradient, b.gradient);
}
