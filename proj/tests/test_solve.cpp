#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "wdro/objective.hpp"
#include "wdro/solve.hpp"

using namespace wdro;

namespace {

// f(x) = 1/2 (x - c)' A (x - c) with A symmetric positive definite.
struct Quadratic {
  Matrix a;
  Vector c;
  Evaluation operator()(const Vector& x) const {
    const Vector r = x - c;
    const Vector g = a * r;
    return {0.5 * r.dot(g), g};
  }
};

Quadratic random_quadratic(int n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  Matrix b(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) b(i, j) = normal(gen);
  Vector c(n);
  for (int i = 0; i < n; ++i) c[i] = normal(gen);
  return {b.transpose() * b + Matrix::Identity(n, n), c};
}

struct Rosenbrock {
  Evaluation operator()(const Vector& x) const {
    const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
    Vector g(2);
    g << -2.0 * a - 400.0 * x[0] * b, 200.0 * b;
    return {a * a + 100.0 * b * b, g};
  }
};

SolveOptions options(Method m) {
  SolveOptions o;
  o.method = m;
  return o;
}

}  // namespace

TEST(LineSearch, QuadraticInterval) {
  auto f = [](const Vector& x) { return Evaluation{0.5 * x.squaredNorm(), x}; };
  const Vector x = Vector::Constant(1, 1.0), p = Vector::Constant(1, -1.0);
  const SolveOptions opts;
  const auto at = f(x);
  const auto ls = line_search_weak_wolfe(f, x, at, p, opts);
  ASSERT_TRUE(ls.satisfied);
  // Wolfe interval for this problem with c1 = 1e-4, c2 = 0.9 is [0.1, 1.9998].
  EXPECT_GE(ls.step, 0.1);
  EXPECT_LE(ls.step, 1.9998);
  // the exact minimizer alpha = 1 satisfies both conditions
  const auto exact = f(x + p);
  EXPECT_LE(exact.value, at.value + opts.wolfe_c1 * at.gradient.dot(p));
  EXPECT_GE(exact.gradient.dot(p), opts.wolfe_c2 * at.gradient.dot(p));
  EXPECT_THROW(line_search_weak_wolfe(f, x, at, -p, opts), ValidationError);
}

TEST(LineSearch, AcceptedStepPassesBothConditionsOnSmoothedRamp) {
  const auto ds = generate_separable(500, 5, 3);
  EmpiricalObjective f(ObjectiveSpec{}, ds);
  std::mt19937_64 gen(4);
  std::normal_distribution<double> normal;
  const SolveOptions opts;
  for (int trial = 0; trial < 50; ++trial) {
    Vector x(6);
    for (int j = 0; j < 6; ++j) x[j] = normal(gen);
    const auto at = f(x);
    const Vector p = -at.gradient;
    const auto ls = line_search_weak_wolfe(f, x, at, p, opts, std::min(1.0, 1.0 / at.gradient.norm()));
    ASSERT_TRUE(ls.satisfied);
    const auto again = f(x + ls.step * p);
    const double slope = at.gradient.dot(p);
    EXPECT_LE(again.value, at.value + opts.wolfe_c1 * ls.step * slope);
    EXPECT_GE(again.gradient.dot(p), opts.wolfe_c2 * slope);
  }
}

TEST(Minimize, ConvexQuadratic) {
  const auto q = random_quadratic(5, 9);
  for (auto m : {Method::CgPrPlus, Method::Lbfgs}) {
    const auto r = minimize(q, Vector::Zero(5), options(m));
    EXPECT_TRUE(r.converged);
    EXPECT_LE((r.minimizer - q.c).norm(), 1e-8);
    EXPECT_LE(r.iterations, 200) << to_string(m);
  }
}

TEST(Minimize, Rosenbrock) {
  for (auto m : {Method::CgPrPlus, Method::Lbfgs}) {
    Vector x0(2);
    x0 << -1.2, 1.0;
    const auto r = minimize(Rosenbrock{}, x0, options(m));
    EXPECT_LE((r.minimizer - Vector::Ones(2)).norm(), 1e-6) << to_string(m);
  }
}

TEST(Minimize, TraceMonotoneAndConvergenceCriterion) {
  const auto ds = generate_separable(400, 4, 5);
  EmpiricalObjective f(ObjectiveSpec{}, ds);
  for (auto m : {Method::CgPrPlus, Method::Lbfgs}) {
    for (std::size_t k = 0; k < 5; ++k) {
      const auto r = minimize(f, start_point(5, 7, k), options(m));
      for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_LT(r.trace[i].value, r.trace[i - 1].value + 1e-15);
      if (r.converged) {
        EXPECT_LE(r.grad_norm, 1e-8 * std::max(1.0, std::abs(r.value)));
      }
      EXPECT_LE(r.grad_norm, 1e-6);
      EXPECT_EQ(r.trace.back().value, r.value);
    }
  }
}

TEST(Minimize, WolfeConditionsHoldOnAcceptedSteps) {
  const auto ds = generate_separable(1000, 6, 6);
  EmpiricalObjective f(ObjectiveSpec{}, ds);
  for (auto m : {Method::CgPrPlus, Method::Lbfgs}) {
    const auto opts = options(m);
    int checked = 0, wolfe_steps = 0, total = 0;
    auto observer = [&](int iter, const Vector& x, const Vector& p, double step, bool wolfe) {
      ++total;
      if (wolfe) ++wolfe_steps;
      const auto at = f(x);
      const auto next = f(x + step * p);
      const double slope = at.gradient.dot(p);
      EXPECT_LT(slope, 0.0);
      EXPECT_LE(next.value, at.value + opts.wolfe_c1 * step * slope + 1e-15);
      if (wolfe && iter % 7 == 0) {  // curvature re-checked on a sample
        EXPECT_GE(next.gradient.dot(p), opts.wolfe_c2 * slope);
        ++checked;
      }
    };
    minimize(f, start_point(7, 1, 0), opts, observer);
    EXPECT_GT(checked, 0);
    EXPECT_GE(wolfe_steps, total - 2);
  }
}

TEST(Minimize, Deterministic) {
  const auto ds = generate_separable(300, 3, 2);
  EmpiricalObjective f(ObjectiveSpec{}, ds);
  const Vector x0 = start_point(4, 11, 3);
  const auto a = minimize(f, x0, SolveOptions{});
  const auto b = minimize(f, x0, SolveOptions{});
  EXPECT_EQ(a.minimizer, b.minimizer);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_EQ(a.evaluations, b.evaluations);
}

TEST(Minimize, NonFiniteObjectiveAborts) {
  auto f = [](const Vector& x) {
    return Evaluation{x[0] > 0.0 ? std::nan("") : x.squaredNorm(), 2.0 * x};
  };
  EXPECT_THROW(minimize(f, Vector::Constant(2, 1.0), SolveOptions{}), NumericalError);
  SolveOptions bad;
  bad.wolfe_c2 = 1e-5;
  EXPECT_THROW(minimize(f, Vector::Constant(2, -1.0), bad), ValidationError);
}

TEST(Minimize, ConvexHingeAgreesAcrossStartsAndMethods) {
  const auto ds = generate_separable(2000, 5, 8);
  const auto flipped = flip_labels(ds, 0.2, 8);
  ObjectiveSpec spec;
  spec.loss = {LossKind::SmoothedHinge, 0.02};
  EmpiricalObjective f(spec, flipped);
  const Vector e1 = Hyperplane::canonical(5).w;
  const auto cg = multistart(f, 6, 20, options(Method::CgPrPlus), e1);
  ASSERT_TRUE(cg.failed.empty());
  EXPECT_EQ(cg.clusters.size(), 1u);
  for (const auto& r : cg.runs) EXPECT_NEAR(r.value, cg.runs.front().value, 1e-7);
  const auto lb = multistart(f, 6, 5, options(Method::Lbfgs), e1);
  for (const auto& r : lb.runs) EXPECT_NEAR(r.value, cg.runs.front().value, 1e-6);
}

TEST(Minimize, SeparableBoxDataRecoversCanonicalDirection) {
  const auto ds = generate_separable(10000, 10, 31);
  ObjectiveSpec spec;
  EmpiricalObjective f(spec, ds);
  const auto r = minimize(f, start_point(11, 5, 0), SolveOptions{});
  const Vector w = r.minimizer.head(10);
  EXPECT_LE(sin_angle(w, Hyperplane::canonical(10).w), 0.1);
  EXPECT_LE(r.grad_norm, 1e-6);
}

TEST(StartPoints, UnitSphereAndReproducible) {
  for (std::size_t k = 0; k < 50; ++k) {
    const Vector a = start_point(11, 99, k);
    EXPECT_NEAR(a.norm(), 1.0, 1e-14);
    EXPECT_EQ(a, start_point(11, 99, k));
    if (k > 0) {
      EXPECT_NE(a, start_point(11, 99, k - 1));
    }
  }
}

TEST(Multistart, ClustersPartitionSuccessfulRunsAndFailuresAreReported) {
  // Nonfinite whenever the start lies in x0 > 0.
  auto f = [](const Vector& x) {
    if (x[0] > 0.0 && x.norm() > 0.5) return Evaluation{std::nan(""), x};
    return Evaluation{0.5 * x.squaredNorm(), x};
  };
  const auto r = multistart(f, 3, 12, SolveOptions{}, Vector::Constant(2, 1.0));
  EXPECT_FALSE(r.failed.empty());
  EXPECT_EQ(r.failed.size(), r.failure_messages.size());
  std::vector<int> seen(12, 0);
  for (auto k : r.failed) ++seen[k];
  for (const auto& c : r.clusters)
    for (auto k : c.members) ++seen[k];
  for (int s : seen) EXPECT_EQ(s, 1);
}

TEST(Multistart, SameStartSameReport) {
  const auto ds = generate_separable(200, 3, 4);
  EmpiricalObjective f(ObjectiveSpec{}, ds);
  const Vector e1 = Hyperplane::canonical(3).w;
  SolveOptions o;
  o.seed = 17;
  const auto a = multistart(f, 4, 3, o, e1);
  const auto b = multistart(f, 4, 3, o, e1);
  ASSERT_EQ(a.runs.size(), b.runs.size());
  for (std::size_t k = 0; k < a.runs.size(); ++k) EXPECT_EQ(a.runs[k].minimizer, b.runs[k].minimizer);
  EXPECT_EQ(a.clusters.size(), b.clusters.size());
}

TEST(Clustering, Thresholds) {
  Vector a(3), b(3);
  a << 1.0, 0.0, 0.5;
  b << 1.0, 0.005, 0.5;
  EXPECT_TRUE(same_minimizer(a, 1.0, b, 1.0 + 1e-7));
  EXPECT_FALSE(same_minimizer(a, 1.0, b, 1.0 + 1e-5));
  b << 1.0, 0.05, 0.5;
  EXPECT_FALSE(same_minimizer(a, 1.0, b, 1.0));
  b << 1.0, 0.0, 0.6;
  EXPECT_FALSE(same_minimizer(a, 1.0, b, 1.0));
}
