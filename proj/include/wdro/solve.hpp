#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wdro/errors.hpp"
#include "wdro/geometry.hpp"
#include "wdro/objective.hpp"
#include "wdro/rng.hpp"

namespace wdro {

/// Anything mapping a point to its value and gradient.
template <typename F>
concept SmoothObjective = requires(const F& f, const Vector& x) {
  { f(x) } -> std::convertible_to<Evaluation>;
};

enum class Method { CgPrPlus, Lbfgs };

struct SolveOptions {
  Method method = Method::CgPrPlus;
  int lbfgs_memory = 10;
  double grad_tol = 1e-8;
  int max_iters = 10000;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  int max_linesearch = 60;
  std::uint64_t seed = 0;

  void validate() const {
    require(grad_tol > 0.0, "grad_tol must be positive");
    require(max_iters > 0, "max_iters must be positive");
    require(max_linesearch > 0, "max_linesearch must be positive");
    require(0.0 < wolfe_c1 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0, "Wolfe constants need 0 < c1 < c2 < 1");
    require(method != Method::Lbfgs || lbfgs_memory > 0, "L-BFGS memory must be positive");
  }
};

inline std::string_view to_string(Method m) { return m == Method::CgPrPlus ? "cg" : "lbfgs"; }

struct LineSearchResult {
  double step = 0.0;
  Evaluation at;  // evaluation at x + step * direction
  bool satisfied = false;
  int evaluations = 0;
};

/// Bracketing/bisection search for a step satisfying the weak Wolfe
/// conditions
///   f(x + a p) <= f(x) + c1 a <g, p>,   <g(x + a p), p> >= c2 <g, p>.
/// On failure the best Armijo-satisfying step found is returned with
/// `satisfied == false` (step 0 if there is none).
template <SmoothObjective F>
LineSearchResult line_search_weak_wolfe(const F& f, const Vector& x, const Evaluation& at_x,
                                        const Vector& direction, const SolveOptions& opts,
                                        double initial_step = 1.0) {
  const double slope = at_x.gradient.dot(direction);
  require(slope < 0.0, "line search direction is not a descent direction");
  require(initial_step > 0.0 && std::isfinite(initial_step), "initial step must be positive");

  double lo = 0.0;
  double hi = kInfinity;
  double step = initial_step;
  LineSearchResult fallback;
  fallback.at = at_x;
  int evals = 0;
  for (int k = 0; k < opts.max_linesearch; ++k) {
    Evaluation trial = f(x + step * direction);
    ++evals;
    const bool finite = std::isfinite(trial.value) && trial.gradient.allFinite();
    if (!finite || trial.value > at_x.value + opts.wolfe_c1 * step * slope) {
      hi = step;
    } else if (trial.gradient.dot(direction) < opts.wolfe_c2 * slope) {
      lo = step;
      if (trial.value < fallback.at.value) {
        fallback.step = step;
        fallback.at = std::move(trial);
      }
    } else {
      return {step, std::move(trial), true, evals};
    }
    step = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * lo;
  }
  fallback.evaluations = evals;
  return fallback;
}

struct TraceEntry {
  int iteration = 0;
  double value = 0.0;
  double grad_norm = 0.0;
};

struct SolveReport {
  Vector minimizer;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string status;  // "converged", "max_iters" or "line_search_failed"
  int evaluations = 0;
  int restarts = 0;
  std::vector<TraceEntry> trace;
};

/// Observer invoked after each accepted step with the previous iterate, the
/// search direction, the accepted step length, and whether the step met both
/// Wolfe conditions (false for an Armijo-only fallback step).
using StepObserver =
    std::function<void(int iteration, const Vector& x, const Vector& direction, double step, bool wolfe)>;

namespace detail {

inline bool gradient_small(const Evaluation& e, const SolveOptions& opts) {
  return e.gradient.norm() <= opts.grad_tol * std::max(1.0, std::abs(e.value));
}

inline void check_finite(const Evaluation& e, const char* where) {
  if (!std::isfinite(e.value) || !e.gradient.allFinite())
    throw NumericalError(std::string("non-finite objective or gradient at ") + where);
}

// L-BFGS two-loop recursion: returns -H g.
inline Vector lbfgs_direction(const Vector& g, const std::deque<std::pair<Vector, Vector>>& memory) {
  Vector q = g;
  std::vector<double> alpha(memory.size());
  for (std::size_t k = memory.size(); k-- > 0;) {
    const auto& [s, y] = memory[k];
    alpha[k] = s.dot(q) / y.dot(s);
    q -= alpha[k] * y;
  }
  if (!memory.empty()) {
    const auto& [s, y] = memory.back();
    q *= s.dot(y) / y.squaredNorm();
  }
  for (std::size_t k = 0; k < memory.size(); ++k) {
    const auto& [s, y] = memory[k];
    const double beta = y.dot(q) / y.dot(s);
    q += (alpha[k] - beta) * s;
  }
  return -q;
}

}  // namespace detail

/// Minimizes a smooth function with PR+ nonlinear conjugate gradients or
/// L-BFGS, both globalized by the weak-Wolfe line search. Stops when
/// |grad| <= grad_tol * max(1, |f|), after max_iters, or when the line
/// search fails twice in a row (once along steepest descent).
template <SmoothObjective F>
SolveReport minimize(const F& f, const Vector& x0, const SolveOptions& opts,
                     const StepObserver& observer = {}) {
  opts.validate();
  SolveReport report;
  Vector x = x0;
  Evaluation current = f(x);
  ++report.evaluations;
  detail::check_finite(current, "the start point");

  Vector direction = -current.gradient;
  double previous_step = 0.0;
  double previous_slope = 0.0;
  std::deque<std::pair<Vector, Vector>> memory;
  report.trace.push_back({0, current.value, current.gradient.norm()});

  int iter = 0;
  report.status = "max_iters";
  while (true) {
    if (detail::gradient_small(current, opts)) {
      report.converged = true;
      report.status = "converged";
      break;
    }
    if (iter >= opts.max_iters) break;

    double slope = current.gradient.dot(direction);
    if (!(slope < 0.0)) {
      direction = -current.gradient;
      slope = -current.gradient.squaredNorm();
      memory.clear();
      ++report.restarts;
    }
    double initial = 1.0;
    if (iter == 0 || previous_step == 0.0)
      initial = std::min(1.0, 1.0 / current.gradient.norm());
    else if (opts.method == Method::CgPrPlus)
      initial = std::min(1e10, previous_step * previous_slope / slope);

    auto ls = line_search_weak_wolfe(f, x, current, direction, opts, initial);
    report.evaluations += ls.evaluations;
    if (!ls.satisfied) {
      const bool was_steepest = direction.isApprox(-current.gradient);
      if (ls.step == 0.0 && was_steepest) {
        report.status = "line_search_failed";
        break;
      }
      if (ls.step == 0.0) {
        direction = -current.gradient;
        memory.clear();
        ++report.restarts;
        previous_step = 0.0;
        continue;
      }
    }
    detail::check_finite(ls.at, "an accepted iterate");
    if (observer) observer(iter, x, direction, ls.step, ls.satisfied);

    const Vector step_vec = ls.step * direction;
    x += step_vec;
    Evaluation next = std::move(ls.at);
    ++iter;

    if (opts.method == Method::CgPrPlus) {
      const double beta_pr =
          next.gradient.dot(next.gradient - current.gradient) / current.gradient.squaredNorm();
      if (beta_pr <= 0.0) ++report.restarts;
      direction = -next.gradient + std::max(0.0, beta_pr) * direction;
    } else {
      Vector y = next.gradient - current.gradient;
      if (step_vec.dot(y) > 1e-12 * step_vec.norm() * y.norm()) {
        memory.emplace_back(step_vec, std::move(y));
        if (static_cast<int>(memory.size()) > opts.lbfgs_memory) memory.pop_front();
      }
      direction = detail::lbfgs_direction(next.gradient, memory);
    }
    previous_step = ls.step;
    previous_slope = slope;
    current = std::move(next);
    report.trace.push_back({iter, current.value, current.gradient.norm()});
    if (!ls.satisfied) {
      // The Armijo-only step still decreased f; retry from there once more
      // along steepest descent before giving up.
      direction = -current.gradient;
      memory.clear();
      previous_step = 0.0;
    }
  }
  report.minimizer = std::move(x);
  report.value = current.value;
  report.grad_norm = current.gradient.norm();
  report.iterations = iter;
  return report;
}

/// Uniform point on the unit sphere in R^dim.
inline Vector random_unit_vector(Eigen::Index dim, Rng& rng) {
  Vector v(dim);
  do {
    for (Eigen::Index j = 0; j < dim; ++j) v[j] = rng.normal();
  } while (v.norm() == 0.0);
  return v / v.norm();
}

/// Start point of restart `index`; each restart has its own stream.
inline Vector start_point(Eigen::Index dim, std::uint64_t seed, std::size_t index) {
  Rng rng(Rng::mix(seed + index), streams::kStarts);
  return random_unit_vector(dim, rng);
}

struct ClusterThresholds {
  double sin_angle = 1e-2;
  double intercept = 1e-2;
  double value = 1e-6;
};

struct Cluster {
  Vector representative;  // stacked (w, b) of the first member
  double value = 0.0;
  std::vector<std::size_t> members;  // run indices
  double sin_to_reference = 0.0;
};

struct MultiStartReport {
  std::vector<SolveReport> runs;            // in start order; failed runs left empty
  std::vector<std::size_t> failed;          // runs aborted by a numerical error
  std::vector<std::string> failure_messages;
  std::vector<Cluster> clusters;            // in order of first appearance

  /// Cluster with the lowest objective value.
  const Cluster& best() const {
    require(!clusters.empty(), "no successful runs");
    return *std::min_element(clusters.begin(), clusters.end(),
                             [](const Cluster& a, const Cluster& b) { return a.value < b.value; });
  }
};

/// Whether two stacked (w, b) minimizers with the given values are the
/// same local minimizer.
inline bool same_minimizer(const Vector& a, double value_a, const Vector& b, double value_b,
                           const ClusterThresholds& th = {}) {
  const auto d = a.size() - 1;
  const Vector wa = a.head(d);
  const Vector wb = b.head(d);
  const bool za = wa.squaredNorm() == 0.0;
  const bool zb = wb.squaredNorm() == 0.0;
  if (za != zb) return false;
  if (!za && sin_angle(wa, wb) > th.sin_angle) return false;
  const double ba = a[d];
  const double bb = b[d];
  if (std::abs(ba - bb) / (1.0 + std::max(std::abs(ba), std::abs(bb))) > th.intercept) return false;
  const double scale = std::max({std::abs(value_a), std::abs(value_b), 1e-300});
  return std::abs(value_a - value_b) / scale <= th.value;
}

/// Groups the successful runs of `report` into clusters, comparing each run
/// with the representative (first member) of the existing clusters.
inline void cluster_runs(MultiStartReport& report, const Vector& reference, const ClusterThresholds& th = {}) {
  report.clusters.clear();
  for (std::size_t k = 0; k < report.runs.size(); ++k) {
    if (std::find(report.failed.begin(), report.failed.end(), k) != report.failed.end()) continue;
    const auto& run = report.runs[k];
    bool placed = false;
    for (auto& c : report.clusters) {
      if (same_minimizer(c.representative, c.value, run.minimizer, run.value, th)) {
        c.members.push_back(k);
        placed = true;
        break;
      }
    }
    if (!placed) {
      Cluster c;
      c.representative = run.minimizer;
      c.value = run.value;
      c.members = {k};
      const Vector w = run.minimizer.head(run.minimizer.size() - 1);
      c.sin_to_reference = w.squaredNorm() > 0.0 ? sin_angle(w, reference) : 1.0;
      report.clusters.push_back(std::move(c));
    }
  }
}

/// Runs `minimize` from `n_starts` points drawn uniformly on the unit
/// sphere and clusters the resulting minimizers. `reference` is the
/// w-direction used for the reported sine of the angle.
template <SmoothObjective F>
MultiStartReport multistart(const F& f, Eigen::Index dim, std::size_t n_starts, const SolveOptions& opts,
                            const Vector& reference, const ClusterThresholds& th = {}) {
  require(n_starts >= 1, "multistart needs at least one start");
  require(reference.size() == dim - 1, "reference direction must have dimension d");
  MultiStartReport report;
  report.runs.resize(n_starts);
  for (std::size_t k = 0; k < n_starts; ++k) {
    try {
      report.runs[k] = minimize(f, start_point(dim, opts.seed, k), opts);
    } catch (const NumericalError& e) {
      report.failed.push_back(k);
      report.failure_messages.emplace_back(e.what());
    }
  }
  cluster_runs(report, reference, th);
  return report;
}

}  // namespace wdro
