#pragma once

// Random small instances for property tests.

#include <random>

#include "oracles.hpp"
#include "wdro/data.hpp"
#include "wdro/geometry.hpp"

namespace instances {

struct Instance {
  wdro::Dataset ds;
  wdro::Hyperplane h;
  std::vector<double> d;  // oracle distances
  std::vector<double> p;
};

/// n in [1, max_n], d in {1, 2, 3}, random positive weights, random labels
/// and hyperplane. About one instance in ten has w = 0 (infinite or zero
/// distances) and one in ten has integer-valued data so that ties and exact
/// zeros appear.
inline Instance random_instance(std::mt19937_64& gen, int max_n = 12) {
  std::uniform_int_distribution<int> n_dist(1, max_n), d_dist(1, 3), kind(0, 9), small_int(-3, 3);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> u(0.05, 1.0);
  const int n = n_dist(gen), dim = d_dist(gen), k = kind(gen);

  wdro::Matrix x(n, dim);
  wdro::Vector y(n), p(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) x(i, j) = k == 1 ? small_int(gen) : normal(gen);
    y[i] = normal(gen) > 0 ? 1.0 : -1.0;
    p[i] = u(gen);
  }
  p /= p.sum();
  // renormalize until the weights pass the 1e-12 sum check
  p[n - 1] = 1.0 - (p.sum() - p[n - 1]);
  if (!(p[n - 1] > 0.0)) p.setConstant(1.0 / n);

  wdro::Vector w(dim);
  for (int j = 0; j < dim; ++j) w[j] = k == 1 ? small_int(gen) : normal(gen);
  double b = k == 1 ? small_int(gen) : normal(gen);
  if (k == 0) w.setZero();

  Instance out{wdro::Dataset(x, y, p), wdro::Hyperplane(w, b), {}, {}};
  for (int i = 0; i < n; ++i) {
    out.d.push_back(oracle::distance(w, b, x.row(i).transpose(), y[i]));
    out.p.push_back(out.ds.weight(i));
  }
  return out;
}

}  // namespace instances
