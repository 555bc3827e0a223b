#pragma once

#include "ljcr/simulate.hpp"

#include <random>

namespace ljcr::test {

inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

inline Eigen::VectorXd uniform(std::mt19937& rng, Index n, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  Eigen::VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = d(rng);
  return v;
}

/// Random state with |q| < 1, moderate momenta and z inside the bristle bound.
inline State random_state(std::mt19937& rng, const Params& robot, const Friction& fric) {
  const Index n = robot.links;
  return {uniform(rng, n, -1.0, 1.0), uniform(rng, n, -2e-3, 2e-3),
          uniform(rng, n, -fric.bristle_bound(), fric.bristle_bound())};
}

}  // namespace ljcr::test
