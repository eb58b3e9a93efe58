#pragma once

#include <Eigen/Dense>
#include <random>
#include <string>

#include "fredgame/grid.hpp"
#include "fredgame/signals.hpp"

namespace testing {

using fredgame::MatrixXd;
using fredgame::VectorXd;

inline double max_abs(const MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline VectorXd random_vector(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> nd;
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = nd(rng);
  return v;
}

inline fredgame::IncrementLookup no_noise() {
  return [](const std::string&) -> const double* { return nullptr; };
}

}  // namespace testing
