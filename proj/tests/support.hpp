#pragma once

#include <random>

#include <Eigen/Core>

#include "xbar/crossbar.hpp"

namespace xbar::testing {

inline Eigen::MatrixXi random_levels(std::mt19937_64& rng, int rows, int cols, int max_level) {
  std::uniform_int_distribution<int> d(0, max_level);
  Eigen::MatrixXi m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = d(rng);
  return m;
}

inline BitVector random_bits(std::mt19937_64& rng, int n, double p = 0.5) {
  std::bernoulli_distribution d(p);
  BitVector b(n);
  for (int i = 0; i < n; ++i) b[i] = d(rng) ? 1 : 0;
  return b;
}

inline double rel_diff(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace xbar::testing
