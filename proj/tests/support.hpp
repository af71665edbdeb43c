#pragma once

#include "fplap/grid.hpp"

#include <random>

namespace testing {

inline fpl::Vector random_vector(int n, std::mt19937_64 &rng, double scale = 1.)
{
  std::normal_distribution<double> nd(0., scale);
  fpl::Vector                      v(n);
  for (int i = 0; i < n; ++i)
    v[i] = nd(rng);
  return v;
}

inline double rel_diff(double a, double b)
{
  return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

} // namespace testing
