#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "bbp/numerics/diff_array.hpp"

namespace bbp::test {

inline DiffArray<double> randn(Shape shape, std::uint64_t seed, double sd = 1.0, bool grad = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, sd);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = nd(rng);
  return DiffArray<double>(std::move(shape), std::move(v), grad);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = a.size() == b.size() ? 0.0 : 1e300;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace bbp::test
