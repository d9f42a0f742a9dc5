#ifndef HARTL_CLASSICAL_TOY_HPP_
#define HARTL_CLASSICAL_TOY_HPP_

#include <random>
#include <vector>

#include "hartl/common.hpp"

namespace hartl::classical {

/// m samples of N(mean, 1) in one dimension.
inline Matrix gaussian_samples(int m, double mean, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(mean, 1.0);
  Matrix x(m, 1);
  for (int i = 0; i < m; ++i) x(i, 0) = n(rng);
  return x;
}

struct LabeledSamples {
  Matrix x;
  std::vector<int> y;
};

/// Two-feature binary task. Source: x ~ N(0, I), y = [x0 + 0.3 x1 > 0].
/// Target: x0 shifted by +0.5 and the boundary moved to x0 > 0.6. Labels flip
/// with probability `noise` in both domains.
inline LabeledSamples shifted_binary(int n, bool target, std::uint64_t seed, double noise = 0.05) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LabeledSamples s{Matrix(n, 2), std::vector<int>(n)};
  for (int i = 0; i < n; ++i) {
    const double a = g(rng) + (target ? 0.5 : 0.0);
    const double b = g(rng);
    s.x(i, 0) = a;
    s.x(i, 1) = b;
    int y = target ? (a > 0.6) : (a + 0.3 * b > 0.0);
    if (u(rng) < noise) y = 1 - y;
    s.y[i] = y;
  }
  return s;
}

}  // namespace hartl::classical

#endif  // HARTL_CLASSICAL_TOY_HPP_
