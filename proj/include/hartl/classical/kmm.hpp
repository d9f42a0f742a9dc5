#ifndef HARTL_CLASSICAL_KMM_HPP_
#define HARTL_CLASSICAL_KMM_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Eigenvalues>

#include "hartl/common.hpp"

namespace hartl::classical {

/// Median of the pairwise Euclidean distances over the pooled sample.
inline double median_bandwidth(const Matrix& a, const Matrix& b) {
  Matrix pooled(a.rows() + b.rows(), a.cols());
  pooled << a, b;
  std::vector<double> d;
  d.reserve(pooled.rows() * (pooled.rows() - 1) / 2);
  for (Eigen::Index i = 0; i < pooled.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < pooled.rows(); ++j) d.push_back((pooled.row(i) - pooled.row(j)).norm());
  }
  if (d.empty()) return 1.0;
  auto mid = d.begin() + d.size() / 2;
  std::nth_element(d.begin(), mid, d.end());
  return *mid > 0.0 ? *mid : 1.0;
}

/// k(x, y) = exp(-|x - y|^2 / (2 sigma^2))
inline Matrix gaussian_kernel(const Matrix& a, const Matrix& b, double sigma) {
  Matrix k(a.rows(), b.rows());
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) k(i, j) = std::exp(-(a.row(i) - b.row(j)).squaredNorm() * inv);
  }
  return k;
}

/// minimize 1/2 b'Kb - kappa'b  s.t.  0 <= b_i <= B,  |mean(b) - 1| <= eps
struct KmmProblem {
  Matrix K;
  Vector kappa;
  double B = 1000.0;
  double eps = 0.0;

  Eigen::Index size() const { return kappa.size(); }
  double objective(const Vector& beta) const { return 0.5 * beta.dot(K * beta) - kappa.dot(beta); }

  bool feasible(const Vector& beta, double tol = 1e-12) const {
    if (beta.size() != size()) return false;
    for (Eigen::Index i = 0; i < beta.size(); ++i) {
      if (!(beta(i) >= 0.0 && beta(i) <= B)) return false;
    }
    return std::abs(beta.mean() - 1.0) <= eps + tol;
  }
};

/// kappa_i = (m / m') * sum_j k(x_i, x'_j), summed over target points.
inline KmmProblem make_kmm_problem(const Matrix& source, const Matrix& target, double sigma, double B,
                                   std::optional<double> eps = std::nullopt) {
  if (source.rows() < 1 || target.rows() < 1) throw ValidationError("kmm: need at least one source and one target sample");
  if (source.cols() != target.cols()) throw DimensionError("kmm: source and target feature counts differ");
  if (!(sigma > 0.0)) throw ValidationError("kmm: bandwidth must be > 0");
  if (!(B > 0.0)) throw ValidationError("kmm: B must be > 0");
  const double m = static_cast<double>(source.rows());
  KmmProblem p;
  p.B = B;
  p.eps = eps.value_or(B / std::sqrt(m));
  if (!(p.eps >= 0.0)) throw ValidationError("kmm: eps must be >= 0");
  // mean(beta) can reach at most B
  if (B < 1.0 - p.eps) {
    throw ValidationError("kmm: infeasible, B = " + std::to_string(B) + " cannot reach mean 1 - eps = " +
                          std::to_string(1.0 - p.eps));
  }
  p.K = gaussian_kernel(source, source, sigma);
  p.kappa = (m / static_cast<double>(target.rows())) * gaussian_kernel(source, target, sigma).rowwise().sum();
  return p;
}

/// Euclidean projection onto the box intersected with the sum slab: the
/// projection is clip(y - nu) with nu found by bisection.
inline Vector project_kmm(const Vector& y, double B, double lo_sum, double hi_sum) {
  auto clipped = [&](double nu) { return (y.array() - nu).cwiseMax(0.0).cwiseMin(B).matrix().eval(); };
  Vector x = clipped(0.0);
  double s = x.sum();
  if (s >= lo_sum && s <= hi_sum) return x;
  const double target = s > hi_sum ? hi_sum : lo_sum;
  // sum is non-increasing in nu
  double a = y.minCoeff() - B - 1.0;
  double b = y.maxCoeff() + 1.0;
  for (int it = 0; it < 200 && b - a > 0.0; ++it) {
    const double mid = 0.5 * (a + b);
    if (mid == a || mid == b) break;
    if (clipped(mid).sum() > target) a = mid;
    else b = mid;
  }
  // pick the side that lands inside the slab
  Vector xa = clipped(a), xb = clipped(b);
  const double sa = xa.sum(), sb = xb.sum();
  if (sb >= lo_sum && sb <= hi_sum) return xb;
  if (sa >= lo_sum && sa <= hi_sum) return xa;
  // rounding left both ends just outside: rescale the free coordinates
  Vector best = std::abs(sa - target) < std::abs(sb - target) ? xa : xb;
  const double diff = target - best.sum();
  std::vector<Eigen::Index> free;
  for (Eigen::Index i = 0; i < best.size(); ++i) {
    if (best(i) > 0.0 && best(i) < B) free.push_back(i);
  }
  for (auto i : free) best(i) = std::clamp(best(i) + diff / static_cast<double>(free.size()), 0.0, B);
  return best;
}

struct KmmOptions {
  int max_iterations = 20000;
  double tolerance = 1e-10;  // on the step norm
};

struct KmmResult {
  Vector beta;
  double objective = 0.0;
  int iterations = 0;
  double sigma = 0.0;
  double eps = 0.0;
};

/// FISTA with exact projection, started from the projection of the all-ones
/// vector. Returns the best iterate seen.
inline KmmResult solve_kmm(const KmmProblem& p, const KmmOptions& opts = {}) {
  const Eigen::Index m = p.size();
  const double lo = static_cast<double>(m) * (1.0 - p.eps);
  const double hi = static_cast<double>(m) * (1.0 + p.eps);
  Eigen::SelfAdjointEigenSolver<Matrix> es(p.K, Eigen::EigenvaluesOnly);
  const double L = std::max(es.eigenvalues().maxCoeff(), 1e-12);
  Vector x = project_kmm(Vector::Ones(m), p.B, lo, hi);
  Vector y = x;
  double t = 1.0;
  KmmResult r;
  r.beta = x;
  r.objective = p.objective(x);
  for (int it = 1; it <= opts.max_iterations; ++it) {
    const Vector grad = p.K * y - p.kappa;
    Vector next = project_kmm(y - grad / L, p.B, lo, hi);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double step = (next - x).norm();
    y = next + ((t - 1.0) / t_next) * (next - x);
    x = std::move(next);
    t = t_next;
    const double f = p.objective(x);
    if (f < r.objective) {
      r.objective = f;
      r.beta = x;
    }
    r.iterations = it;
    if (step <= opts.tolerance * std::max(1.0, x.norm())) break;
  }
  r.eps = p.eps;
  if (!p.feasible(r.beta)) throw Error("kmm: solver returned an infeasible point");
  return r;
}

/// Source-instance weights matching the target mean in the Gaussian RKHS.
/// sigma <= 0 selects the median heuristic; eps defaults to B / sqrt(m).
inline KmmResult kmm_weights(const Matrix& source, const Matrix& target, double sigma = 0.0, double B = 1000.0,
                             std::optional<double> eps = std::nullopt, const KmmOptions& opts = {}) {
  if (source.rows() < 1 || target.rows() < 1) throw ValidationError("kmm: need at least one source and one target sample");
  if (source.cols() != target.cols()) throw DimensionError("kmm: source and target feature counts differ");
  const double s = sigma > 0.0 ? sigma : median_bandwidth(source, target);
  auto p = make_kmm_problem(source, target, s, B, eps);
  auto r = solve_kmm(p, opts);
  r.sigma = s;
  return r;
}

}  // namespace hartl::classical

#endif  // HARTL_CLASSICAL_KMM_HPP_
