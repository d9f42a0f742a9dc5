#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "hartl/classical/kmm.hpp"
#include "hartl/classical/toy.hpp"
#include "hartl/classical/tradaboost.hpp"

using namespace hartl;
using namespace hartl::classical;

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

double accuracy(const std::vector<int>& p, const std::vector<int>& y) {
  int hit = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hit += p[i] == y[i];
  return static_cast<double>(hit) / static_cast<double>(y.size());
}

}  // namespace

TEST(Kmm, IdenticalSamplesNeedNoReweighting) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  Matrix x(60, 2);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  const auto r = kmm_weights(x, x);
  for (Eigen::Index i = 0; i < r.beta.size(); ++i) EXPECT_NEAR(r.beta(i), 1.0, 1e-4);
}

TEST(Kmm, TracksTheGaussianDensityRatio) {
  const Matrix xs = gaussian_samples(200, 0.0, 31);
  const Matrix xt = gaussian_samples(200, 0.5, 32);
  const auto r = kmm_weights(xs, xt);
  std::vector<double> beta(r.beta.data(), r.beta.data() + r.beta.size());
  std::vector<double> truth(200);
  for (int i = 0; i < 200; ++i) truth[i] = std::exp(0.5 * xs(i, 0) - 0.125);
  EXPECT_GT(spearman(beta, truth), 0.8);
}

TEST(Kmm, ThreePointProblemMatchesGridSearch) {
  Matrix xs(3, 1), xt(4, 1);
  xs << -1.0, 0.0, 1.5;
  xt << 0.5, 1.0, 1.2, 2.0;
  const double B = 2.0;
  const double eps = 0.3;
  const auto p = make_kmm_problem(xs, xt, 1.0, B, eps);
  const auto r = solve_kmm(p);

  auto search = [&](Vector lo, Vector hi, double step) {
    Vector best = Vector::Zero(3);
    double best_obj = std::numeric_limits<double>::infinity();
    Vector b(3);
    for (b(0) = lo(0); b(0) <= hi(0) + 1e-12; b(0) += step) {
      for (b(1) = lo(1); b(1) <= hi(1) + 1e-12; b(1) += step) {
        for (b(2) = lo(2); b(2) <= hi(2) + 1e-12; b(2) += step) {
          if (std::abs(b.mean() - 1.0) > eps) continue;
          const double o = p.objective(b);
          if (o < best_obj) {
            best_obj = o;
            best = b;
          }
        }
      }
    }
    return best;
  };
  const Vector coarse = search(Vector::Zero(3), Vector::Constant(3, B), 0.01);
  const Vector fine = search((coarse.array() - 0.02).max(0.0).matrix(), (coarse.array() + 0.02).min(B).matrix(), 0.0002);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(r.beta(i), fine(i), 1e-3) << i;
  EXPECT_LE(r.objective, p.objective(fine) + 1e-9);
}

TEST(Kmm, AlwaysFeasibleAndNoWorseThanUniform) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> size(2, 40);
  std::uniform_real_distribution<double> shift(-1.0, 1.0);
  const double bounds[] = {1.2, 3.0, 1000.0};
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix xs = gaussian_samples(size(rng), 0.0, 100 + trial);
    const Matrix xt = gaussian_samples(size(rng), shift(rng), 200 + trial);
    const double B = bounds[trial % 3];
    const std::optional<double> eps = trial % 2 ? std::optional<double>(0.05) : std::nullopt;
    const double sigma = median_bandwidth(xs, xt);
    const auto p = make_kmm_problem(xs, xt, sigma, B, eps);
    const auto r = kmm_weights(xs, xt, sigma, B, eps);
    ASSERT_TRUE(p.feasible(r.beta)) << "trial " << trial;
    ASSERT_LE(r.objective, p.objective(Vector::Ones(p.size())) + 1e-12) << "trial " << trial;
  }
}

TEST(Kmm, KernelIsSymmetricAndKappaNonNegative) {
  const Matrix xs = gaussian_samples(25, 0.0, 1);
  const Matrix xt = gaussian_samples(10, 1.0, 2);
  const auto p = make_kmm_problem(xs, xt, 0.7, 10.0);
  EXPECT_TRUE(p.K.isApprox(p.K.transpose(), 0.0));
  Eigen::SelfAdjointEigenSolver<Matrix> es(p.K);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-9);
  EXPECT_GE(p.kappa.minCoeff(), 0.0);
  EXPECT_DOUBLE_EQ(p.eps, 10.0 / 5.0);
}

TEST(Kmm, InfeasibleBoundsRejectedBeforeSolving) {
  const Matrix xs = gaussian_samples(4, 0.0, 1);
  EXPECT_THROW(make_kmm_problem(xs, xs, 1.0, 0.5, 0.1), ValidationError);
  EXPECT_THROW(kmm_weights(xs, xs, 1.0, 0.5, 0.1), ValidationError);
  EXPECT_NO_THROW(kmm_weights(xs, xs, 1.0, 0.5, 0.5));
}

TEST(TrAdaBoost, SingleRoundUpdateByHand) {
  EXPECT_DOUBLE_EQ(round_beta(0.2), 0.25);
  const std::vector<double> w = {1.0, 3.0, 2.0, 5.0};
  const std::vector<int> miss = {1, 0, 1, 0};
  const auto out = reweight(w, 2, miss, 0.5, 0.25);
  EXPECT_EQ(out[0], 0.5);
  EXPECT_EQ(out[1], 3.0);
  EXPECT_EQ(out[2], 8.0);
  EXPECT_EQ(out[3], 5.0);
}

TEST(TrAdaBoost, GlobalBeta) {
  EXPECT_EQ(global_beta(1, 10), 1.0);
  EXPECT_DOUBLE_EQ(global_beta(100, 20), 1.0 / (1.0 + std::sqrt(2.0 * std::log(100.0) / 20.0)));
  EXPECT_THROW(global_beta(0, 10), ValidationError);
}

TEST(TrAdaBoost, ZeroErrorIsClamped) {
  const double b = round_beta(0.0);
  EXPECT_GT(b, 0.0);
  EXPECT_TRUE(std::isfinite(1.0 / b));
}

TEST(TrAdaBoost, PositivityAndMonotoneRules) {
  std::mt19937_64 rng(6);
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> err(0.0, 0.49);
  const std::size_t n = 5, m = 5;
  std::vector<double> w(n + m, 1.0);
  const double beta = global_beta(n, 30);
  for (int t = 0; t < 30; ++t) {
    std::vector<int> miss(n + m);
    for (auto& v : miss) v = coin(rng);
    miss[0] = 1;  // source instance wrong every round
    miss[n] = 1;  // target instance wrong every round
    const auto next = reweight(w, n, miss, beta, round_beta(err(rng)));
    ASSERT_LE(next[0], w[0]);
    ASSERT_GT(next[n], w[n]);
    for (double v : next) ASSERT_GT(v, 0.0);
    w = next;
  }
}

TEST(TrAdaBoost, BeatsOrMatchesSourceOnlyStump) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto src = shifted_binary(400, false, seed * 10 + 1);
    const auto tgt = shifted_binary(20, true, seed * 10 + 2);
    const auto test = shifted_binary(2000, true, seed * 10 + 3);
    const auto ens = tradaboost(src.x, src.y, tgt.x, tgt.y, 20);
    const Stump stump = fit_stump(src.x, src.y, std::vector<double>(src.y.size(), 1.0));
    std::vector<int> stump_pred;
    for (Eigen::Index i = 0; i < test.x.rows(); ++i) stump_pred.push_back(stump.predict(RowVector(test.x.row(i))));
    const double ens_acc = accuracy(ens.predict(test.x), test.y);
    const double stump_acc = accuracy(stump_pred, test.y);
    EXPECT_GE(ens_acc, stump_acc) << "seed " << seed;
    for (double v : ens.weights) EXPECT_GT(v, 0.0);
  }
}

TEST(TrAdaBoost, StopsWhenTargetErrorReachesHalf) {
  // target labels are the complement of the source rule
  auto src = shifted_binary(200, false, 1, 0.0);
  auto tgt = src;
  tgt.x = src.x.topRows(5);
  tgt.y.assign(src.y.begin(), src.y.begin() + 5);
  for (int& y : tgt.y) y = 1 - y;
  const auto r = tradaboost(src.x, src.y, tgt.x, tgt.y, 10);
  EXPECT_TRUE(r.stopped_early);
  EXPECT_TRUE(r.rounds.empty());
  EXPECT_NE(r.stop_reason.find(">= 0.5"), std::string::npos);
  EXPECT_THROW(r.predict_one(RowVector(src.x.row(0))), Error);
}
