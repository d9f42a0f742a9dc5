#include <algorithm>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "hartl/metrics.hpp"

using namespace hartl;
using hartl::metrics::weighted_f1;

namespace {

// Straight from the definitions, one class at a time, no confusion matrix.
double brute_weighted_f1(const std::vector<int>& pred, const std::vector<int>& truth, int n_classes) {
  const double n = static_cast<double>(truth.size());
  double total = 0.0;
  for (int k = 1; k <= n_classes; ++k) {
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool p = pred[i] == k;
      const bool t = truth[i] == k;
      if (p && t) ++tp;
      if (p && !t) ++fp;
      if (!p && t) ++fn;
    }
    const long support = tp + fn;
    if (support == 0 || tp == 0) continue;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    total += (static_cast<double>(support) / n) * (2.0 * precision * recall / (precision + recall));
  }
  return total;
}

}  // namespace

TEST(WeightedF1, WorkedExamples) {
  std::vector<int> all(17);
  for (int k = 0; k < 17; ++k) all[k] = k + 1;
  EXPECT_DOUBLE_EQ(weighted_f1(all, all, 17).weighted_f1, 1.0);

  const std::vector<int> truth = {1, 1, 2, 2};
  const std::vector<int> pred = {1, 2, 1, 2};
  const auto r = weighted_f1(pred, truth, 2);
  EXPECT_DOUBLE_EQ(r.per_class_f1[0], 0.5);
  EXPECT_DOUBLE_EQ(r.per_class_f1[1], 0.5);
  EXPECT_DOUBLE_EQ(r.weighted_f1, 0.5);
  EXPECT_EQ(r.confusion(0, 1), 1);
  EXPECT_EQ(r.total(), 4);

  const std::vector<int> ones = {1, 1};
  const std::vector<int> twos = {2, 2};
  EXPECT_DOUBLE_EQ(weighted_f1(twos, ones, 2).weighted_f1, 0.0);
}

TEST(WeightedF1, ZeroSupportClassHasNoWeight) {
  // class 3 is predicted but never true
  const std::vector<int> truth = {1, 1, 2, 2};
  const std::vector<int> pred = {1, 3, 2, 2};
  const auto r = weighted_f1(pred, truth, 3);
  EXPECT_EQ(r.support[2], 0);
  EXPECT_DOUBLE_EQ(r.per_class_f1[2], 0.0);
  EXPECT_NEAR(r.weighted_f1, 0.5 * (2.0 / 3.0) + 0.5 * 1.0, 1e-15);
}

TEST(WeightedF1, Errors) {
  const std::vector<int> empty;
  const std::vector<int> a = {1, 2};
  const std::vector<int> b = {1};
  const std::vector<int> out_of_range = {1, 4};
  EXPECT_THROW(weighted_f1(empty, empty, 3), ValidationError);
  EXPECT_THROW(weighted_f1(a, b, 3), ValidationError);
  EXPECT_THROW(weighted_f1(out_of_range, a, 3), ValidationError);
}

TEST(WeightedF1, MatchesBruteForceOracle) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 50)(rng);
    const int K = std::uniform_int_distribution<int>(1, 5)(rng);
    std::uniform_int_distribution<int> cls(1, K);
    std::vector<int> pred(n), truth(n);
    for (int i = 0; i < n; ++i) {
      truth[i] = cls(rng);
      pred[i] = std::bernoulli_distribution(0.4)(rng) ? truth[i] : cls(rng);
    }
    const auto r = weighted_f1(pred, truth, K);
    ASSERT_NEAR(r.weighted_f1, brute_weighted_f1(pred, truth, K), 1e-12) << "trial " << trial;
    ASSERT_EQ(r.total(), n);
  }
}

TEST(WeightedF1, PermutationInvariantAndWeightsSumToOne) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 40;
    std::uniform_int_distribution<int> cls(1, 6);
    std::vector<std::pair<int, int>> pairs(n);
    for (auto& p : pairs) p = {cls(rng), cls(rng)};
    auto split = [&](std::vector<int>& pr, std::vector<int>& tr) {
      pr.clear();
      tr.clear();
      for (const auto& [p, t] : pairs) {
        pr.push_back(p);
        tr.push_back(t);
      }
    };
    std::vector<int> p1, t1, p2, t2;
    split(p1, t1);
    const auto a = weighted_f1(p1, t1, 6);
    std::shuffle(pairs.begin(), pairs.end(), rng);
    split(p2, t2);
    const auto b = weighted_f1(p2, t2, 6);
    ASSERT_EQ(a.weighted_f1, b.weighted_f1);
    ASSERT_EQ(a.per_class_f1, b.per_class_f1);
    ASSERT_EQ(a.confusion, b.confusion);

    double w = 0.0;
    for (int s : a.support) w += static_cast<double>(s) / n;
    ASSERT_NEAR(w, 1.0, 1e-15);
  }
}

TEST(DomainAccuracy, Cases) {
  const std::vector<int> t = {0, 1, 1, 0};
  const std::vector<int> flipped = {1, 0, 0, 1};
  EXPECT_DOUBLE_EQ(metrics::domain_accuracy(t, t), 1.0);
  EXPECT_DOUBLE_EQ(metrics::domain_accuracy(flipped, t), 0.0);
  const std::vector<int> shorter = {0, 1};
  EXPECT_THROW(metrics::domain_accuracy(shorter, t), ValidationError);

  std::mt19937_64 rng(1);
  std::bernoulli_distribution coin(0.5);
  std::vector<int> guess(10000), truth(10000);
  for (int i = 0; i < 10000; ++i) {
    truth[i] = i % 2;
    guess[i] = coin(rng);
  }
  EXPECT_NEAR(metrics::domain_accuracy(guess, truth), 0.5, 0.02);
}
