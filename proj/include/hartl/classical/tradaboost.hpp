#ifndef HARTL_CLASSICAL_TRADABOOST_HPP_
#define HARTL_CLASSICAL_TRADABOOST_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "hartl/common.hpp"

namespace hartl::classical {

using json = nlohmann::json;

/// Depth-1 tree on one feature: predicts `polarity` when x[feature] > threshold.
struct Stump {
  int feature = 0;
  double threshold = 0.0;
  int polarity = 1;

  int predict(const Eigen::Ref<const RowVector>& x) const { return x(feature) > threshold ? polarity : 1 - polarity; }

  json to_json() const { return {{"feature", feature}, {"threshold", threshold}, {"polarity", polarity}}; }
};

/// Minimizes the weighted 0/1 error. Weights need not be normalized.
inline Stump fit_stump(const Matrix& x, const std::vector<int>& y, const std::vector<double>& w) {
  const Eigen::Index n = x.rows();
  if (n == 0) throw ValidationError("stump: empty training set");
  if (static_cast<Eigen::Index>(y.size()) != n || static_cast<Eigen::Index>(w.size()) != n) {
    throw DimensionError("stump: labels/weights do not match the sample count");
  }
  double total_pos = 0.0, total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y[i] != 0 && y[i] != 1) throw ValidationError("stump: labels must be 0 or 1");
    total += w[i];
    if (y[i] == 1) total_pos += w[i];
  }
  Stump best;
  double best_err = std::numeric_limits<double>::infinity();
  std::vector<Eigen::Index> order(n);
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x(a, f) < x(b, f); });
    // threshold below everything: all predicted `polarity`
    double pos_left = 0.0, all_left = 0.0;
    for (Eigen::Index k = -1; k < n; ++k) {
      if (k >= 0) {
        const auto i = order[k];
        all_left += w[i];
        if (y[i] == 1) pos_left += w[i];
        if (k + 1 < n && x(order[k + 1], f) == x(i, f)) continue;
      }
      const double thr = k < 0 ? x(order[0], f) - 1.0
                               : (k + 1 < n ? 0.5 * (x(order[k], f) + x(order[k + 1], f)) : x(order[k], f));
      const double neg_left = all_left - pos_left;
      const double pos_right = total_pos - pos_left;
      const double neg_right = (total - total_pos) - neg_left;
      // polarity 1: left -> 0, right -> 1
      const double err1 = pos_left + neg_right;
      const double err0 = neg_left + pos_right;
      if (err1 < best_err) {
        best_err = err1;
        best = {static_cast<int>(f), thr, 1};
      }
      if (err0 < best_err) {
        best_err = err0;
        best = {static_cast<int>(f), thr, 0};
      }
    }
  }
  return best;
}

/// 1 / (1 + sqrt(2 ln n / N)) with n source instances and N rounds.
inline double global_beta(std::size_t n_source, int rounds) {
  if (n_source < 1) throw ValidationError("tradaboost: need at least one source instance");
  if (rounds < 1) throw ValidationError("tradaboost: rounds must be >= 1");
  return 1.0 / (1.0 + std::sqrt(2.0 * std::log(static_cast<double>(n_source)) / rounds));
}

constexpr double kErrorFloor = 1e-10;

inline double round_beta(double target_error) {
  const double e = std::max(target_error, kErrorFloor);
  return e / (1.0 - e);
}

/// One round of the update. Source entries (first n_source) are scaled by
/// beta^|h-c|, target entries by beta_t^-|h-c|. Weights stay unnormalized.
inline std::vector<double> reweight(const std::vector<double>& w, std::size_t n_source, const std::vector<int>& miss,
                                    double beta, double beta_t) {
  if (w.size() != miss.size()) throw DimensionError("tradaboost: weight/miss length mismatch");
  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    out[i] = i < n_source ? w[i] * std::pow(beta, miss[i]) : w[i] * std::pow(beta_t, -miss[i]);
  }
  return out;
}

struct BoostRound {
  Stump learner;
  double target_error = 0.0;
  double beta_t = 0.0;
};

struct TrAdaBoostResult {
  std::vector<BoostRound> rounds;  // completed rounds only
  double beta = 1.0;
  int requested_rounds = 0;
  bool stopped_early = false;
  std::string stop_reason;
  std::vector<double> weights;  // after the last completed round

  /// Weighted vote of the later half of the completed rounds:
  /// 1 iff sum -ln(beta_t) h_t(x) >= 1/2 sum -ln(beta_t).
  int predict_one(const Eigen::Ref<const RowVector>& x) const {
    if (rounds.empty()) throw Error("tradaboost: no completed rounds to vote with");
    const std::size_t first = rounds.size() / 2;
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t t = first; t < rounds.size(); ++t) {
      const double a = -std::log(rounds[t].beta_t);
      lhs += a * rounds[t].learner.predict(x);
      rhs += 0.5 * a;
    }
    return lhs >= rhs ? 1 : 0;
  }

  std::vector<int> predict(const Matrix& x) const {
    std::vector<int> out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = predict_one(RowVector(x.row(i)));
    return out;
  }

  json to_json() const {
    json r = json::array();
    for (const auto& b : rounds) {
      r.push_back({{"learner", b.learner.to_json()}, {"target_error", b.target_error}, {"beta_t", b.beta_t}});
    }
    return {{"beta", beta},
            {"requested_rounds", requested_rounds},
            {"stopped_early", stopped_early},
            {"stop_reason", stop_reason},
            {"rounds", r}};
  }
};

/// Binary TrAdaBoost with stump weak learners. Initial weights are uniform
/// over all n + m instances.
inline TrAdaBoostResult tradaboost(const Matrix& xs, const std::vector<int>& ys, const Matrix& xt,
                                   const std::vector<int>& yt, int rounds) {
  const std::size_t n = xs.rows(), m = xt.rows();
  if (m < 1) throw ValidationError("tradaboost: need at least one labelled target instance");
  if (ys.size() != n || yt.size() != m) throw DimensionError("tradaboost: label counts differ from sample counts");
  if (xs.cols() != xt.cols()) throw DimensionError("tradaboost: source and target feature counts differ");
  TrAdaBoostResult res;
  res.beta = global_beta(n, rounds);
  res.requested_rounds = rounds;
  Matrix x(n + m, xs.cols());
  x << xs, xt;
  std::vector<int> y(ys);
  y.insert(y.end(), yt.begin(), yt.end());
  std::vector<double> w(n + m, 1.0);
  for (int t = 0; t < rounds; ++t) {
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    std::vector<double> p(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) p[i] = w[i] / total;
    Stump h = fit_stump(x, y, p);
    std::vector<int> miss(n + m);
    double err_num = 0.0, err_den = 0.0;
    for (std::size_t i = 0; i < n + m; ++i) {
      miss[i] = std::abs(h.predict(RowVector(x.row(i))) - y[i]);
      if (i >= n) {
        err_num += w[i] * miss[i];
        err_den += w[i];
      }
    }
    const double eps_t = err_num / err_den;
    if (eps_t >= 0.5) {
      res.stopped_early = true;
      res.stop_reason = "round " + std::to_string(t + 1) + ": target error " + std::to_string(eps_t) + " >= 0.5";
      break;
    }
    const double bt = round_beta(eps_t);
    res.rounds.push_back({h, eps_t, bt});
    w = reweight(w, n, miss, res.beta, bt);
  }
  res.weights = w;
  return res;
}

}  // namespace hartl::classical

#endif  // HARTL_CLASSICAL_TRADABOOST_HPP_
