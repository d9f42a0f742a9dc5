#ifndef HARTL_METRICS_HPP_
#define HARTL_METRICS_HPP_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hartl/common.hpp"

namespace hartl::metrics {

/// Confusion matrix (rows = truth, cols = prediction, class id k at index
/// k - 1), per-class F1 and the support-weighted F1.
struct EvalReport {
  Eigen::MatrixXi confusion;
  std::vector<double> per_class_f1;
  std::vector<int> support;
  double weighted_f1 = 0.0;
  double accuracy = 0.0;
  std::optional<double> domain_accuracy;

  int total() const { return confusion.sum(); }

  nlohmann::json to_json() const {
    nlohmann::json c = nlohmann::json::array();
    for (int r = 0; r < confusion.rows(); ++r) {
      std::vector<int> row(confusion.cols());
      for (int k = 0; k < confusion.cols(); ++k) row[k] = confusion(r, k);
      c.push_back(row);
    }
    nlohmann::json j = {{"weighted_f1", weighted_f1}, {"accuracy", accuracy}, {"per_class_f1", per_class_f1},
                        {"support", support},         {"confusion", c}};
    if (domain_accuracy) j["domain_accuracy"] = *domain_accuracy;
    return j;
  }
};

/// Support-weighted F1 over class ids 1..n_classes.
///
/// A class with zero support has weight zero whatever its predictions, and a
/// class with no true positives has F1 = 0 (covers the 0/0 cases).
inline EvalReport weighted_f1(std::span<const int> predictions, std::span<const int> truth, int n_classes) {
  if (predictions.empty() || truth.empty()) throw ValidationError("weighted_f1: empty input");
  if (predictions.size() != truth.size()) throw ValidationError("weighted_f1: length mismatch");
  if (n_classes < 1) throw ValidationError("weighted_f1: n_classes must be >= 1");
  EvalReport r;
  r.confusion = Eigen::MatrixXi::Zero(n_classes, n_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i];
    const int p = predictions[i];
    if (t < 1 || t > n_classes || p < 1 || p > n_classes) {
      throw ValidationError("weighted_f1: class id out of range 1.." + std::to_string(n_classes));
    }
    ++r.confusion(t - 1, p - 1);
  }
  const int n = static_cast<int>(truth.size());
  r.per_class_f1.assign(n_classes, 0.0);
  r.support.assign(n_classes, 0);
  int correct = 0;
  for (int k = 0; k < n_classes; ++k) {
    const int tp = r.confusion(k, k);
    const int support = r.confusion.row(k).sum();
    const int predicted = r.confusion.col(k).sum();
    correct += tp;
    r.support[k] = support;
    if (tp > 0) {
      const double precision = static_cast<double>(tp) / predicted;
      const double recall = static_cast<double>(tp) / support;
      r.per_class_f1[k] = 2.0 * precision * recall / (precision + recall);
    }
  }
  double f1 = 0.0;
  for (int k = 0; k < n_classes; ++k) {
    f1 += (static_cast<double>(r.support[k]) / n) * r.per_class_f1[k];
  }
  r.weighted_f1 = f1;
  r.accuracy = static_cast<double>(correct) / n;
  return r;
}

/// Fraction of exact matches between predicted and true domain tags.
template <typename Tag>
double domain_accuracy(std::span<const Tag> predictions, std::span<const Tag> truth) {
  if (predictions.empty()) throw ValidationError("domain_accuracy: empty input");
  if (predictions.size() != truth.size()) throw ValidationError("domain_accuracy: length mismatch");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += predictions[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

template <typename Tag>
double domain_accuracy(const std::vector<Tag>& predictions, const std::vector<Tag>& truth) {
  return domain_accuracy(std::span<const Tag>(predictions), std::span<const Tag>(truth));
}

}  // namespace hartl::metrics

#endif  // HARTL_METRICS_HPP_
