#ifndef HARTL_TRAIN_LAMBDA_HPP_
#define HARTL_TRAIN_LAMBDA_HPP_

#include <algorithm>
#include <cmath>

#include "hartl/common.hpp"

namespace hartl::train {

/// Bounds and rates of the feedback rule that keeps the domain classifier's
/// accuracy inside [acc_min, acc_max].
struct LambdaControllerParams {
  double acc_max = 0.8;
  double acc_min = 0.6;
  double lambda_max = 10000.0;
  double lambda_mid = 10.0;
  double lambda_min = 0.1;
  double alpha = 1.5;
  double beta = 0.9;

  void validate() const {
    if (!(lambda_min > 0.0 && lambda_min <= lambda_mid && lambda_mid <= lambda_max)) {
      throw ValidationError("lambda controller: need 0 < lambda_min <= lambda_mid <= lambda_max");
    }
    if (!(acc_min <= acc_max)) throw ValidationError("lambda controller: acc_min must be <= acc_max");
    if (!(alpha > 1.0)) throw ValidationError("lambda controller: alpha must be > 1");
    if (!(beta > 0.0 && beta < 1.0)) throw ValidationError("lambda controller: beta must be in (0, 1)");
  }
};

/// One step of the piecewise rule:
///   grow by alpha      if A_d > acc_max and lambda < lambda_max
///   shrink by 1/alpha  if A_d < acc_min and lambda > lambda_mid
///   shrink by beta     if A_d < acc_min and lambda_min < lambda < lambda_mid
///   unchanged          otherwise
/// then clamped to [lambda_min, lambda_max].
inline double update_lambda(const LambdaControllerParams& p, double lambda, double domain_acc) {
  if (!(domain_acc >= 0.0 && domain_acc <= 1.0)) {
    throw ValidationError("update_lambda: domain accuracy must lie in [0, 1]");
  }
  double next = lambda;
  if (domain_acc > p.acc_max && lambda < p.lambda_max) {
    next = p.alpha * lambda;
  } else if (domain_acc < p.acc_min && lambda > p.lambda_mid) {
    next = lambda / p.alpha;
  } else if (domain_acc < p.acc_min && lambda > p.lambda_min && lambda < p.lambda_mid) {
    next = p.beta * lambda;
  }
  return std::clamp(next, p.lambda_min, p.lambda_max);
}

class AdaptiveLambdaController {
 public:
  explicit AdaptiveLambdaController(LambdaControllerParams params = {}, double initial = 1.0)
      : params_(params) {
    params_.validate();
    lambda_ = std::clamp(initial, params_.lambda_min, params_.lambda_max);
  }

  double lambda() const { return lambda_; }
  const LambdaControllerParams& params() const { return params_; }

  double update(double domain_acc) {
    lambda_ = update_lambda(params_, lambda_, domain_acc);
    return lambda_;
  }

 private:
  LambdaControllerParams params_;
  double lambda_;
};

/// Fixed schedule 2 / (1 + exp(-gamma * p)) over training progress p.
inline double ganin_lambda(double progress, double gamma = 10.0) {
  if (!(progress >= 0.0 && progress <= 1.0)) throw ValidationError("ganin_lambda: progress must lie in [0, 1]");
  return 2.0 / (1.0 + std::exp(-gamma * progress));
}

}  // namespace hartl::train

#endif  // HARTL_TRAIN_LAMBDA_HPP_
