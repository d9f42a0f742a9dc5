#ifndef HARTL_MODEL_OPTIMIZER_HPP_
#define HARTL_MODEL_OPTIMIZER_HPP_

#include <set>
#include <string>

#include "hartl/model/parameters.hpp"

namespace hartl::model {

struct RmsPropConfig {
  double learning_rate = 1e-3;
  double decay = 0.9;
  double epsilon = 1e-8;
};

/// RMSProp: s <- decay * s + (1 - decay) * g^2; p <- p - lr * g / (sqrt(s) + eps).
/// Groups listed in `frozen` are skipped entirely, so their parameters and
/// optimiser state stay bit-identical.
class RmsProp {
 public:
  RmsProp(const ParameterSet& params, RmsPropConfig cfg) : cfg_(cfg), square_avg_(params.zeros_like()) {
    if (!(cfg_.learning_rate > 0.0)) throw ValidationError("rmsprop: learning_rate must be > 0");
    if (cfg_.decay < 0.0 || cfg_.decay >= 1.0) throw ValidationError("rmsprop: decay must be in [0, 1)");
  }

  void step(ParameterSet& params, const ParameterSet& grads, const std::set<std::string>& frozen = {}) {
    auto& pg = params.groups();
    const auto& gg = grads.groups();
    auto& sg = square_avg_.groups();
    for (std::size_t i = 0; i < pg.size(); ++i) {
      if (frozen.count(pg[i].name)) continue;
      for (std::size_t j = 0; j < pg[i].tensors.size(); ++j) {
        auto s = sg[i].tensors[j].array();
        const auto g = gg[i].tensors[j].array();
        s = cfg_.decay * s + (1.0 - cfg_.decay) * g.square();
        pg[i].tensors[j].array() -= cfg_.learning_rate * g / (s.sqrt() + cfg_.epsilon);
      }
    }
  }

  const RmsPropConfig& config() const { return cfg_; }

 private:
  RmsPropConfig cfg_;
  ParameterSet square_avg_;
};

}  // namespace hartl::model

#endif  // HARTL_MODEL_OPTIMIZER_HPP_
