#ifndef HARTL_TRAIN_CONFIG_HPP_
#define HARTL_TRAIN_CONFIG_HPP_

#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hartl/model/optimizer.hpp"

namespace hartl::train {

using json = nlohmann::json;

/// One iteration is one full pass over the training windows.
struct TrainConfig {
  model::RmsPropConfig optimizer;
  int batch_size = 100;
  int max_iterations = 30;
  std::uint64_t seed = 1;
  int eval_every = 1;
  double dropout = 0.0;

  /// Low learning rate used when fine-tuning transferred layers.
  static TrainConfig finetune_default() {
    TrainConfig c;
    c.optimizer.learning_rate = 5e-5;
    return c;
  }

  void validate() const {
    if (!(optimizer.learning_rate > 0.0)) throw ValidationError("train: learning_rate must be > 0");
    if (optimizer.decay < 0.0 || optimizer.decay >= 1.0) throw ValidationError("train: decay must be in [0, 1)");
    if (!(optimizer.epsilon > 0.0)) throw ValidationError("train: epsilon must be > 0");
    if (max_iterations < 1) throw ValidationError("train: max_iterations must be >= 1");
    if (batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
    if (eval_every < 1) throw ValidationError("train: eval_every must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw ValidationError("train: dropout must be in [0, 1)");
  }

  json to_json() const {
    return {{"learning_rate", optimizer.learning_rate},
            {"decay", optimizer.decay},
            {"epsilon", optimizer.epsilon},
            {"batch_size", batch_size},
            {"max_iterations", max_iterations},
            {"seed", seed},
            {"eval_every", eval_every},
            {"dropout", dropout}};
  }

  static TrainConfig from_json(const json& j) { return from_json(j, TrainConfig()); }

  static TrainConfig from_json(const json& j, TrainConfig base) {
    static const std::set<std::string> allowed = {"learning_rate",  "decay", "epsilon",    "batch_size",
                                                  "max_iterations", "seed",  "eval_every", "dropout"};
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!allowed.count(it.key())) throw ValidationError("train: unknown key '" + it.key() + "'");
    }
    base.optimizer.learning_rate = j.value("learning_rate", base.optimizer.learning_rate);
    base.optimizer.decay = j.value("decay", base.optimizer.decay);
    base.optimizer.epsilon = j.value("epsilon", base.optimizer.epsilon);
    base.batch_size = j.value("batch_size", base.batch_size);
    base.max_iterations = j.value("max_iterations", base.max_iterations);
    base.seed = j.value("seed", base.seed);
    base.eval_every = j.value("eval_every", base.eval_every);
    base.dropout = j.value("dropout", base.dropout);
    base.validate();
    return base;
  }

  std::string hash() const { return sha256_hex(to_json().dump()); }
};

/// One evaluation point. `val_*` is the model-selection set (source
/// validation for source-trained methods, a held-out slice of the tuning run
/// for fine-tuning); `target_*` is the target test set, reported only.
struct RunRow {
  int iteration = 0;
  double val_f1 = 0.0;
  double val_accuracy = 0.0;
  double target_f1 = 0.0;
  double target_accuracy = 0.0;
  std::optional<double> domain_accuracy;
  std::optional<double> lambda;
  double mean_loss = 0.0;

  json to_json() const {
    json j = {{"iteration", iteration},           {"val_f1", val_f1},
              {"val_accuracy", val_accuracy},     {"target_f1", target_f1},
              {"target_accuracy", target_accuracy}, {"mean_loss", mean_loss}};
    if (domain_accuracy) j["domain_accuracy"] = *domain_accuracy;
    if (lambda) j["lambda"] = *lambda;
    return j;
  }

  static RunRow from_json(const json& j) {
    RunRow r;
    r.iteration = j.at("iteration").get<int>();
    r.val_f1 = j.at("val_f1").get<double>();
    r.val_accuracy = j.value("val_accuracy", 0.0);
    r.target_f1 = j.at("target_f1").get<double>();
    r.target_accuracy = j.value("target_accuracy", 0.0);
    r.mean_loss = j.value("mean_loss", 0.0);
    if (j.contains("domain_accuracy")) r.domain_accuracy = j.at("domain_accuracy").get<double>();
    if (j.contains("lambda")) r.lambda = j.at("lambda").get<double>();
    return r;
  }

  bool operator==(const RunRow&) const = default;
};

/// Per-iteration trace of one training run.
struct RunRecord {
  std::string method;
  std::string config_hash;
  json config = json::object();
  std::vector<RunRow> rows;
  int best_iteration = -1;
  double best_val_f1 = -1.0;
  std::string best_checkpoint;

  void add(const RunRow& row) {
    if (!rows.empty() && row.iteration <= rows.back().iteration) {
      throw Error("run record: iterations must be strictly increasing");
    }
    rows.push_back(row);
  }

  double max_target_f1() const {
    double m = 0.0;
    for (const auto& r : rows) m = std::max(m, r.target_f1);
    return m;
  }

  const RunRow& best_row() const {
    for (const auto& r : rows) {
      if (r.iteration == best_iteration) return r;
    }
    throw Error("run record: no row for best iteration");
  }
};

}  // namespace hartl::train

#endif  // HARTL_TRAIN_CONFIG_HPP_
