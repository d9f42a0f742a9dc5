#ifndef HARTL_HARNESS_DESK_HPP_
#define HARTL_HARNESS_DESK_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hartl/harness/runner.hpp"

namespace hartl::harness {

/// The committed synthetic benchmark: shift spec, model, per-method training
/// settings and the pass thresholds that were frozen with it.
struct DeskFixture {
  json doc;
  synth::ShiftSpec shift;
  model::ModelSpec model;
  train::TrainConfig baseline, scorer, dann, finetune;
  double kappa = 2.0;
  double initial_lambda = 1.0;
  json finetune_params;
  std::vector<double> angles;
  double min_gap = 0.15;
  double min_closed = 0.10;
  double ganin_domain_accuracy = 0.9;
  int ganin_within = 3;

  static DeskFixture load(const std::filesystem::path& path) {
    DeskFixture f;
    f.doc = read_json(path);
    const json& j = f.doc;
    f.shift = synth::ShiftSpec::from_json(j.at("shift_spec"));
    f.model = model::ModelSpec::from_json(j.at("model"));
    f.baseline = train::TrainConfig::from_json(j.at("train").at("baseline"));
    f.scorer = train::TrainConfig::from_json(j.at("train").at("scorer"));
    f.dann = train::TrainConfig::from_json(j.at("train").at("dann"));
    f.finetune = train::TrainConfig::from_json(j.at("train").at("finetune"));
    f.kappa = j.value("kappa", f.kappa);
    f.initial_lambda = j.value("initial_lambda", f.initial_lambda);
    f.finetune_params = j.value("finetune", json::object());
    f.angles = j.value("monotonicity_angles", std::vector<double>{0.0, 0.5, 1.0});
    const json& t = j.at("thresholds");
    f.min_gap = t.at("min_gap").get<double>();
    f.min_closed = t.at("min_closed").get<double>();
    f.ganin_domain_accuracy = t.at("ganin_domain_accuracy").get<double>();
    f.ganin_within = t.at("ganin_within_iterations").get<int>();
    return f;
  }

  /// Experiment config for one method on this fixture (not written to disk).
  ExperimentConfig config(const std::string& method, const std::string& schedule = "adaptive") const {
    ExperimentConfig c;
    c.name = "desk-" + method;
    c.method = method;
    c.split.kind = "synthetic";
    c.split.shift = shift;
    c.model = model;
    if (method == "baseline") {
      c.train = baseline;
    } else if (method == "loss_weighted") {
      c.train = baseline;
      c.params = {{"kappa", kappa}, {"scorer", scorer.to_json()}};
    } else if (method == "dann") {
      c.train = dann;
      c.params = {{"schedule", schedule}, {"initial_lambda", initial_lambda}};
    } else if (method == "finetune") {
      c.train = finetune;
      c.params = finetune_params;
    } else {
      throw ValidationError("desk fixture: no network method '" + method + "'");
    }
    return c;
  }
};

/// Accuracy-level summary of one run: scores of the checkpoint selected on
/// the validation set.
struct DeskScore {
  double val_accuracy = 0.0;
  double target_accuracy = 0.0;
  double target_f1 = 0.0;
  double max_target_f1 = 0.0;
  int best_iteration = -1;
  std::optional<int> first_high_domain_accuracy;  // first iteration with A_d >= threshold
};

inline DeskScore score(const train::RunRecord& rec, double domain_threshold = 0.9) {
  DeskScore s;
  const auto& b = rec.best_row();
  s.val_accuracy = b.val_accuracy;
  s.target_accuracy = b.target_accuracy;
  s.target_f1 = b.target_f1;
  s.max_target_f1 = rec.max_target_f1();
  s.best_iteration = rec.best_iteration;
  for (const auto& r : rec.rows) {
    if (r.domain_accuracy && *r.domain_accuracy >= domain_threshold) {
      s.first_high_domain_accuracy = r.iteration;
      break;
    }
  }
  return s;
}

}  // namespace hartl::harness

#endif  // HARTL_HARNESS_DESK_HPP_
