#ifndef HARTL_TRAIN_TRAINERS_HPP_
#define HARTL_TRAIN_TRAINERS_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "hartl/data/split.hpp"
#include "hartl/metrics.hpp"
#include "hartl/model/optimizer.hpp"
#include "hartl/model/snapshot.hpp"
#include "hartl/train/config.hpp"
#include "hartl/train/lambda.hpp"

namespace hartl::train {

using data::WindowSet;
using model::DeepConvLstm;
using model::ModelSpec;
using model::ParameterSnapshot;

struct TrainResult {
  ParameterSnapshot best;   // best on the selection (validation) set
  ParameterSnapshot final;  // parameters after the last iteration
  RunRecord record;
};

/// Called after every evaluation row; used for progress output.
using RowCallback = std::function<void(const RunRow&)>;

inline std::vector<const Matrix*> window_ptrs(const WindowSet& ws) {
  std::vector<const Matrix*> out;
  out.reserve(ws.size());
  for (const auto& w : ws.windows) out.push_back(&w.values);
  return out;
}

inline std::vector<const Matrix*> window_ptrs(const data::UnlabeledWindowSet& ws) {
  std::vector<const Matrix*> out;
  out.reserve(ws.size());
  for (std::size_t i = 0; i < ws.size(); ++i) out.push_back(&ws.values(i));
  return out;
}

/// Predicted class ids (1-based).
inline std::vector<int> predict(const DeepConvLstm& m, const WindowSet& ws) {
  const auto ptrs = window_ptrs(ws);
  const model::Activations p = m.predict_proba(ptrs);
  std::vector<int> out(ws.size());
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    Eigen::Index k;
    p.row(i).maxCoeff(&k);
    out[i] = static_cast<int>(k) + 1;
  }
  return out;
}

inline metrics::EvalReport evaluate(const DeepConvLstm& m, const WindowSet& ws) {
  if (ws.empty()) return {};
  return metrics::weighted_f1(predict(m, ws), ws.labels(), m.spec().n_classes);
}

namespace detail {

inline int leading_frozen_convs(const DeepConvLstm& m) {
  int k = 0;
  while (k < m.conv_count() && m.is_frozen("conv" + std::to_string(k + 1))) ++k;
  return k;
}

inline void check_labels(const WindowSet& ws, int n_classes, const char* what) {
  for (const auto& w : ws.windows) {
    if (w.label < 1 || w.label > n_classes) {
      throw ValidationError(std::string(what) + ": label " + std::to_string(w.label) + " outside 1.." +
                            std::to_string(n_classes));
    }
  }
}

/// Evaluates, appends the row and refreshes the best snapshot when the
/// selection F1 improves. Only `val` influences selection.
inline void record_eval(const DeepConvLstm& m, int iteration, double mean_loss, const WindowSet& val,
                        const WindowSet& test, RunRow row, TrainResult& out, const json& meta_base,
                        const RowCallback& cb) {
  const auto v = evaluate(m, val);
  row.iteration = iteration;
  row.mean_loss = mean_loss;
  row.val_f1 = v.weighted_f1;
  row.val_accuracy = v.accuracy;
  if (!test.empty()) {
    const auto t = evaluate(m, test);
    row.target_f1 = t.weighted_f1;
    row.target_accuracy = t.accuracy;
  }
  out.record.add(row);
  if (row.val_f1 > out.record.best_val_f1) {
    out.record.best_val_f1 = row.val_f1;
    out.record.best_iteration = iteration;
    json meta = meta_base;
    meta["iteration"] = iteration;
    out.best = model::snapshot(m, meta);
  }
  if (cb) cb(row);
}

}  // namespace detail

/// Mini-batch RMSProp on (optionally weighted) cross-entropy. The model is
/// left at its final state; the result carries both the best-on-`val` and
/// final snapshots.
inline TrainResult train_supervised(DeepConvLstm& m, const WindowSet& train, const std::vector<double>& weights,
                                    const WindowSet& val, const WindowSet& test, const TrainConfig& cfg,
                                    const std::string& method, const RowCallback& cb = {}) {
  cfg.validate();
  if (train.empty()) throw ValidationError(method + ": empty training set");
  if (!weights.empty() && weights.size() != train.size()) {
    throw ValidationError(method + ": instance weight count differs from training set size");
  }
  detail::check_labels(train, m.spec().n_classes, method.c_str());

  TrainResult out;
  out.record.method = method;
  out.record.config = cfg.to_json();
  out.record.config_hash = cfg.hash();
  const json meta_base = {{"method", method}, {"seed", cfg.seed}};

  model::RmsProp opt(m.parameters(), cfg.optimizer);
  model::ParameterSet grads = m.parameters().zeros_like();
  std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, "shuffle"));
  std::mt19937_64 dropout_rng(derive_seed(cfg.seed, "dropout"));
  const model::Dropout dropout{cfg.dropout, &dropout_rng};
  const int stop_conv = detail::leading_frozen_convs(m);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  detail::record_eval(m, 0, 0.0, val, test, {}, out, meta_base, cb);

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min<std::size_t>(cfg.batch_size, order.size() - start);
      std::vector<const Matrix*> xs(n);
      std::vector<int> ys(n);
      std::vector<double> ws;
      if (!weights.empty()) ws.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto& w = train.windows[order[start + i]];
        xs[i] = &w.values;
        ys[i] = w.label - 1;
        if (!weights.empty()) ws[i] = weights[order[start + i]];
      }
      const auto x = model::make_batch(xs, m.spec().input_length, m.spec().channels);
      DeepConvLstm::Tape tape;
      const auto probs = m.forward(x, &tape, dropout);
      model::Activations dlogits;
      const double loss = model::softmax_cross_entropy(probs, ys, ws, &dlogits);
      if (!std::isfinite(loss)) throw DivergenceError(it, method + ": non-finite loss");
      grads.set_zero();
      auto g = m.backprop_head(tape.head, dlogits, grads);
      std::vector<model::ConvTape> upper(tape.conv.begin() + stop_conv, tape.conv.end());
      m.backprop_convs(upper, stop_conv, std::move(g), grads, false);
      opt.step(m.parameters(), grads, m.frozen());
      loss_sum += loss * static_cast<double>(n);
      seen += n;
    }
    if (!m.parameters().all_finite()) throw DivergenceError(it, method + ": non-finite parameters");
    if (it % cfg.eval_every == 0 || it == cfg.max_iterations) {
      detail::record_eval(m, it, loss_sum / static_cast<double>(seen), val, test, {}, out, meta_base, cb);
    }
  }
  json meta = meta_base;
  meta["iteration"] = cfg.max_iterations;
  out.final = model::snapshot(m, meta);
  return out;
}

/// Source-only training on the labelled source runs.
inline TrainResult train_baseline(const data::DomainSplit& split, const ModelSpec& spec, const TrainConfig& cfg,
                                  const RowCallback& cb = {}) {
  DeepConvLstm m(spec, cfg.seed);
  return train_supervised(m, split.source_train, {}, split.source_val, split.target_test, cfg, "baseline", cb);
}

// ---------------------------------------------------------------------------
// Instance loss weighting.

/// Probabilistic source/target discriminator trained on unlabelled windows.
class DomainScorer {
 public:
  DomainScorer(DeepConvLstm model, double heldout_accuracy)
      : model_(std::move(model)), heldout_accuracy_(heldout_accuracy) {}

  /// P(target | window) for each window.
  std::vector<double> scores(std::span<const Matrix* const> windows) const {
    const auto p = model_.predict_proba(windows);
    std::vector<double> out(windows.size());
    for (Eigen::Index i = 0; i < p.rows(); ++i) out[i] = p(i, 1);
    return out;
  }

  double heldout_accuracy() const { return heldout_accuracy_; }
  const DeepConvLstm& model() const { return model_; }

 private:
  DeepConvLstm model_;
  double heldout_accuracy_;
};

/// Trains a two-class DeepConvLSTM (class 1 = source, 2 = target) on
/// `holdout_fraction`-reduced copies of both sets and reports its accuracy on
/// the held-out windows. No activity labels are read.
inline DomainScorer pretrain_domain_classifier(std::span<const Matrix* const> source,
                                               std::span<const Matrix* const> target, ModelSpec spec,
                                               const TrainConfig& cfg, double holdout_fraction = 0.2) {
  if (source.empty() || target.empty()) {
    throw ValidationError("domain classifier: both source and target windows are required");
  }
  if (holdout_fraction <= 0.0 || holdout_fraction >= 1.0) {
    throw ValidationError("domain classifier: holdout_fraction must lie in (0, 1)");
  }
  spec.n_classes = 2;
  WindowSet fit, held;
  fit.length = held.length = spec.input_length;
  fit.channels = held.channels = spec.channels;
  auto add = [&](std::span<const Matrix* const> xs, int label) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    // Same permutation stream for both domains: identical inputs get
    // identical fit/held-out assignments.
    std::mt19937_64 rng(derive_seed(cfg.seed, "domain-holdout"));
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_held = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(holdout_fraction * xs.size())));
    for (std::size_t i = 0; i < order.size(); ++i) {
      data::Window w;
      w.values = *xs[order[i]];
      w.label = label;
      (i < n_held ? held : fit).windows.push_back(std::move(w));
    }
  };
  add(source, 1);
  add(target, 2);
  if (fit.empty()) throw ValidationError("domain classifier: not enough windows to hold out a test part");
  DeepConvLstm m(spec, derive_seed(cfg.seed, "domain-classifier"));
  train_supervised(m, fit, {}, held, {}, cfg, "domain_classifier");
  const double acc = evaluate(m, held).accuracy;
  return DomainScorer(std::move(m), acc);
}

/// lambda_i = exp(kappa * L_i) / C with C the mean of exp(kappa * L_j), so the
/// weights average to one.
inline std::vector<double> instance_weights(std::span<const double> scores, double kappa) {
  if (!(kappa >= 0.0)) throw ValidationError("loss weighting: kappa must be >= 0");
  if (scores.empty()) throw ValidationError("loss weighting: no scores");
  std::vector<double> w(scores.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    w[i] = std::exp(kappa * scores[i]);
    sum += w[i];
  }
  const double c = sum / static_cast<double>(scores.size());
  for (double& v : w) v /= c;
  return w;
}

struct LossWeightingResult {
  TrainResult train;
  std::vector<double> weights;
  double scorer_heldout_accuracy = 0.0;
};

inline LossWeightingResult train_loss_weighted(const data::DomainSplit& split, const ModelSpec& spec,
                                               const TrainConfig& cfg, double kappa,
                                               const TrainConfig& scorer_cfg, const RowCallback& cb = {}) {
  if (!(kappa >= 0.0)) throw ValidationError("loss weighting: kappa must be >= 0");
  const auto src = window_ptrs(split.source_train);
  const auto tgt = window_ptrs(split.target_train);
  const DomainScorer scorer = pretrain_domain_classifier(src, tgt, spec, scorer_cfg);
  const auto scores = scorer.scores(src);
  LossWeightingResult out;
  out.weights = instance_weights(scores, kappa);
  out.scorer_heldout_accuracy = scorer.heldout_accuracy();
  DeepConvLstm m(spec, cfg.seed);
  out.train = train_supervised(m, split.source_train, out.weights, split.source_val, split.target_test, cfg,
                               "loss_weighted", cb);
  out.train.record.config["kappa"] = kappa;
  out.train.record.config["scorer"] = scorer_cfg.to_json();
  out.train.record.config_hash = sha256_hex(out.train.record.config.dump());
  return out;
}

// ---------------------------------------------------------------------------
// Domain-adversarial training.

enum class LambdaSchedule { kAdaptive, kGanin, kFixed };

inline LambdaSchedule parse_schedule(const std::string& s) {
  if (s == "adaptive") return LambdaSchedule::kAdaptive;
  if (s == "ganin") return LambdaSchedule::kGanin;
  if (s == "fixed") return LambdaSchedule::kFixed;
  throw ValidationError("dann: unknown lambda schedule '" + s + "'");
}

inline const char* to_string(LambdaSchedule s) {
  switch (s) {
    case LambdaSchedule::kAdaptive:
      return "adaptive";
    case LambdaSchedule::kGanin:
      return "ganin";
    case LambdaSchedule::kFixed:
      return "fixed";
  }
  return "?";
}

struct DannOptions {
  LambdaSchedule schedule = LambdaSchedule::kAdaptive;
  LambdaControllerParams controller;
  double initial_lambda = 1.0;  // adaptive start
  double fixed_lambda = 0.0;    // kFixed
  double ganin_gamma = 10.0;

  json to_json() const {
    return {{"schedule", to_string(schedule)},
            {"initial_lambda", initial_lambda},
            {"fixed_lambda", fixed_lambda},
            {"ganin_gamma", ganin_gamma},
            {"controller",
             {{"acc_max", controller.acc_max},
              {"acc_min", controller.acc_min},
              {"lambda_max", controller.lambda_max},
              {"lambda_mid", controller.lambda_mid},
              {"lambda_min", controller.lambda_min},
              {"alpha", controller.alpha},
              {"beta", controller.beta}}}};
  }
};

struct DannResult {
  TrainResult train;
  model::ParameterSet domain_head;
};

struct DannBatchLoss {
  double label = 0.0;
  double domain = 0.0;
  std::size_t domain_hits = 0;  // out of 2 * batch
};

/// Forward and backward pass over one source batch `bs` (labels `ys`, 0-based)
/// and one target batch `bt`. Adds the gradients of L_y + L_d to `head_grads`
/// and of L_y - lambda * L_d to the model's `grads` (the reversal happens in
/// the domain head's backward pass). Frozen leading convs are not skipped.
inline DannBatchLoss dann_batch(const DeepConvLstm& m, const model::DomainHead& head, const model::SeqTensor& bs,
                                const std::vector<int>& ys, const model::SeqTensor& bt, double lambda,
                                const model::Dropout& dropout, model::ParameterSet& grads,
                                model::ParameterSet& head_grads) {
  const int k = head.attach_layers();
  const int convs = m.conv_count();
  const std::size_t n = ys.size();
  std::vector<model::ConvTape> fs_tape, ft_tape, rest_tape;
  const model::SeqTensor fs = m.run_convs(bs, 0, k, &fs_tape);
  const model::SeqTensor ft = m.run_convs(bt, 0, k, &ft_tape);
  model::HeadTape label_tape;
  const auto probs = m.run_head(m.run_convs(fs, k, convs, &rest_tape), &label_tape, dropout);
  model::Activations dlabel;
  DannBatchLoss out;
  out.label = model::softmax_cross_entropy(probs, ys, {}, &dlabel);

  model::HeadTape ds_tape, dt_tape;
  const auto ps = head.forward(fs, &ds_tape);
  const auto pt = head.forward(ft, &dt_tape);
  const std::vector<double> half(n, 0.5);
  model::Activations dds, ddt;
  out.domain = model::softmax_cross_entropy(ps, std::vector<int>(n, 0), half, &dds) +
               model::softmax_cross_entropy(pt, std::vector<int>(n, 1), half, &ddt);
  for (std::size_t i = 0; i < n; ++i) {
    out.domain_hits += ps(i, 0) >= ps(i, 1) ? 1 : 0;
    out.domain_hits += pt(i, 1) > pt(i, 0) ? 1 : 0;
  }

  model::SeqTensor g_fs = m.backprop_convs(rest_tape, k, m.backprop_head(label_tape, dlabel, grads), grads, true);
  const model::SeqTensor g_fs_dom = head.backward(ds_tape, dds, lambda, head_grads);
  const model::SeqTensor g_ft_dom = head.backward(dt_tape, ddt, lambda, head_grads);
  g_fs.data += g_fs_dom.data;
  m.backprop_convs(fs_tape, 0, std::move(g_fs), grads, false);
  m.backprop_convs(ft_tape, 0, g_ft_dom, grads, false);
  return out;
}

/// Feature extractor = conv layers up to the head's attach point; the label
/// predictor is the rest of the DeepConvLSTM. Each step minimises the source
/// label loss and the domain loss of a balanced source/target batch, with the
/// domain gradient reversed (-lambda) before it reaches the feature extractor.
inline DannResult train_dann(const data::DomainSplit& split, const ModelSpec& spec, const model::DannHeadSpec& head_spec,
                             const TrainConfig& cfg, const DannOptions& opts, const RowCallback& cb = {}) {
  cfg.validate();
  if (split.source_train.empty()) throw ValidationError("dann: empty source training set");
  if (split.target_train.empty()) throw ValidationError("dann: empty target training set");
  if (opts.schedule == LambdaSchedule::kFixed && opts.fixed_lambda < 0.0) {
    throw ValidationError("dann: fixed lambda must be >= 0");
  }
  detail::check_labels(split.source_train, spec.n_classes, "dann");

  DeepConvLstm m(spec, cfg.seed);
  model::DomainHead head(spec, head_spec, cfg.seed);
  AdaptiveLambdaController controller(opts.controller, opts.initial_lambda);

  TrainResult out;
  out.record.method = "dann";
  out.record.config = cfg.to_json();
  out.record.config["dann"] = opts.to_json();
  out.record.config["head"] = head_spec.to_json();
  out.record.config_hash = sha256_hex(out.record.config.dump());
  const json meta_base = {{"method", "dann"}, {"seed", cfg.seed}};

  model::RmsProp opt(m.parameters(), cfg.optimizer);
  model::RmsProp head_opt(head.parameters(), cfg.optimizer);
  model::ParameterSet grads = m.parameters().zeros_like();
  model::ParameterSet head_grads = head.parameters().zeros_like();
  std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, "shuffle"));
  std::mt19937_64 dropout_rng(derive_seed(cfg.seed, "dropout"));
  std::mt19937_64 target_rng(derive_seed(cfg.seed, "target-sampling"));
  const model::Dropout dropout{cfg.dropout, &dropout_rng};

  const auto& src = split.source_train;
  const auto& tgt = split.target_train;
  std::vector<std::size_t> order(src.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::size_t> t_order(tgt.size());
  std::iota(t_order.begin(), t_order.end(), 0);
  std::shuffle(t_order.begin(), t_order.end(), target_rng);
  std::size_t t_pos = 0;

  detail::record_eval(m, 0, 0.0, split.source_val, split.target_test, {}, out, meta_base, cb);
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    double lambda = controller.lambda();
    if (opts.schedule == LambdaSchedule::kGanin) {
      lambda = ganin_lambda(static_cast<double>(it - 1) / cfg.max_iterations, opts.ganin_gamma);
    } else if (opts.schedule == LambdaSchedule::kFixed) {
      lambda = opts.fixed_lambda;
    }
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    std::size_t domain_hits = 0;
    std::size_t domain_total = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min<std::size_t>(cfg.batch_size, order.size() - start);
      std::vector<const Matrix*> xs(n), xt(n);
      std::vector<int> ys(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto& w = src.windows[order[start + i]];
        xs[i] = &w.values;
        ys[i] = w.label - 1;
        if (t_pos == t_order.size()) {
          std::shuffle(t_order.begin(), t_order.end(), target_rng);
          t_pos = 0;
        }
        xt[i] = &tgt.values(t_order[t_pos++]);
      }
      const auto bs = model::make_batch(xs, spec.input_length, spec.channels);
      const auto bt = model::make_batch(xt, spec.input_length, spec.channels);

      grads.set_zero();
      head_grads.set_zero();
      const DannBatchLoss b = dann_batch(m, head, bs, ys, bt, lambda, dropout, grads, head_grads);
      if (!std::isfinite(b.label) || !std::isfinite(b.domain)) {
        throw DivergenceError(it, "dann: non-finite loss (lambda=" + std::to_string(lambda) + ")");
      }
      domain_hits += b.domain_hits;
      domain_total += 2 * n;
      const double loss_y = b.label;
      opt.step(m.parameters(), grads, m.frozen());
      head_opt.step(head.parameters(), head_grads);
      loss_sum += loss_y * static_cast<double>(n);
      seen += n;
    }
    if (!m.parameters().all_finite() || !head.parameters().all_finite()) {
      throw DivergenceError(it, "dann: non-finite parameters (lambda=" + std::to_string(lambda) + ")");
    }
    const double acc = static_cast<double>(domain_hits) / static_cast<double>(domain_total);
    if (opts.schedule == LambdaSchedule::kAdaptive) controller.update(acc);
    if (it % cfg.eval_every == 0 || it == cfg.max_iterations) {
      RunRow row;
      row.domain_accuracy = acc;
      row.lambda = lambda;
      detail::record_eval(m, it, loss_sum / static_cast<double>(seen), split.source_val, split.target_test, row, out,
                          meta_base, cb);
    }
  }
  json meta = meta_base;
  meta["iteration"] = cfg.max_iterations;
  out.final = model::snapshot(m, meta);
  return {std::move(out), head.parameters()};
}

// ---------------------------------------------------------------------------
// Layer transfer + fine-tuning.

inline std::vector<std::string> conv_groups(const ModelSpec& spec) {
  std::vector<std::string> g;
  for (std::size_t i = 0; i < spec.conv.size(); ++i) g.push_back("conv" + std::to_string(i + 1));
  return g;
}

struct FinetuneOptions {
  std::vector<std::string> frozen;          // groups held fixed while tuning
  std::vector<std::string> restore_groups;  // empty = all conv groups
};

/// Restores the transferred groups from `source`, freezes `frozen` and trains
/// on the labelled target windows. `val` drives checkpoint selection,
/// `test` is reported.
inline TrainResult finetune(const ParameterSnapshot& source, const ModelSpec& spec, const WindowSet& target_labeled,
                            const WindowSet& val, const WindowSet& test, const FinetuneOptions& opts,
                            const TrainConfig& cfg, const RowCallback& cb = {}) {
  if (target_labeled.empty()) throw ValidationError("finetune: no labelled target windows");
  DeepConvLstm m(spec, cfg.seed);
  model::restore(m, source, opts.restore_groups.empty() ? conv_groups(spec) : opts.restore_groups);
  m.freeze(opts.frozen);
  TrainResult r = train_supervised(m, target_labeled, {}, val, test, cfg, "finetune", cb);
  r.record.config["frozen"] = opts.frozen;
  r.record.config["restored"] = opts.restore_groups.empty() ? conv_groups(spec) : opts.restore_groups;
  r.record.config["source_spec_hash"] = source.spec_hash;
  r.record.config_hash = sha256_hex(r.record.config.dump());
  return r;
}

}  // namespace hartl::train

#endif  // HARTL_TRAIN_TRAINERS_HPP_
