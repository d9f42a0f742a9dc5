#ifndef HARTL_MODEL_DEEPCONVLSTM_HPP_
#define HARTL_MODEL_DEEPCONVLSTM_HPP_

#include <algorithm>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hartl/model/layers.hpp"
#include "hartl/model/parameters.hpp"

namespace hartl::model {

using json = nlohmann::json;

struct ConvLayerSpec {
  int kernel_length = 5;
  int feature_maps = 64;
};

/// DeepConvLSTM architecture: time-axis convolutions shared across sensor
/// channels, a stack of LSTM layers over the remaining time steps and a
/// softmax over the last step.
struct ModelSpec {
  int input_length = 24;
  int channels = 113;
  std::vector<ConvLayerSpec> conv = {{5, 64}, {5, 64}, {5, 64}, {5, 64}};
  std::vector<int> recurrent = {128, 128};
  int n_classes = 17;

  std::vector<std::string> layer_groups() const {
    std::vector<std::string> g;
    for (std::size_t i = 0; i < conv.size(); ++i) g.push_back("conv" + std::to_string(i + 1));
    g.push_back("recurrent");
    g.push_back("output");
    return g;
  }

  /// Time length after the first `layers` convolutions (valid mode).
  int time_after(int layers) const {
    int t = input_length;
    for (int i = 0; i < layers; ++i) t -= conv.at(i).kernel_length - 1;
    return t;
  }

  int maps_after(int layers) const { return layers == 0 ? 1 : conv.at(layers - 1).feature_maps; }

  void validate() const {
    if (channels < 1) throw ValidationError("model: channels must be >= 1");
    if (n_classes < 2) throw ValidationError("model: n_classes must be >= 2");
    if (conv.empty()) throw ValidationError("model: at least one conv layer required");
    if (recurrent.empty()) throw ValidationError("model: at least one recurrent layer required");
    for (const auto& c : conv) {
      if (c.kernel_length < 1 || c.feature_maps < 1) throw ValidationError("model: bad conv layer");
    }
    if (time_after(static_cast<int>(conv.size())) < 1) {
      throw ValidationError("model: input_length too short for the conv stack");
    }
  }

  json to_json() const {
    json c = json::array();
    for (const auto& l : conv) c.push_back({{"kernel_length", l.kernel_length}, {"feature_maps", l.feature_maps}});
    return {{"input_length", input_length}, {"channels", channels}, {"conv", c},
            {"recurrent", recurrent},       {"n_classes", n_classes}};
  }

  static ModelSpec from_json(const json& j) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      static const std::set<std::string> allowed = {"input_length", "channels", "conv", "recurrent", "n_classes"};
      if (!allowed.count(it.key())) throw ValidationError("model: unknown key '" + it.key() + "'");
    }
    ModelSpec s;
    s.input_length = j.value("input_length", s.input_length);
    s.channels = j.value("channels", s.channels);
    if (j.contains("conv")) {
      s.conv.clear();
      for (const auto& l : j.at("conv")) s.conv.push_back({l.value("kernel_length", 5), l.value("feature_maps", 64)});
    }
    s.recurrent = j.value("recurrent", s.recurrent);
    s.n_classes = j.value("n_classes", s.n_classes);
    s.validate();
    return s;
  }

  std::string hash() const { return sha256_hex(to_json().dump()); }
};

/// Inverted dropout on the final recurrent output; disabled when rate == 0.
struct Dropout {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;
};

struct HeadTape {
  std::vector<LstmTape> lstm;
  Activations last_hidden;
  Activations dropout_mask;
  Activations probs;
  int batch = 0;
  int time = 0;
  int channels = 0;
};

/// Stacked LSTM + dense softmax over a feature sequence. Each recurrent layer
/// holds three tensors (w_input, w_hidden, bias); the output layer two.
inline Activations recurrent_head_forward(std::span<const Matrix> recurrent, std::span<const Matrix> output,
                                          const SeqTensor& feats, HeadTape* tape, const Dropout& dropout = {}) {
  const int layers = static_cast<int>(recurrent.size() / 3);
  Activations x = to_steps(feats);
  HeadTape local;
  HeadTape& t = tape ? *tape : local;
  t.lstm.assign(layers, {});
  t.batch = feats.batch;
  t.time = feats.time;
  t.channels = feats.channels;
  for (int l = 0; l < layers; ++l) {
    x = lstm_forward(recurrent[3 * l], recurrent[3 * l + 1], recurrent[3 * l + 2], x, feats.time, feats.batch,
                     tape ? &t.lstm[l] : nullptr);
  }
  Activations last = x.bottomRows(feats.batch);
  if (dropout.rate > 0.0 && dropout.rng) {
    std::bernoulli_distribution keep(1.0 - dropout.rate);
    t.dropout_mask.resize(last.rows(), last.cols());
    for (Eigen::Index i = 0; i < t.dropout_mask.size(); ++i) {
      t.dropout_mask.data()[i] = keep(*dropout.rng) ? 1.0 / (1.0 - dropout.rate) : 0.0;
    }
    last = last.cwiseProduct(t.dropout_mask);
  } else {
    t.dropout_mask.resize(0, 0);
  }
  Activations logits = last * output[0];
  logits.rowwise() += output[1].row(0);
  Activations probs = softmax_rows(logits);
  if (tape) {
    t.last_hidden = std::move(last);
    t.probs = probs;
  }
  return probs;
}

/// Backward pass of `recurrent_head_forward`. Gradients are accumulated into
/// `drecurrent` / `doutput`; returns the gradient w.r.t. the input features.
inline SeqTensor recurrent_head_backward(std::span<const Matrix> recurrent, std::span<const Matrix> output,
                                         const HeadTape& tape, const Activations& dlogits,
                                         std::span<Matrix> drecurrent, std::span<Matrix> doutput,
                                         bool want_input_grad = true) {
  const int layers = static_cast<int>(recurrent.size() / 3);
  doutput[0].noalias() += tape.last_hidden.transpose() * dlogits;
  doutput[1].row(0) += dlogits.colwise().sum();
  Activations dlast = dlogits * output[0].transpose();
  if (tape.dropout_mask.size() > 0) dlast = dlast.cwiseProduct(tape.dropout_mask);

  const int H = static_cast<int>(recurrent[3 * (layers - 1) + 1].rows());
  Activations dh = Activations::Zero(static_cast<Eigen::Index>(tape.time) * tape.batch, H);
  dh.bottomRows(tape.batch) = dlast;
  for (int l = layers - 1; l >= 0; --l) {
    const bool need = l > 0 || want_input_grad;
    dh = lstm_backward(recurrent[3 * l], recurrent[3 * l + 1], tape.lstm[l], dh, drecurrent[3 * l],
                       drecurrent[3 * l + 1], drecurrent[3 * l + 2], need);
  }
  if (!want_input_grad) return {};
  return from_steps(dh, tape.batch, tape.time, tape.channels);
}

/// Row-per-(sample, time, channel) input tensor from L x C windows.
inline SeqTensor make_batch(std::span<const Matrix* const> windows, int length, int channels) {
  SeqTensor s;
  s.batch = static_cast<int>(windows.size());
  s.time = length;
  s.channels = channels;
  s.data.resize(static_cast<Eigen::Index>(s.batch) * length * channels, 1);
  for (int b = 0; b < s.batch; ++b) {
    const Matrix& w = *windows[b];
    if (w.rows() != length) {
      throw DimensionError("batch: time axis has length " + std::to_string(w.rows()) + ", model expects " +
                           std::to_string(length));
    }
    if (w.cols() != channels) {
      throw DimensionError("batch: channel axis has " + std::to_string(w.cols()) + " channels, model expects " +
                           std::to_string(channels));
    }
    for (int t = 0; t < length; ++t) {
      for (int c = 0; c < channels; ++c) {
        s.data((static_cast<Eigen::Index>(b) * length + t) * channels + c, 0) = w(t, c);
      }
    }
  }
  return s;
}

class DeepConvLstm {
 public:
  struct Tape {
    std::vector<ConvTape> conv;
    HeadTape head;
  };

  DeepConvLstm(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    spec_.validate();
    std::mt19937_64 rng(derive_seed(seed, "model-init"));
    std::vector<ParameterGroup> groups;
    int in_maps = 1;
    for (std::size_t i = 0; i < spec_.conv.size(); ++i) {
      const auto& c = spec_.conv[i];
      Matrix w(c.kernel_length * in_maps, c.feature_maps);
      init_uniform(w, std::sqrt(6.0 / (c.kernel_length * in_maps)), rng);
      groups.push_back({"conv" + std::to_string(i + 1), {w, Matrix::Zero(1, c.feature_maps)}});
      in_maps = c.feature_maps;
    }
    ParameterGroup rec{"recurrent", {}};
    int width = spec_.channels * in_maps;
    for (int h : spec_.recurrent) {
      append_lstm(rec.tensors, width, h, rng);
      width = h;
    }
    groups.push_back(std::move(rec));
    Matrix wo(width, spec_.n_classes);
    init_uniform(wo, std::sqrt(6.0 / (width + spec_.n_classes)), rng);
    groups.push_back({"output", {wo, Matrix::Zero(1, spec_.n_classes)}});
    params_ = ParameterSet(std::move(groups));
  }

  /// Fan-in uniform input weights, orthogonal recurrent weights, forget-gate
  /// bias 1.
  static void append_lstm(std::vector<Matrix>& tensors, int input, int hidden, std::mt19937_64& rng) {
    Matrix wx(input, 4 * hidden);
    init_uniform(wx, std::sqrt(3.0 / input), rng);
    Matrix wh(hidden, 4 * hidden);
    init_orthogonal_blocks(wh, rng);
    Matrix b = Matrix::Zero(1, 4 * hidden);
    b.block(0, hidden, 1, hidden).setOnes();
    tensors.push_back(std::move(wx));
    tensors.push_back(std::move(wh));
    tensors.push_back(std::move(b));
  }

  const ModelSpec& spec() const { return spec_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }
  int conv_count() const { return static_cast<int>(spec_.conv.size()); }

  /// Marks groups as frozen; optimiser steps skip them.
  void freeze(const std::vector<std::string>& groups) {
    for (const auto& g : groups) {
      if (!params_.has(g)) throw ValidationError("freeze: unknown layer group '" + g + "'");
    }
    frozen_.insert(groups.begin(), groups.end());
  }
  void unfreeze_all() { frozen_.clear(); }
  bool is_frozen(const std::string& group) const { return frozen_.count(group) > 0; }
  const std::set<std::string>& frozen() const { return frozen_; }

  SeqTensor run_convs(const SeqTensor& x, int from, int to, std::vector<ConvTape>* tapes) const {
    if (x.maps() != spec_.maps_after(from)) {
      throw DimensionError("conv" + std::to_string(from + 1) + ": feature-map axis has " + std::to_string(x.maps()) +
                           ", expected " + std::to_string(spec_.maps_after(from)));
    }
    if (tapes) tapes->assign(to - from, {});
    SeqTensor cur = x;
    for (int i = from; i < to; ++i) {
      const auto& g = params_.groups()[i];
      cur = conv_forward(g.tensors[0], g.tensors[1], cur, tapes ? &(*tapes)[i - from] : nullptr);
    }
    return cur;
  }

  /// Returns the gradient w.r.t. the input of layer `from` (if requested).
  SeqTensor backprop_convs(const std::vector<ConvTape>& tapes, int from, SeqTensor grad, ParameterSet& grads,
                           bool want_input_grad) const {
    const int to = from + static_cast<int>(tapes.size());
    for (int i = to - 1; i >= from; --i) {
      auto& dg = grads.groups()[i];
      const bool need = i > from || want_input_grad;
      grad = conv_backward(params_.groups()[i].tensors[0], tapes[i - from], grad, dg.tensors[0], dg.tensors[1], need);
    }
    return grad;
  }

  Activations run_head(const SeqTensor& feats, HeadTape* tape, const Dropout& dropout = {}) const {
    return recurrent_head_forward(params_.group("recurrent").tensors, params_.group("output").tensors, feats, tape,
                                  dropout);
  }

  SeqTensor backprop_head(const HeadTape& tape, const Activations& dlogits, ParameterSet& grads) const {
    return recurrent_head_backward(params_.group("recurrent").tensors, params_.group("output").tensors, tape, dlogits,
                                   grads.group("recurrent").tensors, grads.group("output").tensors);
  }

  /// Class probabilities for a batch; rows sum to one.
  Activations forward(const SeqTensor& x, Tape* tape = nullptr, const Dropout& dropout = {}) const {
    const SeqTensor feats = run_convs(x, 0, conv_count(), tape ? &tape->conv : nullptr);
    return run_head(feats, tape ? &tape->head : nullptr, dropout);
  }

  /// Accumulates parameter gradients for a forward tape and logit gradient.
  void backward(const Tape& tape, const Activations& dlogits, ParameterSet& grads) const {
    SeqTensor g = backprop_head(tape.head, dlogits, grads);
    backprop_convs(tape.conv, 0, std::move(g), grads, false);
  }

  /// Probabilities for many windows, evaluated in chunks.
  Activations predict_proba(std::span<const Matrix* const> windows, std::size_t chunk = 256) const {
    Activations out(static_cast<Eigen::Index>(windows.size()), spec_.n_classes);
    for (std::size_t i = 0; i < windows.size(); i += chunk) {
      const std::size_t n = std::min(chunk, windows.size() - i);
      const SeqTensor x = make_batch(windows.subspan(i, n), spec_.input_length, spec_.channels);
      out.middleRows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n)) = forward(x);
    }
    return out;
  }

 private:
  ModelSpec spec_;
  ParameterSet params_;
  std::set<std::string> frozen_;
};

/// Domain classifier attached after a conv layer through a gradient-reversal
/// layer: one LSTM layer over the tapped feature sequence and a two-way
/// softmax on its final step.
struct DannHeadSpec {
  std::string attach_point = "conv2";
  int recurrent_units = 128;
  int outputs = 2;

  json to_json() const {
    return {{"attach_point", attach_point}, {"recurrent_units", recurrent_units}, {"outputs", outputs}};
  }
};

class DomainHead {
 public:
  DomainHead(const ModelSpec& model, DannHeadSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    attach_layers_ = attach_layers(model, spec_.attach_point);
    if (attach_layers_ >= static_cast<int>(model.conv.size())) {
      throw ValidationError("dann: attach point must precede the remaining label-predictor layers");
    }
    if (spec_.outputs != 2) throw ValidationError("dann: domain head has exactly 2 outputs");
    channels_ = model.channels;
    time_ = model.time_after(attach_layers_);
    maps_ = model.maps_after(attach_layers_);
    std::mt19937_64 rng(derive_seed(seed, "domain-head-init"));
    ParameterGroup rec{"domain_recurrent", {}};
    DeepConvLstm::append_lstm(rec.tensors, channels_ * maps_, spec_.recurrent_units, rng);
    Matrix wo(spec_.recurrent_units, 2);
    init_uniform(wo, std::sqrt(6.0 / (spec_.recurrent_units + 2)), rng);
    params_ = ParameterSet({std::move(rec), ParameterGroup{"domain_output", {wo, Matrix::Zero(1, 2)}}});
  }

  static int attach_layers(const ModelSpec& model, const std::string& point) {
    for (std::size_t i = 0; i < model.conv.size(); ++i) {
      if (point == "conv" + std::to_string(i + 1)) return static_cast<int>(i + 1);
    }
    throw ValidationError("dann: attach point '" + point + "' is not a conv layer group");
  }

  const DannHeadSpec& spec() const { return spec_; }
  int attach_layers() const { return attach_layers_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  Activations forward(const SeqTensor& feats, HeadTape* tape) const {
    if (feats.time != time_ || feats.channels != channels_ || feats.maps() != maps_) {
      throw ValidationError("dann: features do not come from attach point " + spec_.attach_point);
    }
    return recurrent_head_forward(params_.groups()[0].tensors, params_.groups()[1].tensors, grl_forward_seq(feats),
                                  tape);
  }

  /// Accumulates head gradients and returns the reversed gradient
  /// (-lambda * dL_d/dfeatures) to feed into the feature extractor.
  SeqTensor backward(const HeadTape& tape, const Activations& dlogits, double lambda, ParameterSet& grads) const {
    SeqTensor g = recurrent_head_backward(params_.groups()[0].tensors, params_.groups()[1].tensors, tape, dlogits,
                                          grads.groups()[0].tensors, grads.groups()[1].tensors);
    g.data = grl_backward(g.data, lambda);
    return g;
  }

 private:
  static const SeqTensor& grl_forward_seq(const SeqTensor& s) { return s; }

  DannHeadSpec spec_;
  ParameterSet params_;
  int attach_layers_ = 2;
  int channels_ = 0;
  int time_ = 0;
  int maps_ = 0;
};

}  // namespace hartl::model

#endif  // HARTL_MODEL_DEEPCONVLSTM_HPP_
