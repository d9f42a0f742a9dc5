#ifndef HARTL_MODEL_LAYERS_HPP_
#define HARTL_MODEL_LAYERS_HPP_

#include <cmath>
#include <random>
#include <vector>

#include "hartl/common.hpp"

namespace hartl::model {

/// Activations keep one sample per row so that row blocks are contiguous.
using Activations = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-channel feature sequence: row ((b * time) + t) * channels + c holds the
/// feature maps of channel c at time t of sample b.
struct SeqTensor {
  Activations data;
  int batch = 0;
  int time = 0;
  int channels = 0;

  int maps() const { return static_cast<int>(data.cols()); }
};

// ---------------------------------------------------------------------------
// Convolution along time, shared across sensor channels, valid mode, ReLU.
// weight is (kernel * in_maps) x out_maps with tap tau occupying rows
// [tau * in_maps, (tau + 1) * in_maps); bias is 1 x out_maps.

struct ConvTape {
  SeqTensor input;
  SeqTensor output;  // post-activation
};

inline SeqTensor conv_forward(const Matrix& weight, const Matrix& bias, const SeqTensor& in, ConvTape* tape) {
  const int F = in.maps();
  const int k = static_cast<int>(weight.rows()) / F;
  if (k * F != weight.rows()) {
    throw DimensionError("conv: input has " + std::to_string(F) + " feature maps, kernel expects " +
                         std::to_string(weight.rows() / std::max(k, 1)));
  }
  const int G = static_cast<int>(weight.cols());
  const int T = in.time;
  const int T_out = T - k + 1;
  if (T_out < 1) {
    throw DimensionError("conv: time axis length " + std::to_string(T) + " shorter than kernel " + std::to_string(k));
  }
  const int C = in.channels;
  const Eigen::Index N = static_cast<Eigen::Index>(in.batch) * T * C;
  const Eigen::Index M = N - static_cast<Eigen::Index>(k - 1) * C;

  // "full" output: every row r whose window r, r+C, ..., r+(k-1)C stays in
  // bounds. Rows with t > T - k straddle two samples and are discarded.
  Activations full = Activations::Zero(M, G);
  for (int tau = 0; tau < k; ++tau) {
    full.noalias() += in.data.middleRows(static_cast<Eigen::Index>(tau) * C, M) * weight.middleRows(tau * F, F);
  }
  SeqTensor out;
  out.batch = in.batch;
  out.time = T_out;
  out.channels = C;
  out.data.resize(static_cast<Eigen::Index>(in.batch) * T_out * C, G);
  const Eigen::Index block = static_cast<Eigen::Index>(T_out) * C;
  for (int b = 0; b < in.batch; ++b) {
    out.data.middleRows(b * block, block) = full.middleRows(static_cast<Eigen::Index>(b) * T * C, block);
  }
  out.data.rowwise() += bias.row(0);
  out.data = out.data.cwiseMax(0.0);
  if (tape) {
    tape->input = in;
    tape->output = out;
  }
  return out;
}

/// Accumulates dW, db and returns the gradient w.r.t. the layer input (empty
/// when `want_input_grad` is false).
inline SeqTensor conv_backward(const Matrix& weight, const ConvTape& tape, const SeqTensor& grad_out, Matrix& dweight,
                               Matrix& dbias, bool want_input_grad) {
  const SeqTensor& in = tape.input;
  const int F = in.maps();
  const int k = static_cast<int>(weight.rows()) / F;
  const int G = static_cast<int>(weight.cols());
  const int T = in.time;
  const int T_out = tape.output.time;
  const int C = in.channels;
  const Eigen::Index N = static_cast<Eigen::Index>(in.batch) * T * C;
  const Eigen::Index M = N - static_cast<Eigen::Index>(k - 1) * C;

  const Activations dz = (tape.output.data.array() > 0.0).select(grad_out.data, 0.0);
  dbias.row(0) += dz.colwise().sum();

  Activations dfull = Activations::Zero(M, G);
  const Eigen::Index block = static_cast<Eigen::Index>(T_out) * C;
  for (int b = 0; b < in.batch; ++b) {
    dfull.middleRows(static_cast<Eigen::Index>(b) * T * C, block) = dz.middleRows(b * block, block);
  }
  SeqTensor din;
  if (want_input_grad) {
    din.batch = in.batch;
    din.time = T;
    din.channels = C;
    din.data = Activations::Zero(N, F);
  }
  for (int tau = 0; tau < k; ++tau) {
    const auto rows = in.data.middleRows(static_cast<Eigen::Index>(tau) * C, M);
    dweight.middleRows(tau * F, F).noalias() += rows.transpose() * dfull;
    if (want_input_grad) {
      din.data.middleRows(static_cast<Eigen::Index>(tau) * C, M).noalias() +=
          dfull * weight.middleRows(tau * F, F).transpose();
    }
  }
  return din;
}

// ---------------------------------------------------------------------------
// Sequence layout conversion between conv features and recurrent steps.
// Step matrix row t * batch + b is the flattened (channel, map) vector.

inline Activations to_steps(const SeqTensor& s) {
  const int width = s.channels * s.maps();
  Activations steps(static_cast<Eigen::Index>(s.time) * s.batch, width);
  for (int b = 0; b < s.batch; ++b) {
    for (int t = 0; t < s.time; ++t) {
      const double* src = s.data.data() + (static_cast<Eigen::Index>(b) * s.time + t) * width;
      std::copy(src, src + width, steps.row(static_cast<Eigen::Index>(t) * s.batch + b).data());
    }
  }
  return steps;
}

inline SeqTensor from_steps(const Activations& steps, int batch, int time, int channels) {
  SeqTensor s;
  s.batch = batch;
  s.time = time;
  s.channels = channels;
  const int width = static_cast<int>(steps.cols());
  s.data.resize(static_cast<Eigen::Index>(batch) * time * channels, width / channels);
  for (int b = 0; b < batch; ++b) {
    for (int t = 0; t < time; ++t) {
      const double* src = steps.row(static_cast<Eigen::Index>(t) * batch + b).data();
      std::copy(src, src + width, s.data.data() + (static_cast<Eigen::Index>(b) * time + t) * width);
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// LSTM with gate order [input, forget, cell, output].
// w_input: D x 4H, w_hidden: H x 4H, bias: 1 x 4H.

struct LstmTape {
  Activations input;   // (T*B) x D
  Activations gates;   // (T*B) x 4H, post-nonlinearity
  Activations cell;    // (T*B) x H
  Activations hidden;  // (T*B) x H
  int steps = 0;
  int batch = 0;
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Activations lstm_forward(const Matrix& w_input, const Matrix& w_hidden, const Matrix& bias,
                                const Activations& x, int steps, int batch, LstmTape* tape) {
  if (x.cols() != w_input.rows()) {
    throw DimensionError("lstm: input width " + std::to_string(x.cols()) + " != expected " +
                         std::to_string(w_input.rows()));
  }
  const int H = static_cast<int>(w_hidden.rows());
  Activations pre = x * w_input;
  pre.rowwise() += bias.row(0);
  Activations cell(pre.rows(), H);
  Activations hidden(pre.rows(), H);
  for (int t = 0; t < steps; ++t) {
    auto p = pre.middleRows(static_cast<Eigen::Index>(t) * batch, batch);
    if (t > 0) p.noalias() += hidden.middleRows(static_cast<Eigen::Index>(t - 1) * batch, batch) * w_hidden;
    for (int b = 0; b < batch; ++b) {
      const Eigen::Index r = static_cast<Eigen::Index>(t) * batch + b;
      double* g = pre.row(r).data();
      for (int j = 0; j < H; ++j) {
        const double i_gate = sigmoid(g[j]);
        const double f_gate = sigmoid(g[H + j]);
        const double c_gate = std::tanh(g[2 * H + j]);
        const double o_gate = sigmoid(g[3 * H + j]);
        g[j] = i_gate;
        g[H + j] = f_gate;
        g[2 * H + j] = c_gate;
        g[3 * H + j] = o_gate;
        const double c_prev = t > 0 ? cell(r - batch, j) : 0.0;
        const double c = f_gate * c_prev + i_gate * c_gate;
        cell(r, j) = c;
        hidden(r, j) = o_gate * std::tanh(c);
      }
    }
  }
  if (tape) {
    tape->input = x;
    tape->gates = std::move(pre);
    tape->cell = cell;
    tape->hidden = hidden;
    tape->steps = steps;
    tape->batch = batch;
  }
  return hidden;
}

/// `grad_hidden` is the loss gradient w.r.t. every step's hidden output.
inline Activations lstm_backward(const Matrix& w_input, const Matrix& w_hidden, const LstmTape& tape,
                                 const Activations& grad_hidden, Matrix& dw_input, Matrix& dw_hidden, Matrix& dbias,
                                 bool want_input_grad) {
  const int H = static_cast<int>(w_hidden.rows());
  const int B = tape.batch;
  Activations dpre(tape.gates.rows(), 4 * H);
  Activations dh_next = Activations::Zero(B, H);
  Activations dc_next = Activations::Zero(B, H);
  for (int t = tape.steps - 1; t >= 0; --t) {
    for (int b = 0; b < B; ++b) {
      const Eigen::Index r = static_cast<Eigen::Index>(t) * B + b;
      const double* g = tape.gates.row(r).data();
      double* d = dpre.row(r).data();
      for (int j = 0; j < H; ++j) {
        const double i_gate = g[j];
        const double f_gate = g[H + j];
        const double c_gate = g[2 * H + j];
        const double o_gate = g[3 * H + j];
        const double c = tape.cell(r, j);
        const double tc = std::tanh(c);
        const double dh = grad_hidden(r, j) + dh_next(b, j);
        const double dc = dh * o_gate * (1.0 - tc * tc) + dc_next(b, j);
        const double c_prev = t > 0 ? tape.cell(r - B, j) : 0.0;
        d[j] = dc * c_gate * i_gate * (1.0 - i_gate);
        d[H + j] = dc * c_prev * f_gate * (1.0 - f_gate);
        d[2 * H + j] = dc * i_gate * (1.0 - c_gate * c_gate);
        d[3 * H + j] = dh * tc * o_gate * (1.0 - o_gate);
        dc_next(b, j) = dc * f_gate;
      }
    }
    const auto dstep = dpre.middleRows(static_cast<Eigen::Index>(t) * B, B);
    if (t > 0) {
      dh_next.noalias() = dstep * w_hidden.transpose();
      dw_hidden.noalias() += tape.hidden.middleRows(static_cast<Eigen::Index>(t - 1) * B, B).transpose() * dstep;
    }
  }
  dw_input.noalias() += tape.input.transpose() * dpre;
  dbias.row(0) += dpre.colwise().sum();
  if (!want_input_grad) return {};
  return dpre * w_input.transpose();
}

// ---------------------------------------------------------------------------
// Dense + softmax cross-entropy.

inline Activations softmax_rows(const Activations& logits) {
  Activations p(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      p(r, c) = std::exp(logits(r, c) - mx);
      sum += p(r, c);
    }
    p.row(r) /= sum;
  }
  return p;
}

/// Weighted mean cross-entropy (1/N) * sum_i w_i * -log p_i[y_i] and its
/// gradient w.r.t. the logits. `labels` are 0-based.
inline double softmax_cross_entropy(const Activations& probs, const std::vector<int>& labels,
                                    const std::vector<double>& weights, Activations* dlogits) {
  const Eigen::Index n = probs.rows();
  double loss = 0.0;
  if (dlogits) *dlogits = probs;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    loss += w * -std::log(std::max(probs(i, labels[i]), 1e-300));
    if (dlogits) {
      (*dlogits)(i, labels[i]) -= 1.0;
      dlogits->row(i) *= w / static_cast<double>(n);
    }
  }
  return loss / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Gradient reversal: identity forward, -lambda * g backward.

template <typename Derived>
const Eigen::MatrixBase<Derived>& grl_forward(const Eigen::MatrixBase<Derived>& x) {
  return x;
}

template <typename Derived>
auto grl_backward(const Eigen::MatrixBase<Derived>& upstream, double lambda) {
  if (lambda < 0.0) throw ValidationError("gradient reversal: lambda must be >= 0");
  return (upstream * -lambda).eval();
}

// ---------------------------------------------------------------------------
// Initialisers.

inline void init_uniform(Matrix& m, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
}

/// Fills an H x (k*H) matrix with k independent orthogonal H x H blocks.
inline void init_orthogonal_blocks(Matrix& m, std::mt19937_64& rng) {
  const Eigen::Index H = m.rows();
  std::normal_distribution<double> n(0.0, 1.0);
  for (Eigen::Index blk = 0; blk * H < m.cols(); ++blk) {
    Matrix a(H, H);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = n(rng);
    Eigen::HouseholderQR<Matrix> qr(a);
    Matrix q = qr.householderQ() * Matrix::Identity(H, H);
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < H; ++j) {
      if (r(j, j) < 0) q.col(j) = -q.col(j);
    }
    m.middleCols(blk * H, H) = q;
  }
}

}  // namespace hartl::model

#endif  // HARTL_MODEL_LAYERS_HPP_
