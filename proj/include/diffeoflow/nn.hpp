#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "diffeoflow/errors.hpp"
#include "diffeoflow/matrix.hpp"
#include "diffeoflow/rng.hpp"

namespace diffeoflow {

struct Layer {
  Matrix weight;  // out x in
  Vec bias;       // out
};

// Plain multilayer perceptron: affine layers with SiLU activation between
// them, linear output layer. Doubles throughout.
struct MlpParams {
  std::vector<Layer> layers;

  int in_dim() const { return layers.front().weight.cols(); }
  int out_dim() const { return layers.back().weight.rows(); }

  bool all_finite() const {
    for (const Layer& l : layers)
      if (!l.weight.all_finite() || !diffeoflow::all_finite(l.bias)) return false;
    return true;
  }
};

using MlpGrads = MlpParams;  // same shapes

// Glorot-uniform initialization: weights uniform in
// +-sqrt(6 / (fan_in + fan_out)), biases zero. Deterministic given the seed.
inline MlpParams mlp_init(std::uint64_t seed, int in_dim, const std::vector<int>& hidden_dims,
                          int out_dim) {
  if (in_dim <= 0 || out_dim <= 0) throw InvalidInput("mlp_init: dims must be positive");
  for (int h : hidden_dims)
    if (h <= 0) throw InvalidInput("mlp_init: dims must be positive");
  std::vector<int> dims;
  dims.push_back(in_dim);
  dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
  dims.push_back(out_dim);

  Rng rng(seed, /*stream=*/0x6d6c7000);  // dedicated init stream
  MlpParams p;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l];
    const int fan_out = dims[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Layer layer;
    layer.weight = Matrix(fan_out, fan_in);
    for (int i = 0; i < fan_out; ++i)
      for (int j = 0; j < fan_in; ++j) layer.weight(i, j) = (2.0 * rng.uniform() - 1.0) * limit;
    layer.bias.assign(static_cast<std::size_t>(fan_out), 0.0);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double silu(double x) { return x * sigmoid(x); }
inline double silu_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

inline Vec mlp_forward(const MlpParams& p, const Vec& input) {
  if (static_cast<int>(input.size()) != p.in_dim())
    throw InvalidInput("mlp_forward: input length mismatch");
  Vec x = input;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    Vec y = matvec(p.layers[l].weight, x);
    axpy(1.0, p.layers[l].bias, y);
    if (l + 1 < p.layers.size())
      for (double& v : y) v = silu(v);
    x = std::move(y);
  }
  return x;
}

inline MlpGrads zero_grads_like(const MlpParams& p) {
  MlpGrads g;
  for (const Layer& l : p.layers) {
    Layer zl;
    zl.weight = Matrix(l.weight.rows(), l.weight.cols());
    zl.bias.assign(l.bias.size(), 0.0);
    g.layers.push_back(std::move(zl));
  }
  return g;
}

// Reverse-mode gradients of the forward pass. Parameter gradients are
// accumulated into `accum` (so batches can sum in place); the return value is
// the gradient with respect to the input.
inline Vec mlp_backward(const MlpParams& p, const Vec& input, const Vec& output_grad,
                        MlpGrads& accum) {
  if (static_cast<int>(input.size()) != p.in_dim())
    throw InvalidInput("mlp_backward: input length mismatch");
  if (static_cast<int>(output_grad.size()) != p.out_dim())
    throw InvalidInput("mlp_backward: output_grad length mismatch");
  if (accum.layers.size() != p.layers.size())
    throw InvalidInput("mlp_backward: accumulator shape mismatch");

  const std::size_t num_layers = p.layers.size();
  std::vector<Vec> inputs(num_layers);      // input to each layer
  std::vector<Vec> pre_acts(num_layers);    // affine outputs before activation
  Vec x = input;
  for (std::size_t l = 0; l < num_layers; ++l) {
    inputs[l] = x;
    Vec y = matvec(p.layers[l].weight, x);
    axpy(1.0, p.layers[l].bias, y);
    pre_acts[l] = y;
    if (l + 1 < num_layers)
      for (double& v : y) v = silu(v);
    x = std::move(y);
  }

  Vec grad = output_grad;
  for (std::size_t li = num_layers; li-- > 0;) {
    if (li + 1 < num_layers)
      for (std::size_t k = 0; k < grad.size(); ++k) grad[k] *= silu_grad(pre_acts[li][k]);
    Layer& g = accum.layers[li];
    const Layer& layer = p.layers[li];
    const Vec& in = inputs[li];
    for (int i = 0; i < layer.weight.rows(); ++i) {
      const double gi = grad[static_cast<std::size_t>(i)];
      g.bias[static_cast<std::size_t>(i)] += gi;
      if (gi == 0.0) continue;
      for (int j = 0; j < layer.weight.cols(); ++j)
        g.weight(i, j) += gi * in[static_cast<std::size_t>(j)];
    }
    Vec prev(static_cast<std::size_t>(layer.weight.cols()), 0.0);
    for (int i = 0; i < layer.weight.rows(); ++i) {
      const double gi = grad[static_cast<std::size_t>(i)];
      if (gi == 0.0) continue;
      for (int j = 0; j < layer.weight.cols(); ++j)
        prev[static_cast<std::size_t>(j)] += gi * layer.weight(i, j);
    }
    grad = std::move(prev);
  }
  return grad;
}

struct AdamWState {
  MlpParams first_moment;
  MlpParams second_moment;
  std::int64_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

inline AdamWState adamw_init(const MlpParams& p, double lr, double weight_decay) {
  AdamWState s;
  s.first_moment = zero_grads_like(p);
  s.second_moment = zero_grads_like(p);
  s.lr = lr;
  s.weight_decay = weight_decay;
  return s;
}

// One AdamW update. Decoupled weight decay is applied first
// (p <- p - lr * wd * p), then the standard Adam step with bias correction.
inline void adamw_step(MlpParams& p, const MlpGrads& grads, AdamWState& state) {
  for (const Layer& g : grads.layers)
    if (!g.weight.all_finite() || !diffeoflow::all_finite(g.bias))
      throw NonFiniteGradient("adamw_step: non-finite gradient");

  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto update = [&](double& param, double grad, double& m, double& v) {
      param -= state.lr * state.weight_decay * param;
      m = state.beta1 * m + (1.0 - state.beta1) * grad;
      v = state.beta2 * v + (1.0 - state.beta2) * grad * grad;
      const double m_hat = m / bc1;
      const double v_hat = v / bc2;
      param -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    };
    Matrix& w = p.layers[l].weight;
    for (int i = 0; i < w.rows(); ++i)
      for (int j = 0; j < w.cols(); ++j)
        update(w(i, j), grads.layers[l].weight(i, j), state.first_moment.layers[l].weight(i, j),
               state.second_moment.layers[l].weight(i, j));
    for (std::size_t k = 0; k < p.layers[l].bias.size(); ++k)
      update(p.layers[l].bias[k], grads.layers[l].bias[k], state.first_moment.layers[l].bias[k],
             state.second_moment.layers[l].bias[k]);
  }
}

}  // namespace diffeoflow
