// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

// Residual blocks.
//
// sLSTM block (post up-projection):
//   xn = LayerNorm(x); xc = swish(conv(xn))
//   h  = sLSTM(z, o from xn; i, f from xc)
//   y  = x + W_down (act_v(W_v GroupNorm(h)) * act_g(W_g GroupNorm(h)))
//
// mLSTM block (pre up-projection):
//   xn = LayerNorm(x); xm = W_up_x xn; z = W_up_z xn; xc = swish(conv(xm))
//   q, k = blockdiag(xc); v = blockdiag(xm); i, f = W_{i,f} [q; k; v] + b
//   y  = x + W_down ((GroupNorm(mLSTM(q, k, v, i, f)) + skip * xc) * gate(z))

#pragma once

#include <cstddef>
#include <string>

#include "xlstm/mlstm.hpp"
#include "xlstm/numerics.hpp"
#include "xlstm/params.hpp"
#include "xlstm/rng.hpp"
#include "xlstm/slstm.hpp"
#include "xlstm/tensor.hpp"

namespace xlstm {

struct SLstmBlockConfig {
  std::size_t num_heads = 4;
  /// Causal conv window feeding the i/f gates; 0 removes the conv and feeds xn directly.
  std::size_t conv_kernel = 4;
  double mlp_factor = 4.0 / 3.0;
  Activation mlp_value_activation = Activation::Gelu;
  Activation mlp_gate_activation = Activation::Swish;
  GateActivation forget_gate = GateActivation::Sigmoid;
  GateActivation input_gate = GateActivation::Exp;
  bool block_diagonal_input = false;
  Scalar recurrent_grad_clip = Scalar(10);

  /// MLP width ceil(mlp_factor * dim).
  std::size_t mlp_dim(std::size_t dim) const;
};

struct MLstmBlockConfig {
  std::size_t num_heads = 4;
  std::size_t proj_factor = 2;
  std::size_t conv_kernel = 4;
  std::size_t qkv_block_size = 4;
  GateActivation forget_gate = GateActivation::Sigmoid;
  /// Activation of the external gate branch (Sigmoid or Swish).
  Activation output_gate_activation = Activation::Sigmoid;
};

struct SLstmBlockParams {
  SLstmBlockConfig config;
  std::size_t dim = 0;
  Tensor norm_gain, norm_shift;      // [d]
  Tensor conv_kernel, conv_bias;     // [w x d], [d]; empty when conv_kernel == 0
  SLstmParams cell;
  Tensor gn_gain, gn_shift;          // [d]
  Tensor w_up_value, w_up_gate;      // [p x d]
  Tensor w_down;                     // [d x p]

  static SLstmBlockParams zeros(std::size_t dim, const SLstmBlockConfig& config);
  static SLstmBlockParams init(std::size_t dim, const SLstmBlockConfig& config, Rng& rng);
  void collect(ParamList& out, const std::string& prefix);
};

struct MLstmBlockParams {
  MLstmBlockConfig config;
  std::size_t dim = 0;
  Tensor norm_gain, norm_shift;      // [d]
  Tensor w_up_x, w_up_z;             // [inner x d]
  Tensor conv_kernel, conv_bias;     // [w x inner], [inner]
  Tensor w_q, w_k, w_v;              // block-diagonal [inner/bs x bs x bs]
  Tensor w_i, w_f;                   // [H x 3 inner]
  Tensor b_i, b_f;                   // [H]
  Tensor gn_gain, gn_shift;          // [inner]
  Tensor skip;                       // [inner]
  Tensor w_down;                     // [d x inner]

  std::size_t inner_dim() const { return dim * config.proj_factor; }
  static MLstmBlockParams zeros(std::size_t dim, const MLstmBlockConfig& config);
  static MLstmBlockParams init(std::size_t dim, const MLstmBlockConfig& config, Rng& rng);
  void collect(ParamList& out, const std::string& prefix);
};

struct SLstmBlockCache {
  Tensor x;
  GroupNormCache norm;
  Tensor xn;
  Tensor conv_pre;  // empty without conv
  Tensor xc;        // gate input for i/f
  SLstmCache cell;
  GroupNormCache gn;
  Tensor g;         // GroupNorm output
  Tensor up_value, up_gate, mixed;
};

struct MLstmBlockCache {
  Tensor x;
  GroupNormCache norm;
  Tensor xn, xm, z;
  Tensor conv_pre, xc;
  Tensor gate_input;  // [T x 3 inner] = [q | k | v]
  MLstmParallelCache core;
  Tensor h_tilde;
  GroupNormCache gn;
  Tensor hs;          // GroupNorm output + skip * xc
  Tensor gated;       // hs * gate(z)
};

struct SLstmBlockResult {
  Tensor y;
  SLstmBlockCache cache;
};

struct MLstmBlockResult {
  Tensor y;
  MLstmBlockCache cache;
};

SLstmBlockResult slstm_block_forward(const SLstmBlockParams& params, const Tensor& x);
MLstmBlockResult mlstm_block_forward(const MLstmBlockParams& params, const Tensor& x);

/// Accumulate parameter gradients into `grads` and return dL/dx.
Tensor slstm_block_backward(const SLstmBlockParams& params, const SLstmBlockCache& cache, const Tensor& grad_y,
                            SLstmBlockParams& grads);
Tensor mlstm_block_backward(const MLstmBlockParams& params, const MLstmBlockCache& cache, const Tensor& grad_y,
                            MLstmBlockParams& grads);

}  // namespace xlstm
