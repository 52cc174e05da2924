// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

// mLSTM: matrix memory with a covariance update and scalar exponential gates per head.
//
// The core functions work on already-projected queries, keys, values and gate pre-activations
// so the residual block can supply its own projections. Heads are contiguous column slices of
// the [T x d] q/k/v tensors; gate pre-activations are [T x H]. Keys are scaled by 1/sqrt(d_head)
// inside the core. `MLstmParams` is the stand-alone cell with its own input projections.

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "xlstm/params.hpp"
#include "xlstm/rng.hpp"
#include "xlstm/slstm.hpp"
#include "xlstm/tensor.hpp"

namespace xlstm {

/// Stand-in for -inf above the diagonal of the log-forget matrix; exp() of it is exactly 0.
inline constexpr Scalar kNegativeSentinel = Scalar(-1e30);

struct MLstmCoreInputs {
  Tensor q, k, v;  // [T x d]
  Tensor i, f;     // gate pre-activations [T x H]

  std::size_t steps() const { return q.empty() ? 0 : q.dim(0); }
};

/// Gate matrices of one head. All are [T x T] except m ([T]).
struct GateMatrices {
  Tensor log_f;    // F-bar: sum of log forget gates over (j, i], 0 on the diagonal, sentinel above
  Tensor d_tilde;  // F-bar + I-tilde below and on the diagonal, sentinel above
  Tensor m;        // row-wise max of d_tilde
  Tensor d_prime;  // exp(d_tilde - m)
};

GateMatrices mlstm_gate_matrices(std::span<const Scalar> i_pre, std::span<const Scalar> f_pre,
                                 GateActivation forget_gate);

struct MLstmParallelHeadCache {
  GateMatrices gates;
  Tensor scores;   // Q K^T / sqrt(d_head), [T x T]
  Tensor c_tilde;  // scores * D', [T x T]
  Tensor b;        // row sums of c_tilde, [T]
  Tensor n;        // max(|b|, exp(-m)), [T]
  Tensor c;        // c_tilde / n, [T x T]
};

struct MLstmParallelCache {
  MLstmCoreInputs inputs;
  std::size_t num_heads = 0;
  GateActivation forget_gate = GateActivation::Sigmoid;
  std::vector<MLstmParallelHeadCache> heads;
};

struct MLstmParallelResult {
  Tensor h;  // hidden pre-activations H-tilde, [T x d]
  MLstmParallelCache cache;
};

MLstmParallelResult mlstm_core_parallel(const MLstmCoreInputs& inputs, std::size_t num_heads,
                                        GateActivation forget_gate);
/// Gradients with respect to every field of the inputs (same layout).
MLstmCoreInputs mlstm_core_parallel_backward(const MLstmParallelCache& cache, const Tensor& grad_h);

/// Stabilized state of one head: C and n are the unstabilized states times exp(-m).
struct MLstmHeadState {
  Tensor c;  // [d_head x d_head]
  Tensor n;  // [d_head]
  Scalar m = 0;
  static MLstmHeadState zeros(std::size_t head_dim);
};

struct MLstmState {
  std::vector<MLstmHeadState> heads;
  static MLstmState zeros(std::size_t num_heads, std::size_t head_dim);
};

struct MLstmRecurrentCache {
  MLstmCoreInputs inputs;
  std::size_t num_heads = 0;
  GateActivation forget_gate = GateActivation::Sigmoid;
  Tensor c;       // [T+1 x H x d_head x d_head]; row 0 is the initial state
  Tensor n;       // [T+1 x H x d_head]
  Tensor m;       // [T+1 x H]
  Tensor i_stab;  // [T x H]
  Tensor f_stab;  // [T x H]
  Tensor dot;     // n_t^T q_t, [T x H]
  Tensor denom;   // max(|n_t^T q_t|, exp(-m_t)), [T x H]
  Tensor h;       // [T x d]
};

struct MLstmRecurrentResult {
  Tensor h;  // [T x d]
  MLstmRecurrentCache cache;
  MLstmState final_state;
};

MLstmRecurrentResult mlstm_core_recurrent(const MLstmCoreInputs& inputs, std::size_t num_heads,
                                          GateActivation forget_gate, const MLstmState& state0);
MLstmCoreInputs mlstm_core_recurrent_backward(const MLstmRecurrentCache& cache, const Tensor& grad_h);

// ---------------------------------------------------------------------------------------------
// Stand-alone cell.

struct MLstmConfig {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t num_heads = 4;
  GateActivation forget_gate = GateActivation::Sigmoid;
  bool output_gate = true;

  void validate() const;
  std::size_t head_dim() const { return hidden_dim / num_heads; }
};

struct MLstmParams {
  MLstmConfig config;
  Tensor w_q, w_k, w_v;  // [d x d_in]
  Tensor b_q, b_k, b_v;  // [d]
  Tensor w_i, w_f;       // [H x d_in]
  Tensor b_i, b_f;       // [H]
  Tensor w_o, b_o;       // [d x d_in], [d]; empty when the output gate is disabled

  static MLstmParams zeros(const MLstmConfig& config);
  /// Small-init weights, forget bias equidistant in [3, 6] over heads, input bias ~ N(0, 0.1).
  static MLstmParams init(const MLstmConfig& config, Rng& rng);
  void collect(ParamList& out, const std::string& prefix);
};

/// q, k, v (unscaled keys) and gate pre-activations for a sequence.
MLstmCoreInputs mlstm_project_inputs(const MLstmParams& params, const Tensor& x_seq);

struct MLstmCache {
  Tensor x;       // [T x d_in]
  Tensor o_pre;   // [T x d]; empty without output gate
  Tensor h_tilde;  // [T x d]
  bool parallel = true;
  MLstmParallelCache par;
  MLstmRecurrentCache rec;
};

struct MLstmSequence {
  Tensor h;  // [T x d]
  MLstmCache cache;
};

MLstmSequence mlstm_parallel_forward(const MLstmParams& params, const Tensor& x_seq);
MLstmSequence mlstm_recurrent_forward(const MLstmParams& params, const Tensor& x_seq);

struct MLstmStepResult {
  MLstmState state;
  Tensor h;  // [d]
};

MLstmStepResult mlstm_step(const MLstmParams& params, const MLstmState& state, const Tensor& x);

struct MLstmGrads {
  MLstmParams params;
  Tensor input;  // [T x d_in]
};

/// Throw CacheMismatchError when given a cache from the other form.
MLstmGrads mlstm_parallel_backward(const MLstmParams& params, const MLstmCache& cache, const Tensor& grad_h);
MLstmGrads mlstm_recurrent_backward(const MLstmParams& params, const MLstmCache& cache, const Tensor& grad_h);

}  // namespace xlstm
