// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

// sLSTM: scalar memory cells with exponential input gating, a normalizer state, a log-domain
// stabilizer state and block-diagonal ("per head") recurrent memory mixing.
//
// The recurrence is split from the input projections: `slstm_recurrence` consumes the
// already-projected gate inputs W_g x_t + b_g, which lets the residual block feed different
// inputs to different gates. `slstm_forward`/`slstm_backward` are the plain cell on top of it.

#pragma once

#include <cstddef>
#include <string>

#include "xlstm/numerics.hpp"
#include "xlstm/params.hpp"
#include "xlstm/rng.hpp"
#include "xlstm/tensor.hpp"

namespace xlstm {

enum class GateActivation { Sigmoid, Exp };

std::string_view to_string(GateActivation g);
GateActivation gate_activation_from_string(std::string_view name);

/// log of the gate activation and its derivative with respect to the pre-activation.
inline Scalar log_gate(GateActivation g, Scalar pre) { return g == GateActivation::Exp ? pre : act::log_sigmoid(pre); }
inline Scalar log_gate_grad(GateActivation g, Scalar pre) {
  return g == GateActivation::Exp ? Scalar(1) : act::sigmoid(-pre);
}

struct SLstmConfig {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t num_heads = 4;
  GateActivation forget_gate = GateActivation::Sigmoid;
  /// Exp is the sLSTM input gate; Sigmoid turns the cell into a normalized vanilla LSTM.
  GateActivation input_gate = GateActivation::Exp;
  /// Store W_g as block-diagonal with num_heads blocks instead of dense.
  bool block_diagonal_input = false;
  /// Elementwise clamp applied to the recurrent hidden-state gradient; <= 0 disables it.
  Scalar recurrent_grad_clip = Scalar(10);

  void validate() const;
  std::size_t head_dim() const { return hidden_dim / num_heads; }
};

struct SLstmParams {
  SLstmConfig config;
  Tensor w_z, w_i, w_f, w_o;  // [d x d_in], or [H x d/H x d_in/H] when block_diagonal_input
  Tensor r_z, r_i, r_f, r_o;  // [H x d/H x d/H]
  Tensor b_z, b_i, b_f, b_o;  // [d]

  static SLstmParams zeros(const SLstmConfig& config);
  /// Small-init normal weights, forget bias equidistant in [3, 6], input bias ~ N(0, 0.1).
  static SLstmParams init(const SLstmConfig& config, Rng& rng);

  void collect(ParamList& out, const std::string& prefix);
};

/// Stabilized state. c and n are the unstabilized states scaled by exp(-m).
struct SLstmState {
  Tensor c, n, m, h;  // each [d]
  static SLstmState zeros(std::size_t hidden_dim);
};

/// Projected gate inputs W_g x_t + b_g for a whole sequence, each [T x d].
struct SLstmGateInputs {
  Tensor z, i, f, o;
};

/// Everything the backward recurrence reads. States have T+1 rows; row 0 is the initial state.
struct SLstmCache {
  Tensor x;                             // [T x d_in]; empty when built by slstm_recurrence
  Tensor z_pre, i_pre, f_pre, o_pre;    // full gate pre-activations [T x d]
  Tensor z, i_stab, f_stab, o;          // [T x d]
  Tensor c, n, m, h;                    // [T+1 x d]
  std::size_t steps() const { return z_pre.empty() ? 0 : z_pre.dim(0); }
};

struct SLstmSequence {
  Tensor h;  // [T x d]
  SLstmCache cache;
  SLstmState final_state;
};

struct SLstmStep {
  SLstmState state;
  SLstmCache cache;  // single-step cache
};

SLstmGateInputs slstm_project_inputs(const SLstmParams& params, const Tensor& x_seq);

SLstmSequence slstm_recurrence(const SLstmParams& params, const SLstmGateInputs& inputs, const SLstmState& state0);

/// One timestep; x is [d_in].
SLstmStep slstm_step(const SLstmParams& params, const SLstmState& state, const Tensor& x);

SLstmSequence slstm_forward(const SLstmParams& params, const Tensor& x_seq, const SLstmState& state0);
SLstmSequence slstm_forward(const SLstmParams& params, const Tensor& x_seq);

struct SLstmRecurrentGrads {
  SLstmGateInputs preact;       // gradients of the gate pre-activations, [T x d] each
  Tensor r_z, r_i, r_f, r_o;    // recurrent weight gradients
};

/// Backward through the recurrence only. `grad_h` is the external gradient dL/dh_t, [T x d].
SLstmRecurrentGrads slstm_recurrence_backward(const SLstmParams& params, const SLstmCache& cache,
                                              const Tensor& grad_h);

struct SLstmGrads {
  SLstmParams params;  // same layout as the parameters
  Tensor input;        // [T x d_in]
};

SLstmGrads slstm_backward(const SLstmParams& params, const SLstmCache& cache, const Tensor& grad_h);

/// The elementwise clamp used on the recurrent hidden-state gradient.
void clip_recurrent_gradient(std::span<Scalar> grad, Scalar limit);

// ---------------------------------------------------------------------------------------------
// Vanilla LSTM (dense recurrent matrices, sigmoid gates, tanh squashing). Ablation baseline.

struct VanillaLstmParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Tensor w_z, w_i, w_f, w_o;  // [d x d_in]
  Tensor r_z, r_i, r_f, r_o;  // [d x d]
  Tensor b_z, b_i, b_f, b_o;  // [d]

  static VanillaLstmParams zeros(std::size_t input_dim, std::size_t hidden_dim);
  static VanillaLstmParams init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);
  void collect(ParamList& out, const std::string& prefix);
};

struct LstmState {
  Tensor c, h;  // [d]
  static LstmState zeros(std::size_t hidden_dim);
};

LstmState lstm_step(const VanillaLstmParams& params, const LstmState& state, const Tensor& x);
/// Hidden states for every step, [T x d].
Tensor lstm_forward(const VanillaLstmParams& params, const Tensor& x_seq, const LstmState& state0);

}  // namespace xlstm
