// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

// Shared neural primitives: activations, dense and block-diagonal linear maps, depthwise causal
// convolution and head-wise normalization. Every forward has a hand-written backward.
//
// Backward functions with an `_acc` suffix accumulate (+=) into the gradient buffers they are given,
// so composite layers can sum contributions without temporaries. Pass nullptr to skip a gradient.

#pragma once

#include <cmath>
#include <cstddef>
#include <string_view>

#include "xlstm/tensor.hpp"

namespace xlstm {

enum class Activation { Sigmoid, Tanh, Exp, Gelu, Swish, Identity };

std::string_view to_string(Activation kind);
/// Throws ConfigError for unknown names.
Activation activation_from_string(std::string_view name);

namespace act {

inline Scalar sigmoid(Scalar x) {
  if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

/// log(1 + exp(x)) without overflow.
inline Scalar softplus(Scalar x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline Scalar log_sigmoid(Scalar x) { return -softplus(-x); }

inline Scalar gelu(Scalar x) {
  return Scalar(0.5) * x * (Scalar(1) + std::erf(x * Scalar(0.70710678118654752440)));
}

inline Scalar gelu_grad(Scalar x) {
  const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(x * Scalar(0.70710678118654752440)));
  const Scalar pdf = Scalar(0.39894228040143267794) * std::exp(Scalar(-0.5) * x * x);
  return cdf + x * pdf;
}

inline Scalar swish(Scalar x) { return x * sigmoid(x); }

inline Scalar swish_grad(Scalar x) {
  const Scalar s = sigmoid(x);
  return s * (Scalar(1) + x * (Scalar(1) - s));
}

Scalar value(Activation kind, Scalar x);
/// Derivative evaluated at the pre-activation x.
Scalar derivative(Activation kind, Scalar x);

}  // namespace act

/// Elementwise activation. Throws NumericOverflowError if exp overflows.
Tensor apply_activation(const Tensor& x, Activation kind);
/// grad_out * f'(pre), elementwise.
Tensor activation_backward(const Tensor& pre, const Tensor& grad_out, Activation kind);

// ---------------------------------------------------------------------------------------------
// Matrix products on rank-2 tensors (Eigen-backed, single threaded, fixed reduction order).

Tensor matmul(const Tensor& a, const Tensor& b);     // a * b
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a * b^T
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // a^T * b
/// c += alpha * op(a) * op(b)
void matmul_acc(const Tensor& a, bool transpose_a, const Tensor& b, bool transpose_b, Tensor& c,
                Scalar alpha = Scalar(1));

// ---------------------------------------------------------------------------------------------
// Linear maps y = W x + b, applied to every row of x ([T x in] or a single [in] vector).
//
// A dense weight is stored [out x in]. A block-diagonal weight with H heads is stored
// [H x out/H x in/H]; the off-block zeros are never materialized. `bias` may be empty.

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias = {});

struct LinearGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;  // empty when the layer has no bias
};

LinearGrads linear_backward(const Tensor& x, const Tensor& weight, bool has_bias, const Tensor& grad_y);
void linear_backward_acc(const Tensor& x, const Tensor& weight, const Tensor& grad_y, Tensor* grad_x,
                         Tensor* grad_weight, Tensor* grad_bias);

std::size_t linear_in_features(const Tensor& weight);
std::size_t linear_out_features(const Tensor& weight);
/// Number of stored parameters of an in -> out map with `heads` diagonal blocks (1 = dense).
std::size_t linear_param_count(std::size_t in, std::size_t out, std::size_t heads, bool bias);

// ---------------------------------------------------------------------------------------------
// Depthwise causal convolution: y[t,c] = bias[c] + sum_j kernel[j,c] * x[t-w+1+j, c],
// zero left padding. kernel is [w x d].

Tensor causal_conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias);
void causal_conv1d_backward_acc(const Tensor& x, const Tensor& kernel, const Tensor& grad_y, Tensor* grad_x,
                                Tensor* grad_kernel, Tensor* grad_bias);

// ---------------------------------------------------------------------------------------------
// Head-wise normalization: each row is split into num_heads slices that are normalized
// independently, then scaled by gain and shifted. Empty gain/shift mean identity affine.
// num_heads == 1 is a LayerNorm.

inline constexpr Scalar kNormEps = Scalar(1e-5);

struct GroupNormCache {
  Tensor normalized;  // [rows x d], before gain/shift
  Tensor inv_std;     // [rows x heads]
};

Tensor group_norm(const Tensor& x, std::size_t num_heads, const Tensor& gain, const Tensor& shift,
                  Scalar eps = kNormEps, GroupNormCache* cache = nullptr);
void group_norm_backward_acc(const GroupNormCache& cache, std::size_t num_heads, const Tensor& gain,
                             const Tensor& grad_y, Tensor* grad_x, Tensor* grad_gain, Tensor* grad_shift);

}  // namespace xlstm
