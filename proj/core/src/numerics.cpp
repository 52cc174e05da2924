// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include "xlstm/numerics.hpp"

#include <cmath>
#include <string>

#include "eigen_util.hpp"
#include "xlstm/error.hpp"

namespace xlstm {

using detail::as_matrix;
using detail::ConstStridedMap;
using detail::StridedMap;

std::string_view to_string(Activation kind) {
  switch (kind) {
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
    case Activation::Exp: return "exp";
    case Activation::Gelu: return "gelu";
    case Activation::Swish: return "swish";
    case Activation::Identity: return "identity";
  }
  return "?";
}

Activation activation_from_string(std::string_view name) {
  for (Activation a : {Activation::Sigmoid, Activation::Tanh, Activation::Exp, Activation::Gelu, Activation::Swish,
                       Activation::Identity}) {
    if (to_string(a) == name) return a;
  }
  throw ConfigError("", "unknown activation '" + std::string(name) + "'");
}

namespace act {

Scalar value(Activation kind, Scalar x) {
  switch (kind) {
    case Activation::Sigmoid: return sigmoid(x);
    case Activation::Tanh: return std::tanh(x);
    case Activation::Exp: return std::exp(x);
    case Activation::Gelu: return gelu(x);
    case Activation::Swish: return swish(x);
    case Activation::Identity: return x;
  }
  return x;
}

Scalar derivative(Activation kind, Scalar x) {
  switch (kind) {
    case Activation::Sigmoid: {
      const Scalar s = sigmoid(x);
      return s * (Scalar(1) - s);
    }
    case Activation::Tanh: {
      const Scalar t = std::tanh(x);
      return Scalar(1) - t * t;
    }
    case Activation::Exp: return std::exp(x);
    case Activation::Gelu: return gelu_grad(x);
    case Activation::Swish: return swish_grad(x);
    case Activation::Identity: return Scalar(1);
  }
  return Scalar(1);
}

}  // namespace act

Tensor apply_activation(const Tensor& x, Activation kind) {
  Tensor y = Tensor::zeros_like(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = act::value(kind, x[i]);
    if (!std::isfinite(y[i])) {
      throw NumericOverflowError(std::string(to_string(kind)) + " produced a non-finite value", i);
    }
  }
  return y;
}

Tensor activation_backward(const Tensor& pre, const Tensor& grad_out, Activation kind) {
  require_shape(grad_out, pre.shape(), "activation_backward grad");
  Tensor g = Tensor::zeros_like(pre);
  for (std::size_t i = 0; i < pre.size(); ++i) g[i] = grad_out[i] * act::derivative(kind, pre[i]);
  return g;
}

// ---------------------------------------------------------------------------------------------

namespace {

void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) throw ShapeError(std::string(what) + ": expected a matrix, got " + shape_string(t.shape()));
}

}  // namespace

void matmul_acc(const Tensor& a, bool transpose_a, const Tensor& b, bool transpose_b, Tensor& c, Scalar alpha) {
  require_matrix(a, "matmul lhs");
  require_matrix(b, "matmul rhs");
  require_matrix(c, "matmul out");
  const std::size_t m = transpose_a ? a.dim(1) : a.dim(0);
  const std::size_t ka = transpose_a ? a.dim(0) : a.dim(1);
  const std::size_t kb = transpose_b ? b.dim(1) : b.dim(0);
  const std::size_t n = transpose_b ? b.dim(0) : b.dim(1);
  if (ka != kb || c.dim(0) != m || c.dim(1) != n) {
    throw ShapeError("matmul: incompatible shapes " + shape_string(a.shape()) + (transpose_a ? "^T" : "") + " * " +
                     shape_string(b.shape()) + (transpose_b ? "^T" : "") + " -> " + shape_string(c.shape()));
  }
  auto am = as_matrix(a);
  auto bm = as_matrix(b);
  auto cm = as_matrix(c);
  if (!transpose_a && !transpose_b) cm.noalias() += alpha * am * bm;
  else if (!transpose_a && transpose_b) cm.noalias() += alpha * am * bm.transpose();
  else if (transpose_a && !transpose_b) cm.noalias() += alpha * am.transpose() * bm;
  else cm.noalias() += alpha * am.transpose() * bm.transpose();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul lhs");
  require_matrix(b, "matmul rhs");
  Tensor c({a.dim(0), b.dim(1)});
  matmul_acc(a, false, b, false, c);
  return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul lhs");
  require_matrix(b, "matmul rhs");
  Tensor c({a.dim(0), b.dim(0)});
  matmul_acc(a, false, b, true, c);
  return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul lhs");
  require_matrix(b, "matmul rhs");
  Tensor c({a.dim(1), b.dim(1)});
  matmul_acc(a, true, b, false, c);
  return c;
}

// ---------------------------------------------------------------------------------------------

std::size_t linear_in_features(const Tensor& weight) {
  if (weight.rank() == 2) return weight.dim(1);
  if (weight.rank() == 3) return weight.dim(0) * weight.dim(2);
  throw ShapeError("linear weight must be rank 2 (dense) or 3 (block-diagonal), got " + shape_string(weight.shape()));
}

std::size_t linear_out_features(const Tensor& weight) {
  if (weight.rank() == 2) return weight.dim(0);
  if (weight.rank() == 3) return weight.dim(0) * weight.dim(1);
  throw ShapeError("linear weight must be rank 2 (dense) or 3 (block-diagonal), got " + shape_string(weight.shape()));
}

std::size_t linear_param_count(std::size_t in, std::size_t out, std::size_t heads, bool bias) {
  if (heads == 0 || in % heads != 0 || out % heads != 0) {
    throw ShapeError("linear_param_count: dimensions must be divisible by the head count");
  }
  return heads * (out / heads) * (in / heads) + (bias ? out : 0);
}

namespace {

struct LinearDims {
  std::size_t rows, in, out, heads, in_h, out_h;
};

LinearDims linear_dims(const Tensor& x, const Tensor& weight, const char* what) {
  LinearDims d{};
  d.in = linear_in_features(weight);
  d.out = linear_out_features(weight);
  d.heads = weight.rank() == 3 ? weight.dim(0) : 1;
  d.in_h = d.in / d.heads;
  d.out_h = d.out / d.heads;
  if (x.rank() < 1 || x.rank() > 2 || x.cols() != d.in) {
    throw ShapeError(std::string(what) + ": input " + shape_string(x.shape()) + " does not match weight " +
                     shape_string(weight.shape()));
  }
  d.rows = x.rank() == 1 ? 1 : x.dim(0);
  return d;
}

}  // namespace

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  const LinearDims d = linear_dims(x, weight, "linear");
  if (!bias.empty()) require_shape(bias, {d.out}, "linear bias");
  Tensor y = x.rank() == 1 ? Tensor({d.out}) : Tensor({d.rows, d.out});
  auto ym = as_matrix(y, d.rows, d.out);
  auto xm = as_matrix(x, d.rows, d.in);
  if (d.heads == 1) {
    ym.noalias() = xm * as_matrix(weight).transpose();
  } else {
    for (std::size_t h = 0; h < d.heads; ++h) {
      detail::ConstMatMap wh(weight.data() + h * d.out_h * d.in_h, d.out_h, d.in_h);
      ConstStridedMap xh(x.data() + h * d.in_h, d.rows, d.in_h, Eigen::OuterStride<>(d.in));
      StridedMap yh(y.data() + h * d.out_h, d.rows, d.out_h, Eigen::OuterStride<>(d.out));
      yh.noalias() = xh * wh.transpose();
    }
  }
  if (!bias.empty()) {
    for (std::size_t r = 0; r < d.rows; ++r) {
      Scalar* yr = y.data() + r * d.out;
      for (std::size_t c = 0; c < d.out; ++c) yr[c] += bias[c];
    }
  }
  return y;
}

void linear_backward_acc(const Tensor& x, const Tensor& weight, const Tensor& grad_y, Tensor* grad_x,
                         Tensor* grad_weight, Tensor* grad_bias) {
  const LinearDims d = linear_dims(x, weight, "linear_backward");
  if (grad_y.size() != d.rows * d.out) {
    throw ShapeError("linear_backward: grad " + shape_string(grad_y.shape()) + " does not match output");
  }
  if (grad_x) require_shape(*grad_x, x.shape(), "linear_backward grad_x");
  if (grad_weight) require_shape(*grad_weight, weight.shape(), "linear_backward grad_weight");
  if (grad_bias) require_shape(*grad_bias, {d.out}, "linear_backward grad_bias");

  auto gy = as_matrix(grad_y, d.rows, d.out);
  if (d.heads == 1) {
    auto w = as_matrix(weight);
    if (grad_x) as_matrix(*grad_x, d.rows, d.in).noalias() += gy * w;
    if (grad_weight) as_matrix(*grad_weight).noalias() += gy.transpose() * as_matrix(x, d.rows, d.in);
  } else {
    for (std::size_t h = 0; h < d.heads; ++h) {
      detail::ConstMatMap wh(weight.data() + h * d.out_h * d.in_h, d.out_h, d.in_h);
      ConstStridedMap gyh(grad_y.data() + h * d.out_h, d.rows, d.out_h, Eigen::OuterStride<>(d.out));
      if (grad_x) {
        StridedMap gxh(grad_x->data() + h * d.in_h, d.rows, d.in_h, Eigen::OuterStride<>(d.in));
        gxh.noalias() += gyh * wh;
      }
      if (grad_weight) {
        ConstStridedMap xh(x.data() + h * d.in_h, d.rows, d.in_h, Eigen::OuterStride<>(d.in));
        detail::MatMap gwh(grad_weight->data() + h * d.out_h * d.in_h, d.out_h, d.in_h);
        gwh.noalias() += gyh.transpose() * xh;
      }
    }
  }
  if (grad_bias) {
    for (std::size_t r = 0; r < d.rows; ++r) {
      const Scalar* gr = grad_y.data() + r * d.out;
      for (std::size_t c = 0; c < d.out; ++c) (*grad_bias)[c] += gr[c];
    }
  }
}

LinearGrads linear_backward(const Tensor& x, const Tensor& weight, bool has_bias, const Tensor& grad_y) {
  LinearGrads g{Tensor::zeros_like(x), Tensor::zeros_like(weight), {}};
  if (has_bias) g.bias = Tensor({linear_out_features(weight)});
  linear_backward_acc(x, weight, grad_y, &g.input, &g.weight, has_bias ? &g.bias : nullptr);
  return g;
}

// ---------------------------------------------------------------------------------------------

namespace {

void check_conv(const Tensor& x, const Tensor& kernel, const char* what) {
  if (x.rank() != 2 || kernel.rank() != 2 || kernel.dim(0) < 1 || kernel.dim(1) != x.dim(1)) {
    throw ShapeError(std::string(what) + ": input " + shape_string(x.shape()) + " incompatible with kernel " +
                     shape_string(kernel.shape()));
  }
}

}  // namespace

Tensor causal_conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
  check_conv(x, kernel, "causal_conv1d");
  const std::size_t steps = x.dim(0), d = x.dim(1), w = kernel.dim(0);
  if (!bias.empty()) require_shape(bias, {d}, "causal_conv1d bias");
  Tensor y({steps, d});
  for (std::size_t t = 0; t < steps; ++t) {
    Scalar* yt = y.data() + t * d;
    if (!bias.empty()) {
      for (std::size_t c = 0; c < d; ++c) yt[c] = bias[c];
    }
    for (std::size_t j = 0; j < w; ++j) {
      // input index t - w + 1 + j
      if (t + 1 + j < w) continue;
      const std::size_t src = t + 1 + j - w;
      const Scalar* xs = x.data() + src * d;
      const Scalar* kj = kernel.data() + j * d;
      for (std::size_t c = 0; c < d; ++c) yt[c] += kj[c] * xs[c];
    }
  }
  return y;
}

void causal_conv1d_backward_acc(const Tensor& x, const Tensor& kernel, const Tensor& grad_y, Tensor* grad_x,
                                Tensor* grad_kernel, Tensor* grad_bias) {
  check_conv(x, kernel, "causal_conv1d_backward");
  require_shape(grad_y, x.shape(), "causal_conv1d_backward grad");
  const std::size_t steps = x.dim(0), d = x.dim(1), w = kernel.dim(0);
  for (std::size_t t = 0; t < steps; ++t) {
    const Scalar* gt = grad_y.data() + t * d;
    if (grad_bias) {
      for (std::size_t c = 0; c < d; ++c) (*grad_bias)[c] += gt[c];
    }
    for (std::size_t j = 0; j < w; ++j) {
      if (t + 1 + j < w) continue;
      const std::size_t src = t + 1 + j - w;
      if (grad_x) {
        Scalar* gx = grad_x->data() + src * d;
        const Scalar* kj = kernel.data() + j * d;
        for (std::size_t c = 0; c < d; ++c) gx[c] += kj[c] * gt[c];
      }
      if (grad_kernel) {
        Scalar* gk = grad_kernel->data() + j * d;
        const Scalar* xs = x.data() + src * d;
        for (std::size_t c = 0; c < d; ++c) gk[c] += xs[c] * gt[c];
      }
    }
  }
}

// ---------------------------------------------------------------------------------------------

Tensor group_norm(const Tensor& x, std::size_t num_heads, const Tensor& gain, const Tensor& shift, Scalar eps,
                  GroupNormCache* cache) {
  if (x.rank() < 1 || x.rank() > 2) throw ShapeError("group_norm: expected [T x d] input");
  const std::size_t d = x.cols(), rows = x.rows();
  if (num_heads == 0 || d % num_heads != 0) {
    throw ShapeError("group_norm: width " + std::to_string(d) + " not divisible by " + std::to_string(num_heads) +
                     " heads");
  }
  if (!gain.empty()) require_shape(gain, {d}, "group_norm gain");
  if (!shift.empty()) require_shape(shift, {d}, "group_norm shift");
  const std::size_t width = d / num_heads;
  Tensor y = Tensor::zeros_like(x);
  if (cache) {
    cache->normalized = Tensor::zeros_like(x);
    cache->inv_std = Tensor({rows, num_heads});
  }
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t h = 0; h < num_heads; ++h) {
      const Scalar* xs = x.data() + r * d + h * width;
      Scalar mean = 0;
      for (std::size_t c = 0; c < width; ++c) mean += xs[c];
      mean /= static_cast<Scalar>(width);
      Scalar var = 0;
      for (std::size_t c = 0; c < width; ++c) var += (xs[c] - mean) * (xs[c] - mean);
      var /= static_cast<Scalar>(width);
      const Scalar inv_std = Scalar(1) / std::sqrt(var + eps);
      if (cache) cache->inv_std(r, h) = inv_std;
      for (std::size_t c = 0; c < width; ++c) {
        const std::size_t idx = r * d + h * width + c;
        const Scalar n = (xs[c] - mean) * inv_std;
        if (cache) cache->normalized[idx] = n;
        const std::size_t col = h * width + c;
        y[idx] = (gain.empty() ? n : gain[col] * n) + (shift.empty() ? Scalar(0) : shift[col]);
      }
    }
  }
  return y;
}

void group_norm_backward_acc(const GroupNormCache& cache, std::size_t num_heads, const Tensor& gain,
                             const Tensor& grad_y, Tensor* grad_x, Tensor* grad_gain, Tensor* grad_shift) {
  const Tensor& xhat = cache.normalized;
  require_shape(grad_y, xhat.shape(), "group_norm_backward grad");
  const std::size_t d = xhat.cols(), rows = xhat.rows();
  const std::size_t width = d / num_heads;
  std::vector<Scalar> gn(width);
  for (std::size_t r = 0; r < rows; ++r) {
    const Scalar* gy = grad_y.data() + r * d;
    const Scalar* nr = xhat.data() + r * d;
    for (std::size_t c = 0; c < d; ++c) {
      if (grad_gain && !gain.empty()) (*grad_gain)[c] += gy[c] * nr[c];
      if (grad_shift) (*grad_shift)[c] += gy[c];
    }
    if (!grad_x) continue;
    for (std::size_t h = 0; h < num_heads; ++h) {
      Scalar mean_g = 0, mean_gn = 0;
      for (std::size_t c = 0; c < width; ++c) {
        const std::size_t col = h * width + c;
        gn[c] = gain.empty() ? gy[col] : gy[col] * gain[col];
        mean_g += gn[c];
        mean_gn += gn[c] * nr[col];
      }
      mean_g /= static_cast<Scalar>(width);
      mean_gn /= static_cast<Scalar>(width);
      const Scalar inv_std = cache.inv_std(r, h);
      Scalar* gx = grad_x->data() + r * d + h * width;
      for (std::size_t c = 0; c < width; ++c) {
        gx[c] += inv_std * (gn[c] - mean_g - nr[h * width + c] * mean_gn);
      }
    }
  }
}

}  // namespace xlstm
