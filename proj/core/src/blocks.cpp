// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include "xlstm/blocks.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xlstm/error.hpp"

namespace xlstm {

namespace {

double small_init_std(std::size_t fan_in) { return std::sqrt(0.4 / double(fan_in)); }

void fill_small(Rng& rng, Tensor& t, std::size_t fan_in) {
  rng.fill_truncated_normal(t, 0.0, small_init_std(fan_in), 2.0);
}

void check_block_input(const Tensor& x, std::size_t dim, const char* what) {
  if (x.rank() != 2 || x.dim(1) != dim || x.dim(0) == 0) {
    throw ShapeError(std::string(what) + ": input " + shape_string(x.shape()) + " does not match dim " +
                     std::to_string(dim));
  }
}

Tensor swish_of(const Tensor& x) { return apply_activation(x, Activation::Swish); }

}  // namespace

std::size_t SLstmBlockConfig::mlp_dim(std::size_t dim) const {
  return static_cast<std::size_t>(std::ceil(mlp_factor * double(dim) - 1e-9));
}

SLstmBlockParams SLstmBlockParams::zeros(std::size_t dim, const SLstmBlockConfig& c) {
  SLstmBlockParams p;
  p.config = c;
  p.dim = dim;
  SLstmConfig cell{dim, dim, c.num_heads, c.forget_gate, c.input_gate, c.block_diagonal_input, c.recurrent_grad_clip};
  p.cell = SLstmParams::zeros(cell);
  const std::size_t hidden = c.mlp_dim(dim);
  p.norm_gain = Tensor({dim}, Scalar(1));
  p.norm_shift = Tensor({dim});
  if (c.conv_kernel > 0) {
    p.conv_kernel = Tensor({c.conv_kernel, dim});
    p.conv_bias = Tensor({dim});
  }
  p.gn_gain = Tensor({dim}, Scalar(1));
  p.gn_shift = Tensor({dim});
  p.w_up_value = Tensor({hidden, dim});
  p.w_up_gate = Tensor({hidden, dim});
  p.w_down = Tensor({dim, hidden});
  return p;
}

SLstmBlockParams SLstmBlockParams::init(std::size_t dim, const SLstmBlockConfig& c, Rng& rng) {
  SLstmBlockParams p = zeros(dim, c);
  p.cell = SLstmParams::init(p.cell.config, rng);
  if (c.conv_kernel > 0) fill_small(rng, p.conv_kernel, c.conv_kernel);
  fill_small(rng, p.w_up_value, dim);
  fill_small(rng, p.w_up_gate, dim);
  fill_small(rng, p.w_down, p.w_down.dim(1));
  return p;
}

void SLstmBlockParams::collect(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + "norm.gain", &norm_gain, false});
  out.push_back({prefix + "norm.shift", &norm_shift, false});
  if (config.conv_kernel > 0) {
    out.push_back({prefix + "conv.kernel", &conv_kernel});
    out.push_back({prefix + "conv.bias", &conv_bias, false});
  }
  const std::size_t first = out.size();
  cell.collect(out, prefix + "cell.");
  for (std::size_t k = first; k < out.size(); ++k) {
    if (out[k].name.find(".b_") != std::string::npos) out[k].weight_decay = false;
  }
  out.push_back({prefix + "group_norm.gain", &gn_gain, false});
  out.push_back({prefix + "group_norm.shift", &gn_shift, false});
  out.push_back({prefix + "mlp.up_value", &w_up_value});
  out.push_back({prefix + "mlp.up_gate", &w_up_gate});
  out.push_back({prefix + "mlp.down", &w_down});
}

MLstmBlockParams MLstmBlockParams::zeros(std::size_t dim, const MLstmBlockConfig& c) {
  MLstmBlockParams p;
  p.config = c;
  p.dim = dim;
  const std::size_t inner = p.inner_dim();
  if (dim == 0 || c.proj_factor == 0) throw ShapeError("mLSTM block: dimensions must be positive");
  if (c.qkv_block_size == 0 || inner % c.qkv_block_size != 0) {
    throw ShapeError("mLSTM block: inner width " + std::to_string(inner) + " not divisible by block size " +
                     std::to_string(c.qkv_block_size));
  }
  if (c.num_heads == 0 || inner % c.num_heads != 0) {
    throw ShapeError("mLSTM block: inner width " + std::to_string(inner) + " not divisible by " +
                     std::to_string(c.num_heads) + " heads");
  }
  if (c.conv_kernel == 0) throw ShapeError("mLSTM block: conv kernel must be at least 1");
  if (c.output_gate_activation != Activation::Sigmoid && c.output_gate_activation != Activation::Swish) {
    throw ConfigError("", "mLSTM block: output gate activation must be sigmoid or swish");
  }
  const std::size_t blocks = inner / c.qkv_block_size, bs = c.qkv_block_size;
  p.norm_gain = Tensor({dim}, Scalar(1));
  p.norm_shift = Tensor({dim});
  p.w_up_x = Tensor({inner, dim});
  p.w_up_z = Tensor({inner, dim});
  p.conv_kernel = Tensor({c.conv_kernel, inner});
  p.conv_bias = Tensor({inner});
  for (Tensor* w : {&p.w_q, &p.w_k, &p.w_v}) *w = Tensor({blocks, bs, bs});
  p.w_i = Tensor({c.num_heads, 3 * inner});
  p.w_f = Tensor({c.num_heads, 3 * inner});
  p.b_i = Tensor({c.num_heads});
  p.b_f = Tensor({c.num_heads});
  p.gn_gain = Tensor({inner}, Scalar(1));
  p.gn_shift = Tensor({inner});
  p.skip = Tensor({inner}, Scalar(1));
  p.w_down = Tensor({dim, inner});
  return p;
}

MLstmBlockParams MLstmBlockParams::init(std::size_t dim, const MLstmBlockConfig& c, Rng& rng) {
  MLstmBlockParams p = zeros(dim, c);
  const std::size_t inner = p.inner_dim(), heads = c.num_heads;
  fill_small(rng, p.w_up_x, dim);
  fill_small(rng, p.w_up_z, dim);
  fill_small(rng, p.conv_kernel, c.conv_kernel);
  for (Tensor* w : {&p.w_q, &p.w_k, &p.w_v}) fill_small(rng, *w, c.qkv_block_size);
  fill_small(rng, p.w_i, 3 * inner);
  fill_small(rng, p.w_f, 3 * inner);
  for (std::size_t a = 0; a < heads; ++a) {
    p.b_f[a] = heads == 1 ? Scalar(3) : Scalar(3.0 + 3.0 * double(a) / double(heads - 1));
  }
  rng.fill_normal(p.b_i, 0.0, 0.1);
  fill_small(rng, p.w_down, inner);
  return p;
}

void MLstmBlockParams::collect(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + "norm.gain", &norm_gain, false});
  out.push_back({prefix + "norm.shift", &norm_shift, false});
  out.push_back({prefix + "up_x", &w_up_x});
  out.push_back({prefix + "up_z", &w_up_z});
  out.push_back({prefix + "conv.kernel", &conv_kernel});
  out.push_back({prefix + "conv.bias", &conv_bias, false});
  out.push_back({prefix + "w_q", &w_q});
  out.push_back({prefix + "w_k", &w_k});
  out.push_back({prefix + "w_v", &w_v});
  out.push_back({prefix + "w_i", &w_i});
  out.push_back({prefix + "w_f", &w_f});
  out.push_back({prefix + "b_i", &b_i, false});
  out.push_back({prefix + "b_f", &b_f, false});
  out.push_back({prefix + "group_norm.gain", &gn_gain, false});
  out.push_back({prefix + "group_norm.shift", &gn_shift, false});
  out.push_back({prefix + "skip", &skip, false});
  out.push_back({prefix + "down", &w_down});
}

// ---------------------------------------------------------------------------------------------

SLstmBlockResult slstm_block_forward(const SLstmBlockParams& p, const Tensor& x) {
  check_block_input(x, p.dim, "sLSTM block");
  const SLstmBlockConfig& c = p.config;
  SLstmBlockResult out;
  SLstmBlockCache& k = out.cache;
  k.x = x;
  k.xn = group_norm(x, 1, p.norm_gain, p.norm_shift, kNormEps, &k.norm);
  if (c.conv_kernel > 0) {
    k.conv_pre = causal_conv1d(k.xn, p.conv_kernel, p.conv_bias);
    k.xc = swish_of(k.conv_pre);
  } else {
    k.xc = k.xn;
  }
  const SLstmParams& cell = p.cell;
  SLstmGateInputs gates{linear(k.xn, cell.w_z, cell.b_z), linear(k.xc, cell.w_i, cell.b_i),
                        linear(k.xc, cell.w_f, cell.b_f), linear(k.xn, cell.w_o, cell.b_o)};
  SLstmSequence seq = slstm_recurrence(cell, gates, SLstmState::zeros(p.dim));
  k.cell = std::move(seq.cache);
  k.g = group_norm(seq.h, c.num_heads, p.gn_gain, p.gn_shift, kNormEps, &k.gn);
  k.up_value = linear(k.g, p.w_up_value);
  k.up_gate = linear(k.g, p.w_up_gate);
  k.mixed = Tensor::zeros_like(k.up_value);
  for (std::size_t j = 0; j < k.mixed.size(); ++j) {
    k.mixed[j] = act::value(c.mlp_value_activation, k.up_value[j]) * act::value(c.mlp_gate_activation, k.up_gate[j]);
  }
  out.y = x + linear(k.mixed, p.w_down);
  return out;
}

Tensor slstm_block_backward(const SLstmBlockParams& p, const SLstmBlockCache& k, const Tensor& grad_y,
                            SLstmBlockParams& g) {
  const SLstmBlockConfig& c = p.config;
  if (k.x.rank() != 2 || k.x.dim(1) != p.dim || k.mixed.cols() != p.w_down.dim(1)) {
    throw CacheMismatchError("sLSTM block backward: cache does not match the parameters");
  }
  require_shape(grad_y, k.x.shape(), "sLSTM block upstream");
  Tensor grad_x = grad_y;

  Tensor d_mixed = Tensor::zeros_like(k.mixed);
  linear_backward_acc(k.mixed, p.w_down, grad_y, &d_mixed, &g.w_down, nullptr);
  Tensor d_value = Tensor::zeros_like(k.up_value), d_gate = Tensor::zeros_like(k.up_gate);
  for (std::size_t j = 0; j < d_mixed.size(); ++j) {
    const Scalar u = k.up_value[j], r = k.up_gate[j];
    d_value[j] = d_mixed[j] * act::derivative(c.mlp_value_activation, u) * act::value(c.mlp_gate_activation, r);
    d_gate[j] = d_mixed[j] * act::value(c.mlp_value_activation, u) * act::derivative(c.mlp_gate_activation, r);
  }
  Tensor d_g = Tensor::zeros_like(k.g);
  linear_backward_acc(k.g, p.w_up_value, d_value, &d_g, &g.w_up_value, nullptr);
  linear_backward_acc(k.g, p.w_up_gate, d_gate, &d_g, &g.w_up_gate, nullptr);
  Tensor d_h = Tensor::zeros_like(k.g);
  group_norm_backward_acc(k.gn, c.num_heads, p.gn_gain, d_g, &d_h, &g.gn_gain, &g.gn_shift);

  SLstmRecurrentGrads rg = slstm_recurrence_backward(p.cell, k.cell, d_h);
  g.cell.r_z += rg.r_z;
  g.cell.r_i += rg.r_i;
  g.cell.r_f += rg.r_f;
  g.cell.r_o += rg.r_o;
  Tensor d_xn = Tensor::zeros_like(k.xn);
  Tensor d_xc = Tensor::zeros_like(k.xc);
  linear_backward_acc(k.xn, p.cell.w_z, rg.preact.z, &d_xn, &g.cell.w_z, &g.cell.b_z);
  linear_backward_acc(k.xn, p.cell.w_o, rg.preact.o, &d_xn, &g.cell.w_o, &g.cell.b_o);
  linear_backward_acc(k.xc, p.cell.w_i, rg.preact.i, &d_xc, &g.cell.w_i, &g.cell.b_i);
  linear_backward_acc(k.xc, p.cell.w_f, rg.preact.f, &d_xc, &g.cell.w_f, &g.cell.b_f);
  if (c.conv_kernel > 0) {
    const Tensor d_conv = activation_backward(k.conv_pre, d_xc, Activation::Swish);
    causal_conv1d_backward_acc(k.xn, p.conv_kernel, d_conv, &d_xn, &g.conv_kernel, &g.conv_bias);
  } else {
    d_xn += d_xc;
  }
  group_norm_backward_acc(k.norm, 1, p.norm_gain, d_xn, &grad_x, &g.norm_gain, &g.norm_shift);
  return grad_x;
}

// ---------------------------------------------------------------------------------------------

MLstmBlockResult mlstm_block_forward(const MLstmBlockParams& p, const Tensor& x) {
  check_block_input(x, p.dim, "mLSTM block");
  const MLstmBlockConfig& c = p.config;
  const std::size_t steps = x.dim(0), inner = p.inner_dim();
  MLstmBlockResult out;
  MLstmBlockCache& k = out.cache;
  k.x = x;
  k.xn = group_norm(x, 1, p.norm_gain, p.norm_shift, kNormEps, &k.norm);
  k.xm = linear(k.xn, p.w_up_x);
  k.z = linear(k.xn, p.w_up_z);
  k.conv_pre = causal_conv1d(k.xm, p.conv_kernel, p.conv_bias);
  k.xc = swish_of(k.conv_pre);

  MLstmCoreInputs core{linear(k.xc, p.w_q), linear(k.xc, p.w_k), linear(k.xm, p.w_v), {}, {}};
  k.gate_input = Tensor({steps, 3 * inner});
  for (std::size_t t = 0; t < steps; ++t) {
    Scalar* row = k.gate_input.data() + t * 3 * inner;
    std::copy_n(core.q.data() + t * inner, inner, row);
    std::copy_n(core.k.data() + t * inner, inner, row + inner);
    std::copy_n(core.v.data() + t * inner, inner, row + 2 * inner);
  }
  core.i = linear(k.gate_input, p.w_i, p.b_i);
  core.f = linear(k.gate_input, p.w_f, p.b_f);
  MLstmParallelResult r = mlstm_core_parallel(core, c.num_heads, c.forget_gate);
  k.core = std::move(r.cache);
  k.h_tilde = std::move(r.h);

  k.hs = group_norm(k.h_tilde, c.num_heads, p.gn_gain, p.gn_shift, kNormEps, &k.gn);
  k.gated = Tensor::zeros_like(k.hs);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t j = 0; j < inner; ++j) {
      const std::size_t idx = t * inner + j;
      k.hs[idx] += p.skip[j] * k.xc[idx];
      k.gated[idx] = k.hs[idx] * act::value(c.output_gate_activation, k.z[idx]);
    }
  }
  out.y = x + linear(k.gated, p.w_down);
  return out;
}

Tensor mlstm_block_backward(const MLstmBlockParams& p, const MLstmBlockCache& k, const Tensor& grad_y,
                            MLstmBlockParams& g) {
  const MLstmBlockConfig& c = p.config;
  const std::size_t inner = p.inner_dim();
  if (k.x.rank() != 2 || k.x.dim(1) != p.dim || k.gated.cols() != inner) {
    throw CacheMismatchError("mLSTM block backward: cache does not match the parameters");
  }
  require_shape(grad_y, k.x.shape(), "mLSTM block upstream");
  const std::size_t steps = k.x.dim(0);
  Tensor grad_x = grad_y;

  Tensor d_gated = Tensor::zeros_like(k.gated);
  linear_backward_acc(k.gated, p.w_down, grad_y, &d_gated, &g.w_down, nullptr);
  Tensor d_hs = Tensor::zeros_like(k.hs), d_z = Tensor::zeros_like(k.z), d_xc = Tensor::zeros_like(k.xc);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t j = 0; j < inner; ++j) {
      const std::size_t idx = t * inner + j;
      const Scalar zg = act::value(c.output_gate_activation, k.z[idx]);
      d_hs[idx] = d_gated[idx] * zg;
      d_z[idx] = d_gated[idx] * k.hs[idx] * act::derivative(c.output_gate_activation, k.z[idx]);
      g.skip[j] += d_hs[idx] * k.xc[idx];
      d_xc[idx] = d_hs[idx] * p.skip[j];
    }
  }
  Tensor d_h = Tensor::zeros_like(k.h_tilde);
  group_norm_backward_acc(k.gn, c.num_heads, p.gn_gain, d_hs, &d_h, &g.gn_gain, &g.gn_shift);

  MLstmCoreInputs dc = mlstm_core_parallel_backward(k.core, d_h);
  Tensor d_gate_in = Tensor::zeros_like(k.gate_input);
  linear_backward_acc(k.gate_input, p.w_i, dc.i, &d_gate_in, &g.w_i, &g.b_i);
  linear_backward_acc(k.gate_input, p.w_f, dc.f, &d_gate_in, &g.w_f, &g.b_f);
  for (std::size_t t = 0; t < steps; ++t) {
    const Scalar* row = d_gate_in.data() + t * 3 * inner;
    for (std::size_t j = 0; j < inner; ++j) {
      dc.q[t * inner + j] += row[j];
      dc.k[t * inner + j] += row[inner + j];
      dc.v[t * inner + j] += row[2 * inner + j];
    }
  }
  Tensor d_xm = Tensor::zeros_like(k.xm);
  linear_backward_acc(k.xc, p.w_q, dc.q, &d_xc, &g.w_q, nullptr);
  linear_backward_acc(k.xc, p.w_k, dc.k, &d_xc, &g.w_k, nullptr);
  linear_backward_acc(k.xm, p.w_v, dc.v, &d_xm, &g.w_v, nullptr);
  const Tensor d_conv = activation_backward(k.conv_pre, d_xc, Activation::Swish);
  causal_conv1d_backward_acc(k.xm, p.conv_kernel, d_conv, &d_xm, &g.conv_kernel, &g.conv_bias);

  Tensor d_xn = Tensor::zeros_like(k.xn);
  linear_backward_acc(k.xn, p.w_up_x, d_xm, &d_xn, &g.w_up_x, nullptr);
  linear_backward_acc(k.xn, p.w_up_z, d_z, &d_xn, &g.w_up_z, nullptr);
  group_norm_backward_acc(k.norm, 1, p.norm_gain, d_xn, &grad_x, &g.norm_gain, &g.norm_shift);
  return grad_x;
}

}  // namespace xlstm
