// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include "xlstm/slstm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "xlstm/error.hpp"

namespace xlstm {

std::string_view to_string(GateActivation g) { return g == GateActivation::Exp ? "exp" : "sigmoid"; }

GateActivation gate_activation_from_string(std::string_view name) {
  if (name == "exp") return GateActivation::Exp;
  if (name == "sigmoid") return GateActivation::Sigmoid;
  throw ConfigError("", "unknown gate activation '" + std::string(name) + "' (expected sigmoid or exp)");
}

void SLstmConfig::validate() const {
  if (input_dim == 0 || hidden_dim == 0) throw ShapeError("sLSTM: dimensions must be positive");
  if (num_heads == 0 || hidden_dim % num_heads != 0) {
    throw ShapeError("sLSTM: hidden_dim " + std::to_string(hidden_dim) + " not divisible by " +
                     std::to_string(num_heads) + " heads");
  }
  if (block_diagonal_input && input_dim % num_heads != 0) {
    throw ShapeError("sLSTM: block-diagonal input weights need input_dim divisible by the head count");
  }
}

namespace {

Tensor input_weight_shape(const SLstmConfig& c) {
  if (c.block_diagonal_input) return Tensor({c.num_heads, c.head_dim(), c.input_dim / c.num_heads});
  return Tensor({c.hidden_dim, c.input_dim});
}

}  // namespace

SLstmParams SLstmParams::zeros(const SLstmConfig& config) {
  config.validate();
  SLstmParams p;
  p.config = config;
  const std::size_t d = config.hidden_dim, heads = config.num_heads, dh = config.head_dim();
  for (Tensor* w : {&p.w_z, &p.w_i, &p.w_f, &p.w_o}) *w = input_weight_shape(config);
  for (Tensor* r : {&p.r_z, &p.r_i, &p.r_f, &p.r_o}) *r = Tensor({heads, dh, dh});
  for (Tensor* b : {&p.b_z, &p.b_i, &p.b_f, &p.b_o}) *b = Tensor({d});
  return p;
}

SLstmParams SLstmParams::init(const SLstmConfig& config, Rng& rng) {
  SLstmParams p = zeros(config);
  const std::size_t d = config.hidden_dim;
  const double in_fan = config.block_diagonal_input ? double(config.input_dim / config.num_heads) : double(config.input_dim);
  const double in_std = std::sqrt(0.4 / in_fan);
  const double rec_std = std::sqrt(0.4 / double(config.head_dim()));
  for (Tensor* w : {&p.w_z, &p.w_i, &p.w_f, &p.w_o}) rng.fill_truncated_normal(*w, 0.0, in_std, 2.0);
  for (Tensor* r : {&p.r_z, &p.r_i, &p.r_f, &p.r_o}) rng.fill_truncated_normal(*r, 0.0, rec_std, 2.0);
  for (std::size_t c = 0; c < d; ++c) {
    p.b_f[c] = d == 1 ? Scalar(3) : Scalar(3.0 + 3.0 * double(c) / double(d - 1));
  }
  rng.fill_normal(p.b_i, 0.0, 0.1);
  return p;
}

void SLstmParams::collect(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + "w_z", &w_z});
  out.push_back({prefix + "w_i", &w_i});
  out.push_back({prefix + "w_f", &w_f});
  out.push_back({prefix + "w_o", &w_o});
  out.push_back({prefix + "r_z", &r_z});
  out.push_back({prefix + "r_i", &r_i});
  out.push_back({prefix + "r_f", &r_f});
  out.push_back({prefix + "r_o", &r_o});
  out.push_back({prefix + "b_z", &b_z});
  out.push_back({prefix + "b_i", &b_i});
  out.push_back({prefix + "b_f", &b_f});
  out.push_back({prefix + "b_o", &b_o});
}

SLstmState SLstmState::zeros(std::size_t hidden_dim) {
  return {Tensor({hidden_dim}), Tensor({hidden_dim}), Tensor({hidden_dim}), Tensor({hidden_dim})};
}

void clip_recurrent_gradient(std::span<Scalar> grad, Scalar limit) {
  if (limit <= 0) return;
  for (Scalar& g : grad) g = std::clamp(g, -limit, limit);
}

namespace {

/// out += R h for a block-diagonal R stored [H x dh x dh].
void block_matvec_acc(const Tensor& r, const Scalar* h, Scalar* out) {
  const std::size_t heads = r.dim(0), dh = r.dim(1);
  for (std::size_t a = 0; a < heads; ++a) {
    const Scalar* ra = r.data() + a * dh * dh;
    const Scalar* ha = h + a * dh;
    Scalar* oa = out + a * dh;
    for (std::size_t i = 0; i < dh; ++i) {
      Scalar acc = 0;
      const Scalar* row = ra + i * dh;
      for (std::size_t j = 0; j < dh; ++j) acc += row[j] * ha[j];
      oa[i] += acc;
    }
  }
}

/// out += R^T g for a block-diagonal R.
void block_matvec_t_acc(const Tensor& r, const Scalar* g, Scalar* out) {
  const std::size_t heads = r.dim(0), dh = r.dim(1);
  for (std::size_t a = 0; a < heads; ++a) {
    const Scalar* ra = r.data() + a * dh * dh;
    const Scalar* ga = g + a * dh;
    Scalar* oa = out + a * dh;
    for (std::size_t i = 0; i < dh; ++i) {
      const Scalar gi = ga[i];
      const Scalar* row = ra + i * dh;
      for (std::size_t j = 0; j < dh; ++j) oa[j] += row[j] * gi;
    }
  }
}

/// grad_r += g h^T restricted to the diagonal blocks.
void block_outer_acc(Tensor& grad_r, const Scalar* g, const Scalar* h) {
  const std::size_t heads = grad_r.dim(0), dh = grad_r.dim(1);
  for (std::size_t a = 0; a < heads; ++a) {
    Scalar* ra = grad_r.data() + a * dh * dh;
    const Scalar* ga = g + a * dh;
    const Scalar* ha = h + a * dh;
    for (std::size_t i = 0; i < dh; ++i) {
      Scalar* row = ra + i * dh;
      const Scalar gi = ga[i];
      for (std::size_t j = 0; j < dh; ++j) row[j] += gi * ha[j];
    }
  }
}

void check_gate_inputs(const SLstmParams& p, const SLstmGateInputs& in) {
  if (in.z.rank() != 2 || in.z.dim(0) == 0) throw ShapeError("sLSTM: sequence must have at least one step");
  const Shape expected{in.z.dim(0), p.config.hidden_dim};
  require_shape(in.z, expected, "sLSTM z input");
  require_shape(in.i, expected, "sLSTM i input");
  require_shape(in.f, expected, "sLSTM f input");
  require_shape(in.o, expected, "sLSTM o input");
}

void check_finite_row(const Tensor& t, std::size_t row, const char* component, std::size_t step) {
  const Scalar* r = t.data() + row * t.cols();
  for (std::size_t c = 0; c < t.cols(); ++c) {
    if (!std::isfinite(r[c])) throw NonFiniteError(component, step);
  }
}

}  // namespace

SLstmGateInputs slstm_project_inputs(const SLstmParams& p, const Tensor& x_seq) {
  if (x_seq.rank() != 2 || x_seq.dim(1) != p.config.input_dim) {
    throw ShapeError("sLSTM: input " + shape_string(x_seq.shape()) + " does not match input_dim " +
                     std::to_string(p.config.input_dim));
  }
  return {linear(x_seq, p.w_z, p.b_z), linear(x_seq, p.w_i, p.b_i), linear(x_seq, p.w_f, p.b_f),
          linear(x_seq, p.w_o, p.b_o)};
}

SLstmSequence slstm_recurrence(const SLstmParams& p, const SLstmGateInputs& in, const SLstmState& s0) {
  check_gate_inputs(p, in);
  const std::size_t steps = in.z.dim(0), d = p.config.hidden_dim;
  for (const Tensor* s : {&s0.c, &s0.n, &s0.m, &s0.h}) require_shape(*s, {d}, "sLSTM initial state");

  SLstmSequence out;
  SLstmCache& k = out.cache;
  k.z_pre = in.z;
  k.i_pre = in.i;
  k.f_pre = in.f;
  k.o_pre = in.o;
  for (Tensor* t : {&k.z, &k.i_stab, &k.f_stab, &k.o}) *t = Tensor({steps, d});
  for (Tensor* t : {&k.c, &k.n, &k.m, &k.h}) *t = Tensor({steps + 1, d});
  std::copy_n(s0.c.data(), d, k.c.data());
  std::copy_n(s0.n.data(), d, k.n.data());
  std::copy_n(s0.m.data(), d, k.m.data());
  std::copy_n(s0.h.data(), d, k.h.data());

  const GateActivation fg = p.config.forget_gate, ig = p.config.input_gate;
  for (std::size_t t = 0; t < steps; ++t) {
    const Scalar* h_prev = k.h.data() + t * d;
    Scalar* zp = k.z_pre.data() + t * d;
    Scalar* ip = k.i_pre.data() + t * d;
    Scalar* fp = k.f_pre.data() + t * d;
    Scalar* op = k.o_pre.data() + t * d;
    block_matvec_acc(p.r_z, h_prev, zp);
    block_matvec_acc(p.r_i, h_prev, ip);
    block_matvec_acc(p.r_f, h_prev, fp);
    block_matvec_acc(p.r_o, h_prev, op);

    const Scalar* c_prev = k.c.data() + t * d;
    const Scalar* n_prev = k.n.data() + t * d;
    const Scalar* m_prev = k.m.data() + t * d;
    Scalar* c = k.c.data() + (t + 1) * d;
    Scalar* n = k.n.data() + (t + 1) * d;
    Scalar* m = k.m.data() + (t + 1) * d;
    Scalar* h = k.h.data() + (t + 1) * d;
    for (std::size_t j = 0; j < d; ++j) {
      const Scalar log_f = log_gate(fg, fp[j]);
      const Scalar log_i = log_gate(ig, ip[j]);
      const Scalar m_new = std::max(log_f + m_prev[j], log_i);
      const Scalar i_s = std::exp(log_i - m_new);
      const Scalar f_s = std::exp(log_f + m_prev[j] - m_new);
      const Scalar z = std::tanh(zp[j]);
      const Scalar o = act::sigmoid(op[j]);
      c[j] = f_s * c_prev[j] + i_s * z;
      n[j] = f_s * n_prev[j] + i_s;
      m[j] = m_new;
      h[j] = o * (c[j] / n[j]);
      k.z[t * d + j] = z;
      k.i_stab[t * d + j] = i_s;
      k.f_stab[t * d + j] = f_s;
      k.o[t * d + j] = o;
    }
    check_finite_row(k.c, t + 1, "cell state c", t);
    check_finite_row(k.n, t + 1, "normalizer state n", t);
    check_finite_row(k.m, t + 1, "stabilizer state m", t);
    check_finite_row(k.h, t + 1, "hidden state h", t);
  }

  out.h = Tensor({steps, d});
  std::copy_n(k.h.data() + d, steps * d, out.h.data());
  out.final_state = SLstmState::zeros(d);
  std::copy_n(k.c.data() + steps * d, d, out.final_state.c.data());
  std::copy_n(k.n.data() + steps * d, d, out.final_state.n.data());
  std::copy_n(k.m.data() + steps * d, d, out.final_state.m.data());
  std::copy_n(k.h.data() + steps * d, d, out.final_state.h.data());
  return out;
}

SLstmSequence slstm_forward(const SLstmParams& p, const Tensor& x_seq, const SLstmState& s0) {
  SLstmSequence seq = slstm_recurrence(p, slstm_project_inputs(p, x_seq), s0);
  seq.cache.x = x_seq;
  return seq;
}

SLstmSequence slstm_forward(const SLstmParams& p, const Tensor& x_seq) {
  return slstm_forward(p, x_seq, SLstmState::zeros(p.config.hidden_dim));
}

SLstmStep slstm_step(const SLstmParams& p, const SLstmState& state, const Tensor& x) {
  if (x.rank() != 1) throw ShapeError("slstm_step: expected a single input vector");
  SLstmSequence seq = slstm_forward(p, x.reshaped({1, x.size()}), state);
  return {std::move(seq.final_state), std::move(seq.cache)};
}

SLstmRecurrentGrads slstm_recurrence_backward(const SLstmParams& p, const SLstmCache& k, const Tensor& grad_h) {
  const std::size_t steps = k.steps(), d = p.config.hidden_dim;
  if (steps == 0 || k.c.dim(0) != steps + 1 || k.z_pre.dim(1) != d) {
    throw CacheMismatchError("sLSTM backward: cache does not match the parameters");
  }
  if (p.r_z.dim(0) * p.r_z.dim(1) != d) throw CacheMismatchError("sLSTM backward: recurrent weights do not match cache");
  require_shape(grad_h, {steps, d}, "sLSTM backward upstream");

  SLstmRecurrentGrads g;
  for (Tensor* t : {&g.preact.z, &g.preact.i, &g.preact.f, &g.preact.o}) *t = Tensor({steps, d});
  for (Tensor* t : {&g.r_z, &g.r_i, &g.r_f, &g.r_o}) *t = Tensor::zeros_like(p.r_z);

  const GateActivation fg = p.config.forget_gate, ig = p.config.input_gate;
  std::vector<Scalar> dc(d, 0), dn(d, 0), dh_rec(d, 0), dh(d);
  for (std::size_t step = steps; step-- > 0;) {
    const std::size_t row = step * d;
    const Scalar* c = k.c.data() + (step + 1) * d;
    const Scalar* n = k.n.data() + (step + 1) * d;
    const Scalar* c_prev = k.c.data() + step * d;
    const Scalar* n_prev = k.n.data() + step * d;
    clip_recurrent_gradient(dh_rec, p.config.recurrent_grad_clip);
    for (std::size_t j = 0; j < d; ++j) {
      dh[j] = grad_h[row + j] + dh_rec[j];
      const Scalar o = k.o[row + j];
      const Scalar inv_n = Scalar(1) / n[j];
      const Scalar h_tilde = c[j] * inv_n;
      dc[j] += o * inv_n * dh[j];
      dn[j] -= o * h_tilde * inv_n * dh[j];
      const Scalar i_s = k.i_stab[row + j], f_s = k.f_stab[row + j], z = k.z[row + j];
      g.preact.o[row + j] = dh[j] * h_tilde * o * (Scalar(1) - o);
      g.preact.z[row + j] = dc[j] * i_s * (Scalar(1) - z * z);
      g.preact.i[row + j] = (dc[j] * z + dn[j]) * i_s * log_gate_grad(ig, k.i_pre[row + j]);
      g.preact.f[row + j] = (dc[j] * c_prev[j] + dn[j] * n_prev[j]) * f_s * log_gate_grad(fg, k.f_pre[row + j]);
      dc[j] *= f_s;
      dn[j] *= f_s;
    }
    const Scalar* h_prev = k.h.data() + step * d;
    std::fill(dh_rec.begin(), dh_rec.end(), Scalar(0));
    const std::array<std::pair<const Tensor*, Tensor*>, 4> gates{{{&p.r_z, &g.preact.z},
                                                                   {&p.r_i, &g.preact.i},
                                                                   {&p.r_f, &g.preact.f},
                                                                   {&p.r_o, &g.preact.o}}};
    const std::array<Tensor*, 4> grad_r{&g.r_z, &g.r_i, &g.r_f, &g.r_o};
    for (std::size_t q = 0; q < 4; ++q) {
      const Scalar* dpre = gates[q].second->data() + row;
      block_matvec_t_acc(*gates[q].first, dpre, dh_rec.data());
      block_outer_acc(*grad_r[q], dpre, h_prev);
    }
  }
  return g;
}

SLstmGrads slstm_backward(const SLstmParams& p, const SLstmCache& k, const Tensor& grad_h) {
  if (k.x.empty() || k.x.dim(0) != k.steps() || k.x.dim(1) != p.config.input_dim) {
    throw CacheMismatchError("sLSTM backward: cache has no matching input sequence");
  }
  SLstmRecurrentGrads rg = slstm_recurrence_backward(p, k, grad_h);
  SLstmGrads g{zeros_like_params(p), Tensor::zeros_like(k.x)};
  g.params.r_z = std::move(rg.r_z);
  g.params.r_i = std::move(rg.r_i);
  g.params.r_f = std::move(rg.r_f);
  g.params.r_o = std::move(rg.r_o);
  linear_backward_acc(k.x, p.w_z, rg.preact.z, &g.input, &g.params.w_z, &g.params.b_z);
  linear_backward_acc(k.x, p.w_i, rg.preact.i, &g.input, &g.params.w_i, &g.params.b_i);
  linear_backward_acc(k.x, p.w_f, rg.preact.f, &g.input, &g.params.w_f, &g.params.b_f);
  linear_backward_acc(k.x, p.w_o, rg.preact.o, &g.input, &g.params.w_o, &g.params.b_o);
  return g;
}

}  // namespace xlstm
