// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include "xlstm/mlstm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "eigen_util.hpp"
#include "xlstm/error.hpp"

namespace xlstm {

using detail::ConstStridedMap;
using detail::RowMatrix;
using detail::StridedMap;

namespace {

void check_core_inputs(const MLstmCoreInputs& in, std::size_t heads) {
  if (in.q.rank() != 2 || in.q.dim(0) == 0) throw ShapeError("mLSTM: sequence must have at least one step");
  const std::size_t steps = in.q.dim(0), d = in.q.dim(1);
  if (heads == 0 || d % heads != 0) {
    throw ShapeError("mLSTM: width " + std::to_string(d) + " not divisible by " + std::to_string(heads) + " heads");
  }
  require_shape(in.k, {steps, d}, "mLSTM keys");
  require_shape(in.v, {steps, d}, "mLSTM values");
  require_shape(in.i, {steps, heads}, "mLSTM input gate pre-activations");
  require_shape(in.f, {steps, heads}, "mLSTM forget gate pre-activations");
}

std::vector<Scalar> column(const Tensor& t, std::size_t col) {
  std::vector<Scalar> out(t.rows());
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = t[r * t.cols() + col];
  return out;
}

void check_finite(const Tensor& t, const char* stage) {
  const std::size_t bad = t.first_non_finite();
  if (bad != t.size()) throw NonFiniteError(stage, t.rank() >= 2 ? bad / t.cols() : bad);
}

MLstmCoreInputs zero_core_grads(const MLstmCoreInputs& in) {
  return {Tensor::zeros_like(in.q), Tensor::zeros_like(in.k), Tensor::zeros_like(in.v), Tensor::zeros_like(in.i),
          Tensor::zeros_like(in.f)};
}

}  // namespace

GateMatrices mlstm_gate_matrices(std::span<const Scalar> i_pre, std::span<const Scalar> f_pre,
                                 GateActivation forget_gate) {
  const std::size_t steps = i_pre.size();
  if (f_pre.size() != steps || steps == 0) throw ShapeError("mLSTM gate matrices: gate lengths differ or are empty");
  GateMatrices g{Tensor({steps, steps}, kNegativeSentinel), Tensor({steps, steps}, kNegativeSentinel),
                 Tensor({steps}), Tensor({steps, steps})};
  for (std::size_t i = 0; i < steps; ++i) {
    const Scalar log_f = log_gate(forget_gate, f_pre[i]);
    for (std::size_t j = 0; j < i; ++j) g.log_f(i, j) = g.log_f(i - 1, j) + log_f;
    g.log_f(i, i) = 0;
    Scalar row_max = kNegativeSentinel;
    for (std::size_t j = 0; j <= i; ++j) {
      g.d_tilde(i, j) = g.log_f(i, j) + i_pre[j];
      row_max = std::max(row_max, g.d_tilde(i, j));
    }
    g.m[i] = row_max;
    for (std::size_t j = 0; j <= i; ++j) g.d_prime(i, j) = std::exp(g.d_tilde(i, j) - row_max);
  }
  return g;
}

MLstmParallelResult mlstm_core_parallel(const MLstmCoreInputs& in, std::size_t heads, GateActivation forget_gate) {
  check_core_inputs(in, heads);
  const std::size_t steps = in.q.dim(0), d = in.q.dim(1), dh = d / heads;
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(dh));
  MLstmParallelResult out;
  out.h = Tensor({steps, d});
  out.cache.inputs = in;
  out.cache.num_heads = heads;
  out.cache.forget_gate = forget_gate;
  out.cache.heads.resize(heads);
  const Eigen::OuterStride<> stride(d);
  for (std::size_t a = 0; a < heads; ++a) {
    MLstmParallelHeadCache& hc = out.cache.heads[a];
    const std::vector<Scalar> ig = column(in.i, a), fg = column(in.f, a);
    hc.gates = mlstm_gate_matrices(ig, fg, forget_gate);
    ConstStridedMap q(in.q.data() + a * dh, steps, dh, stride);
    ConstStridedMap k(in.k.data() + a * dh, steps, dh, stride);
    ConstStridedMap v(in.v.data() + a * dh, steps, dh, stride);
    hc.scores = Tensor({steps, steps});
    auto s = detail::as_matrix(hc.scores);
    s.noalias() = (q * k.transpose()) * scale;
    hc.c_tilde = Tensor({steps, steps});
    hc.b = Tensor({steps});
    hc.n = Tensor({steps});
    hc.c = Tensor({steps, steps});
    for (std::size_t i = 0; i < steps; ++i) {
      Scalar row_sum = 0;
      for (std::size_t j = 0; j <= i; ++j) {
        const Scalar ct = hc.scores(i, j) * hc.gates.d_prime(i, j);
        hc.c_tilde(i, j) = ct;
        row_sum += ct;
      }
      hc.b[i] = row_sum;
      hc.n[i] = std::max(std::abs(row_sum), std::exp(-hc.gates.m[i]));
      for (std::size_t j = 0; j <= i; ++j) hc.c(i, j) = hc.c_tilde(i, j) / hc.n[i];
    }
    check_finite(hc.n, "parallel normalizer n");
    StridedMap h(out.h.data() + a * dh, steps, dh, stride);
    h.noalias() = detail::as_matrix(hc.c) * v;
  }
  check_finite(out.h, "parallel hidden output");
  return out;
}

MLstmCoreInputs mlstm_core_parallel_backward(const MLstmParallelCache& cache, const Tensor& grad_h) {
  const MLstmCoreInputs& in = cache.inputs;
  const std::size_t heads = cache.num_heads;
  if (cache.heads.size() != heads || heads == 0 || in.steps() == 0) {
    throw CacheMismatchError("mLSTM parallel backward: cache is incomplete");
  }
  const std::size_t steps = in.q.dim(0), d = in.q.dim(1), dh = d / heads;
  require_shape(grad_h, {steps, d}, "mLSTM parallel backward upstream");
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(dh));
  const Eigen::OuterStride<> stride(d);
  MLstmCoreInputs g = zero_core_grads(in);
  Tensor d_c({steps, steps}), d_ct({steps, steps}), d_s({steps, steps});
  std::vector<Scalar> d_dt(steps * steps);
  for (std::size_t a = 0; a < heads; ++a) {
    const MLstmParallelHeadCache& hc = cache.heads[a];
    if (hc.c.size() != steps * steps) throw CacheMismatchError("mLSTM parallel backward: head cache has wrong size");
    ConstStridedMap q(in.q.data() + a * dh, steps, dh, stride);
    ConstStridedMap k(in.k.data() + a * dh, steps, dh, stride);
    ConstStridedMap v(in.v.data() + a * dh, steps, dh, stride);
    ConstStridedMap gh(grad_h.data() + a * dh, steps, dh, stride);
    detail::as_matrix(d_c).noalias() = gh * v.transpose();
    StridedMap gv(g.v.data() + a * dh, steps, dh, stride);
    gv.noalias() = detail::as_matrix(hc.c).transpose() * gh;

    d_ct.set_zero();
    d_s.set_zero();
    std::fill(d_dt.begin(), d_dt.end(), Scalar(0));
    for (std::size_t i = 0; i < steps; ++i) {
      const Scalar n = hc.n[i];
      Scalar d_n = 0;
      for (std::size_t j = 0; j <= i; ++j) d_n -= d_c(i, j) * hc.c_tilde(i, j);
      d_n /= n * n;
      const Scalar b = hc.b[i];
      const bool active = std::abs(b) > std::exp(-hc.gates.m[i]);
      const Scalar d_b = active ? (b > 0 ? d_n : -d_n) : Scalar(0);
      for (std::size_t j = 0; j <= i; ++j) {
        const Scalar dct = d_c(i, j) / n + d_b;
        const Scalar dp = hc.gates.d_prime(i, j);
        d_ct(i, j) = dct;
        d_s(i, j) = dct * dp;
        d_dt[i * steps + j] = dct * hc.scores(i, j) * dp;
      }
    }
    StridedMap gq(g.q.data() + a * dh, steps, dh, stride);
    StridedMap gk(g.k.data() + a * dh, steps, dh, stride);
    gq.noalias() = (detail::as_matrix(d_s) * k) * scale;
    gk.noalias() = (detail::as_matrix(d_s).transpose() * q) * scale;

    std::vector<Scalar> d_logf(steps, 0);
    for (std::size_t i = 0; i < steps; ++i) {
      Scalar prefix = 0;
      for (std::size_t kk = 1; kk <= i; ++kk) {
        prefix += d_dt[i * steps + kk - 1];
        d_logf[kk] += prefix;
      }
      for (std::size_t j = 0; j <= i; ++j) g.i[j * heads + a] += d_dt[i * steps + j];
    }
    for (std::size_t t = 0; t < steps; ++t) {
      g.f[t * heads + a] = d_logf[t] * log_gate_grad(cache.forget_gate, in.f[t * heads + a]);
    }
  }
  return g;
}

MLstmHeadState MLstmHeadState::zeros(std::size_t head_dim) {
  return {Tensor({head_dim, head_dim}), Tensor({head_dim}), Scalar(0)};
}

MLstmState MLstmState::zeros(std::size_t num_heads, std::size_t head_dim) {
  MLstmState s;
  s.heads.assign(num_heads, MLstmHeadState::zeros(head_dim));
  return s;
}

MLstmRecurrentResult mlstm_core_recurrent(const MLstmCoreInputs& in, std::size_t heads, GateActivation forget_gate,
                                          const MLstmState& state0) {
  check_core_inputs(in, heads);
  const std::size_t steps = in.q.dim(0), d = in.q.dim(1), dh = d / heads, dh2 = dh * dh;
  if (state0.heads.size() != heads) throw ShapeError("mLSTM: initial state has the wrong number of heads");
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(dh));

  MLstmRecurrentResult out;
  MLstmRecurrentCache& k = out.cache;
  k.inputs = in;
  k.num_heads = heads;
  k.forget_gate = forget_gate;
  k.c = Tensor({steps + 1, heads, dh, dh});
  k.n = Tensor({steps + 1, heads, dh});
  k.m = Tensor({steps + 1, heads});
  for (Tensor* t : {&k.i_stab, &k.f_stab, &k.dot, &k.denom}) *t = Tensor({steps, heads});
  k.h = Tensor({steps, d});
  for (std::size_t a = 0; a < heads; ++a) {
    const MLstmHeadState& s = state0.heads[a];
    require_shape(s.c, {dh, dh}, "mLSTM initial C");
    require_shape(s.n, {dh}, "mLSTM initial n");
    std::copy_n(s.c.data(), dh2, k.c.data() + a * dh2);
    std::copy_n(s.n.data(), dh, k.n.data() + a * dh);
    k.m[a] = s.m;
  }

  std::vector<Scalar> kh(dh);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t a = 0; a < heads; ++a) {
      const Scalar m_prev = k.m[t * heads + a];
      const Scalar log_f = log_gate(forget_gate, in.f[t * heads + a]);
      const Scalar log_i = in.i[t * heads + a];
      const Scalar m_new = std::max(log_f + m_prev, log_i);
      const Scalar i_s = std::exp(log_i - m_new);
      const Scalar f_s = std::exp(log_f + m_prev - m_new);
      const Scalar* q = in.q.data() + t * d + a * dh;
      const Scalar* kv = in.k.data() + t * d + a * dh;
      const Scalar* v = in.v.data() + t * d + a * dh;
      for (std::size_t c = 0; c < dh; ++c) kh[c] = kv[c] * scale;
      const Scalar* c_prev = k.c.data() + (t * heads + a) * dh2;
      const Scalar* n_prev = k.n.data() + (t * heads + a) * dh;
      Scalar* c_mat = k.c.data() + ((t + 1) * heads + a) * dh2;
      Scalar* n_vec = k.n.data() + ((t + 1) * heads + a) * dh;
      Scalar dot = 0;
      for (std::size_t r = 0; r < dh; ++r) {
        n_vec[r] = f_s * n_prev[r] + i_s * kh[r];
        dot += n_vec[r] * q[r];
        for (std::size_t c = 0; c < dh; ++c) c_mat[r * dh + c] = f_s * c_prev[r * dh + c] + i_s * v[r] * kh[c];
      }
      const Scalar denom = std::max(std::abs(dot), std::exp(-m_new));
      Scalar* h = k.h.data() + t * d + a * dh;
      for (std::size_t r = 0; r < dh; ++r) {
        Scalar acc = 0;
        for (std::size_t c = 0; c < dh; ++c) acc += c_mat[r * dh + c] * q[c];
        h[r] = acc / denom;
      }
      k.m[(t + 1) * heads + a] = m_new;
      k.i_stab[t * heads + a] = i_s;
      k.f_stab[t * heads + a] = f_s;
      k.dot[t * heads + a] = dot;
      k.denom[t * heads + a] = denom;
      if (!std::isfinite(m_new)) throw NonFiniteError("recurrent stabilizer m", t);
      if (!std::isfinite(denom)) throw NonFiniteError("recurrent normalizer n", t);
      for (std::size_t r = 0; r < dh; ++r) {
        if (!std::isfinite(h[r])) throw NonFiniteError("recurrent hidden output", t);
      }
    }
  }
  out.h = k.h;
  out.final_state = MLstmState::zeros(heads, dh);
  for (std::size_t a = 0; a < heads; ++a) {
    MLstmHeadState& s = out.final_state.heads[a];
    std::copy_n(k.c.data() + (steps * heads + a) * dh2, dh2, s.c.data());
    std::copy_n(k.n.data() + (steps * heads + a) * dh, dh, s.n.data());
    s.m = k.m[steps * heads + a];
  }
  return out;
}

MLstmCoreInputs mlstm_core_recurrent_backward(const MLstmRecurrentCache& k, const Tensor& grad_h) {
  const MLstmCoreInputs& in = k.inputs;
  const std::size_t heads = k.num_heads, steps = in.steps();
  if (heads == 0 || steps == 0 || k.c.rank() != 4 || k.c.dim(0) != steps + 1 || k.c.dim(1) != heads) {
    throw CacheMismatchError("mLSTM recurrent backward: cache is incomplete");
  }
  const std::size_t d = in.q.dim(1), dh = d / heads, dh2 = dh * dh;
  require_shape(grad_h, {steps, d}, "mLSTM recurrent backward upstream");
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(dh));
  MLstmCoreInputs g = zero_core_grads(in);

  std::vector<Scalar> d_c(dh2), d_n(dh), kh(dh), dcq(dh), dck(dh);
  for (std::size_t a = 0; a < heads; ++a) {
    std::fill(d_c.begin(), d_c.end(), Scalar(0));
    std::fill(d_n.begin(), d_n.end(), Scalar(0));
    for (std::size_t t = steps; t-- > 0;) {
      const std::size_t ga = t * heads + a;
      const Scalar* q = in.q.data() + t * d + a * dh;
      const Scalar* kv = in.k.data() + t * d + a * dh;
      const Scalar* v = in.v.data() + t * d + a * dh;
      const Scalar* gh = grad_h.data() + t * d + a * dh;
      const Scalar* h = k.h.data() + t * d + a * dh;
      const Scalar* c_mat = k.c.data() + ((t + 1) * heads + a) * dh2;
      const Scalar* c_prev = k.c.data() + (t * heads + a) * dh2;
      const Scalar* n_vec = k.n.data() + ((t + 1) * heads + a) * dh;
      const Scalar* n_prev = k.n.data() + (t * heads + a) * dh;
      Scalar* gq = g.q.data() + t * d + a * dh;
      Scalar* gk = g.k.data() + t * d + a * dh;
      Scalar* gv = g.v.data() + t * d + a * dh;
      for (std::size_t c = 0; c < dh; ++c) kh[c] = kv[c] * scale;

      const Scalar denom = k.denom[ga], dot = k.dot[ga];
      Scalar d_denom = 0;
      for (std::size_t r = 0; r < dh; ++r) d_denom -= gh[r] * h[r];
      d_denom /= denom;
      for (std::size_t r = 0; r < dh; ++r) {
        const Scalar gr = gh[r] / denom;
        for (std::size_t c = 0; c < dh; ++c) {
          d_c[r * dh + c] += gr * q[c];
          gq[c] += c_mat[r * dh + c] * gr;
        }
      }
      if (std::abs(dot) > std::exp(-k.m[(t + 1) * heads + a])) {
        const Scalar d_dot = dot > 0 ? d_denom : -d_denom;
        for (std::size_t r = 0; r < dh; ++r) {
          d_n[r] += d_dot * q[r];
          gq[r] += d_dot * n_vec[r];
        }
      }

      const Scalar i_s = k.i_stab[ga], f_s = k.f_stab[ga];
      Scalar d_is = 0, d_fs = 0;
      for (std::size_t r = 0; r < dh; ++r) {
        Scalar row_k = 0;
        for (std::size_t c = 0; c < dh; ++c) {
          row_k += d_c[r * dh + c] * kh[c];
          d_fs += d_c[r * dh + c] * c_prev[r * dh + c];
        }
        dck[r] = row_k;
        d_is += v[r] * row_k + d_n[r] * kh[r];
        d_fs += d_n[r] * n_prev[r];
      }
      std::fill(dcq.begin(), dcq.end(), Scalar(0));
      for (std::size_t r = 0; r < dh; ++r) {
        for (std::size_t c = 0; c < dh; ++c) dcq[c] += d_c[r * dh + c] * v[r];
      }
      for (std::size_t r = 0; r < dh; ++r) {
        gv[r] += i_s * dck[r];
        gk[r] += i_s * (dcq[r] + d_n[r]) * scale;
      }
      g.i[ga] = d_is * i_s;
      g.f[ga] = d_fs * f_s * log_gate_grad(k.forget_gate, in.f[ga]);
      for (Scalar& x : d_c) x *= f_s;
      for (Scalar& x : d_n) x *= f_s;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------------------------

void MLstmConfig::validate() const {
  if (input_dim == 0 || hidden_dim == 0) throw ShapeError("mLSTM: dimensions must be positive");
  if (num_heads == 0 || hidden_dim % num_heads != 0) {
    throw ShapeError("mLSTM: hidden_dim " + std::to_string(hidden_dim) + " not divisible by " +
                     std::to_string(num_heads) + " heads");
  }
}

MLstmParams MLstmParams::zeros(const MLstmConfig& config) {
  config.validate();
  MLstmParams p;
  p.config = config;
  const std::size_t d = config.hidden_dim, din = config.input_dim, heads = config.num_heads;
  for (Tensor* w : {&p.w_q, &p.w_k, &p.w_v}) *w = Tensor({d, din});
  for (Tensor* b : {&p.b_q, &p.b_k, &p.b_v}) *b = Tensor({d});
  p.w_i = Tensor({heads, din});
  p.w_f = Tensor({heads, din});
  p.b_i = Tensor({heads});
  p.b_f = Tensor({heads});
  if (config.output_gate) {
    p.w_o = Tensor({d, din});
    p.b_o = Tensor({d});
  }
  return p;
}

MLstmParams MLstmParams::init(const MLstmConfig& config, Rng& rng) {
  MLstmParams p = zeros(config);
  const double std = std::sqrt(0.4 / double(config.input_dim));
  for (Tensor* w : {&p.w_q, &p.w_k, &p.w_v, &p.w_i, &p.w_f}) rng.fill_truncated_normal(*w, 0.0, std, 2.0);
  if (config.output_gate) rng.fill_truncated_normal(p.w_o, 0.0, std, 2.0);
  const std::size_t heads = config.num_heads;
  for (std::size_t a = 0; a < heads; ++a) {
    p.b_f[a] = heads == 1 ? Scalar(3) : Scalar(3.0 + 3.0 * double(a) / double(heads - 1));
  }
  rng.fill_normal(p.b_i, 0.0, 0.1);
  return p;
}

void MLstmParams::collect(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + "w_q", &w_q});
  out.push_back({prefix + "w_k", &w_k});
  out.push_back({prefix + "w_v", &w_v});
  out.push_back({prefix + "b_q", &b_q});
  out.push_back({prefix + "b_k", &b_k});
  out.push_back({prefix + "b_v", &b_v});
  out.push_back({prefix + "w_i", &w_i});
  out.push_back({prefix + "w_f", &w_f});
  out.push_back({prefix + "b_i", &b_i});
  out.push_back({prefix + "b_f", &b_f});
  if (config.output_gate) {
    out.push_back({prefix + "w_o", &w_o});
    out.push_back({prefix + "b_o", &b_o});
  }
}

MLstmCoreInputs mlstm_project_inputs(const MLstmParams& p, const Tensor& x_seq) {
  if (x_seq.rank() != 2 || x_seq.dim(1) != p.config.input_dim || x_seq.dim(0) == 0) {
    throw ShapeError("mLSTM: input " + shape_string(x_seq.shape()) + " does not match input_dim " +
                     std::to_string(p.config.input_dim));
  }
  return {linear(x_seq, p.w_q, p.b_q), linear(x_seq, p.w_k, p.b_k), linear(x_seq, p.w_v, p.b_v),
          linear(x_seq, p.w_i, p.b_i), linear(x_seq, p.w_f, p.b_f)};
}

namespace {

Tensor apply_output_gate(const MLstmParams& p, MLstmCache& cache) {
  if (!p.config.output_gate) return cache.h_tilde;
  cache.o_pre = linear(cache.x, p.w_o, p.b_o);
  Tensor h = cache.h_tilde;
  for (std::size_t j = 0; j < h.size(); ++j) h[j] *= act::sigmoid(cache.o_pre[j]);
  return h;
}

MLstmGrads cell_backward(const MLstmParams& p, const MLstmCache& cache, const Tensor& grad_h) {
  if (cache.x.rank() != 2 || cache.x.dim(1) != p.config.input_dim ||
      cache.h_tilde.shape() != Shape{cache.x.dim(0), p.config.hidden_dim}) {
    throw CacheMismatchError("mLSTM backward: cache does not match the parameters");
  }
  require_shape(grad_h, cache.h_tilde.shape(), "mLSTM backward upstream");
  MLstmGrads g{zeros_like_params(p), Tensor::zeros_like(cache.x)};
  Tensor grad_ht = grad_h;
  if (p.config.output_gate) {
    Tensor grad_o(grad_h.shape());
    for (std::size_t j = 0; j < grad_h.size(); ++j) {
      const Scalar o = act::sigmoid(cache.o_pre[j]);
      grad_ht[j] = grad_h[j] * o;
      grad_o[j] = grad_h[j] * cache.h_tilde[j] * o * (Scalar(1) - o);
    }
    linear_backward_acc(cache.x, p.w_o, grad_o, &g.input, &g.params.w_o, &g.params.b_o);
  }
  const MLstmCoreInputs gi = cache.parallel ? mlstm_core_parallel_backward(cache.par, grad_ht)
                                            : mlstm_core_recurrent_backward(cache.rec, grad_ht);
  linear_backward_acc(cache.x, p.w_q, gi.q, &g.input, &g.params.w_q, &g.params.b_q);
  linear_backward_acc(cache.x, p.w_k, gi.k, &g.input, &g.params.w_k, &g.params.b_k);
  linear_backward_acc(cache.x, p.w_v, gi.v, &g.input, &g.params.w_v, &g.params.b_v);
  linear_backward_acc(cache.x, p.w_i, gi.i, &g.input, &g.params.w_i, &g.params.b_i);
  linear_backward_acc(cache.x, p.w_f, gi.f, &g.input, &g.params.w_f, &g.params.b_f);
  return g;
}

}  // namespace

MLstmSequence mlstm_parallel_forward(const MLstmParams& p, const Tensor& x_seq) {
  MLstmSequence out;
  out.cache.x = x_seq;
  MLstmParallelResult r = mlstm_core_parallel(mlstm_project_inputs(p, x_seq), p.config.num_heads,
                                              p.config.forget_gate);
  out.cache.h_tilde = std::move(r.h);
  out.cache.par = std::move(r.cache);
  out.cache.parallel = true;
  out.h = apply_output_gate(p, out.cache);
  return out;
}

MLstmSequence mlstm_recurrent_forward(const MLstmParams& p, const Tensor& x_seq) {
  MLstmSequence out;
  out.cache.x = x_seq;
  MLstmRecurrentResult r = mlstm_core_recurrent(mlstm_project_inputs(p, x_seq), p.config.num_heads,
                                                p.config.forget_gate,
                                                MLstmState::zeros(p.config.num_heads, p.config.head_dim()));
  out.cache.h_tilde = std::move(r.h);
  out.cache.rec = std::move(r.cache);
  out.cache.parallel = false;
  out.h = apply_output_gate(p, out.cache);
  return out;
}

MLstmStepResult mlstm_step(const MLstmParams& p, const MLstmState& state, const Tensor& x) {
  if (x.rank() != 1) throw ShapeError("mlstm_step: expected a single input vector");
  MLstmCache cache;
  cache.x = x.reshaped({1, x.size()});
  MLstmRecurrentResult r =
      mlstm_core_recurrent(mlstm_project_inputs(p, cache.x), p.config.num_heads, p.config.forget_gate, state);
  cache.h_tilde = std::move(r.h);
  Tensor h = apply_output_gate(p, cache);
  return {std::move(r.final_state), h.reshaped({p.config.hidden_dim})};
}

MLstmGrads mlstm_parallel_backward(const MLstmParams& p, const MLstmCache& cache, const Tensor& grad_h) {
  if (!cache.parallel) throw CacheMismatchError("mLSTM parallel backward: cache comes from the recurrent form");
  return cell_backward(p, cache, grad_h);
}

MLstmGrads mlstm_recurrent_backward(const MLstmParams& p, const MLstmCache& cache, const Tensor& grad_h) {
  if (cache.parallel) throw CacheMismatchError("mLSTM recurrent backward: cache comes from the parallel form");
  return cell_backward(p, cache, grad_h);
}

}  // namespace xlstm
