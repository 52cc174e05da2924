// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "xlstm/error.hpp"
#include "xlstm/slstm.hpp"

namespace xlstm {

VanillaLstmParams VanillaLstmParams::zeros(std::size_t input_dim, std::size_t hidden_dim) {
  if (input_dim == 0 || hidden_dim == 0) throw ShapeError("LSTM: dimensions must be positive");
  VanillaLstmParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  for (Tensor* w : {&p.w_z, &p.w_i, &p.w_f, &p.w_o}) *w = Tensor({hidden_dim, input_dim});
  for (Tensor* r : {&p.r_z, &p.r_i, &p.r_f, &p.r_o}) *r = Tensor({hidden_dim, hidden_dim});
  for (Tensor* b : {&p.b_z, &p.b_i, &p.b_f, &p.b_o}) *b = Tensor({hidden_dim});
  return p;
}

VanillaLstmParams VanillaLstmParams::init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
  VanillaLstmParams p = zeros(input_dim, hidden_dim);
  for (Tensor* w : {&p.w_z, &p.w_i, &p.w_f, &p.w_o}) {
    rng.fill_truncated_normal(*w, 0.0, std::sqrt(0.4 / double(input_dim)), 2.0);
  }
  for (Tensor* r : {&p.r_z, &p.r_i, &p.r_f, &p.r_o}) {
    rng.fill_truncated_normal(*r, 0.0, std::sqrt(0.4 / double(hidden_dim)), 2.0);
  }
  return p;
}

void VanillaLstmParams::collect(ParamList& out, const std::string& prefix) {
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

LstmState LstmState::zeros(std::size_t hidden_dim) { return {Tensor({hidden_dim}), Tensor({hidden_dim})}; }

LstmState lstm_step(const VanillaLstmParams& p, const LstmState& s, const Tensor& x) {
  const std::size_t d = p.hidden_dim;
  require_shape(x, {p.input_dim}, "LSTM input");
  require_shape(s.c, {d}, "LSTM cell state");
  require_shape(s.h, {d}, "LSTM hidden state");
  Tensor z = linear(x, p.w_z, p.b_z) + linear(s.h, p.r_z);
  Tensor i = linear(x, p.w_i, p.b_i) + linear(s.h, p.r_i);
  Tensor f = linear(x, p.w_f, p.b_f) + linear(s.h, p.r_f);
  Tensor o = linear(x, p.w_o, p.b_o) + linear(s.h, p.r_o);
  LstmState out = LstmState::zeros(d);
  for (std::size_t j = 0; j < d; ++j) {
    out.c[j] = act::sigmoid(f[j]) * s.c[j] + act::sigmoid(i[j]) * std::tanh(z[j]);
    out.h[j] = act::sigmoid(o[j]) * std::tanh(out.c[j]);
    if (!std::isfinite(out.c[j]) || !std::isfinite(out.h[j])) throw NonFiniteError("LSTM state", 0);
  }
  return out;
}

Tensor lstm_forward(const VanillaLstmParams& p, const Tensor& x_seq, const LstmState& state0) {
  if (x_seq.rank() != 2 || x_seq.dim(1) != p.input_dim || x_seq.dim(0) == 0) {
    throw ShapeError("LSTM: input " + shape_string(x_seq.shape()) + " does not match input_dim");
  }
  const std::size_t steps = x_seq.dim(0), d = p.hidden_dim;
  Tensor h({steps, d});
  LstmState s = state0;
  for (std::size_t t = 0; t < steps; ++t) {
    Tensor x({p.input_dim});
    std::copy_n(x_seq.data() + t * p.input_dim, p.input_dim, x.data());
    try {
      s = lstm_step(p, s, x);
    } catch (const NonFiniteError& e) {
      throw NonFiniteError(e.component(), t);
    }
    std::copy_n(s.h.data(), d, h.data() + t * d);
  }
  return h;
}

}  // namespace xlstm
