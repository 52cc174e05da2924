// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include "xlstm/reference.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "xlstm/error.hpp"

namespace xlstm {

namespace {

Scalar gate_value(GateActivation g, Scalar pre) { return g == GateActivation::Exp ? std::exp(pre) : act::sigmoid(pre); }

}  // namespace

Tensor slstm_unstabilized_forward(const SLstmParams& p, const Tensor& x_seq) {
  const SLstmGateInputs in = slstm_project_inputs(p, x_seq);
  const std::size_t steps = x_seq.dim(0), d = p.config.hidden_dim, dh = p.config.head_dim();
  std::vector<Scalar> c(d, 0), n(d, 0), h(d, 0), pre(4 * d);
  Tensor out({steps, d});
  const Tensor* r[4] = {&p.r_z, &p.r_i, &p.r_f, &p.r_o};
  const Tensor* x[4] = {&in.z, &in.i, &in.f, &in.o};
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t g = 0; g < 4; ++g) {
      for (std::size_t j = 0; j < d; ++j) {
        const std::size_t head = j / dh, row = j % dh;
        Scalar acc = (*x[g])[t * d + j];
        for (std::size_t col = 0; col < dh; ++col) acc += (*r[g])(head, row, col) * h[head * dh + col];
        pre[g * d + j] = acc;
      }
    }
    for (std::size_t j = 0; j < d; ++j) {
      const Scalar z = std::tanh(pre[j]);
      const Scalar i = gate_value(p.config.input_gate, pre[d + j]);
      const Scalar f = gate_value(p.config.forget_gate, pre[2 * d + j]);
      const Scalar o = act::sigmoid(pre[3 * d + j]);
      c[j] = f * c[j] + i * z;
      n[j] = f * n[j] + i;
      h[j] = o * c[j] / n[j];
      out(t, j) = h[j];
    }
  }
  return out;
}

Tensor mlstm_core_unstabilized(const MLstmCoreInputs& in, std::size_t heads, GateActivation forget_gate,
                               Scalar threshold) {
  const std::size_t steps = in.steps(), d = in.q.dim(1), dh = d / heads;
  if (heads == 0 || d % heads != 0) throw ShapeError("mLSTM: width not divisible by head count");
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(dh));
  Tensor out({steps, d});
  for (std::size_t a = 0; a < heads; ++a) {
    std::vector<Scalar> c(dh * dh, 0), n(dh, 0);
    for (std::size_t t = 0; t < steps; ++t) {
      const Scalar i = std::exp(in.i(t, a));
      const Scalar f = gate_value(forget_gate, in.f(t, a));
      const Scalar* q = in.q.data() + t * d + a * dh;
      const Scalar* k = in.k.data() + t * d + a * dh;
      const Scalar* v = in.v.data() + t * d + a * dh;
      Scalar dot = 0;
      for (std::size_t r = 0; r < dh; ++r) {
        n[r] = f * n[r] + i * k[r] * scale;
        dot += n[r] * q[r];
        for (std::size_t col = 0; col < dh; ++col) c[r * dh + col] = f * c[r * dh + col] + i * v[r] * k[col] * scale;
      }
      const Scalar denom = std::max(std::abs(dot), threshold);
      for (std::size_t r = 0; r < dh; ++r) {
        Scalar acc = 0;
        for (std::size_t col = 0; col < dh; ++col) acc += c[r * dh + col] * q[col];
        out(t, a * dh + r) = acc / denom;
      }
    }
  }
  return out;
}

Tensor mlstm_unstabilized_forward(const MLstmParams& p, const Tensor& x_seq, Scalar threshold) {
  Tensor h = mlstm_core_unstabilized(mlstm_project_inputs(p, x_seq), p.config.num_heads, p.config.forget_gate,
                                     threshold);
  if (p.config.output_gate) {
    const Tensor o = linear(x_seq, p.w_o, p.b_o);
    for (std::size_t j = 0; j < h.size(); ++j) h[j] *= act::sigmoid(o[j]);
  }
  return h;
}

}  // namespace xlstm
