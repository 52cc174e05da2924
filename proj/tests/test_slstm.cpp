// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "test_util.hpp"
#include "xlstm/error.hpp"
#include "xlstm/params.hpp"
#include "xlstm/reference.hpp"
#include "xlstm/slstm.hpp"

namespace xlstm {
namespace {

using test::max_rel_error;
using test::numeric_gradient;
using test::random_tensor;
using test::weighted_sum;
using LD = long double;

/// Entry (r, c) of a dense [out x in] or block-diagonal [H x out/H x in/H] weight.
LD weight_at(const Tensor& w, std::size_t r, std::size_t c) {
  if (w.rank() == 2) return w(r, c);
  const std::size_t ob = w.dim(1), ib = w.dim(2);
  return r / ob == c / ib ? LD(w(r / ob, r % ob, c % ib)) : 0.0L;
}

LD sigmoid_ld(LD x) { return 1.0L / (1.0L + std::exp(-x)); }

struct OracleTrace {
  std::vector<std::vector<LD>> h, c, n;  // per step
};

/// Unstabilized recurrence evaluated directly in long double.
OracleTrace slstm_oracle(const SLstmParams& p, const Tensor& x) {
  const SLstmConfig& cfg = p.config;
  const std::size_t d = cfg.hidden_dim, din = cfg.input_dim;
  std::vector<LD> h(d, 0), c(d, 0), n(d, 0);
  OracleTrace out;
  for (std::size_t t = 0; t < x.dim(0); ++t) {
    std::vector<LD> hn(d), cn(d), nn(d);
    for (std::size_t r = 0; r < d; ++r) {
      LD pre[4] = {p.b_z[r], p.b_i[r], p.b_f[r], p.b_o[r]};
      const Tensor* w[4] = {&p.w_z, &p.w_i, &p.w_f, &p.w_o};
      const Tensor* rr[4] = {&p.r_z, &p.r_i, &p.r_f, &p.r_o};
      for (int g = 0; g < 4; ++g) {
        for (std::size_t k = 0; k < din; ++k) pre[g] += weight_at(*w[g], r, k) * LD(x(t, k));
        for (std::size_t k = 0; k < d; ++k) pre[g] += weight_at(*rr[g], r, k) * h[k];
      }
      const LD z = std::tanh(pre[0]);
      const LD i = cfg.input_gate == GateActivation::Exp ? std::exp(pre[1]) : sigmoid_ld(pre[1]);
      const LD f = cfg.forget_gate == GateActivation::Exp ? std::exp(pre[2]) : sigmoid_ld(pre[2]);
      const LD o = sigmoid_ld(pre[3]);
      cn[r] = f * c[r] + i * z;
      nn[r] = f * n[r] + i;
      hn[r] = o * cn[r] / nn[r];
    }
    h = hn;
    c = cn;
    n = nn;
    out.h.push_back(h);
    out.c.push_back(c);
    out.n.push_back(n);
  }
  return out;
}

SLstmParams random_params(const SLstmConfig& cfg, Rng& rng, double scale = 0.5) {
  SLstmParams p = SLstmParams::zeros(cfg);
  for (const ParamRef& r : param_list(p)) rng.fill_uniform(*r.tensor, -scale, scale);
  return p;
}

SLstmConfig small_config(std::size_t din, std::size_t d, std::size_t heads, GateActivation forget) {
  SLstmConfig c;
  c.input_dim = din;
  c.hidden_dim = d;
  c.num_heads = heads;
  c.forget_gate = forget;
  return c;
}

TEST(SLstmStep, ZeroParamsGiveZeroHidden) {
  const SLstmParams p = SLstmParams::zeros(small_config(3, 4, 2, GateActivation::Sigmoid));
  const SLstmStep s = slstm_step(p, SLstmState::zeros(4), Tensor::vector({1, -2, 3}));
  for (std::size_t r = 0; r < 4; ++r) {
    EXPECT_EQ(s.state.c[r], 0);
    EXPECT_EQ(s.state.n[r], 1);
    EXPECT_EQ(s.state.m[r], 0);
    EXPECT_EQ(s.state.h[r], 0);
  }
}

TEST(SLstmStep, StabilizerArithmetic) {
  SLstmConfig cfg = small_config(1, 1, 1, GateActivation::Exp);
  SLstmParams p = SLstmParams::zeros(cfg);
  p.b_f[0] = 2;
  p.b_i[0] = 1;
  const SLstmStep s = slstm_step(p, SLstmState::zeros(1), Tensor::vector({0}));
  EXPECT_DOUBLE_EQ(s.state.m[0], 2.0);
  EXPECT_NEAR(s.cache.i_stab[0], 0.36787944117144233, 1e-15);
  EXPECT_DOUBLE_EQ(s.cache.f_stab[0], 1.0);
}

TEST(SLstmForward, TwoStepsMatchOracle) {
  for (GateActivation forget : {GateActivation::Sigmoid, GateActivation::Exp}) {
    Rng rng(11);
    const SLstmParams p = random_params(small_config(3, 4, 2, forget), rng);
    const Tensor x = random_tensor({2, 3}, rng);
    const SLstmSequence s = slstm_forward(p, x);
    const OracleTrace o = slstm_oracle(p, x);
    for (std::size_t t = 0; t < 2; ++t)
      for (std::size_t r = 0; r < 4; ++r) EXPECT_NEAR(s.h(t, r), double(o.h[t][r]), 1e-10 * std::abs(double(o.h[t][r])) + 1e-15);
  }
}

TEST(SLstmForward, StabilizedMatchesUnstabilizedOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const GateActivation forget = seed % 2 ? GateActivation::Exp : GateActivation::Sigmoid;
    SLstmConfig cfg = small_config(6, 8, 2, forget);
    cfg.block_diagonal_input = seed % 3 == 0;
    const SLstmParams p = random_params(cfg, rng);
    const Tensor x = random_tensor({12, 6}, rng);
    const SLstmSequence s = slstm_forward(p, x);
    const OracleTrace o = slstm_oracle(p, x);
    Tensor expect(s.h.shape());
    for (std::size_t t = 0; t < 12; ++t)
      for (std::size_t r = 0; r < 8; ++r) expect(t, r) = Scalar(o.h[t][r]);
    EXPECT_LT(max_rel_error(s.h, expect), 1e-10) << "seed " << seed;
    EXPECT_LT(max_rel_error(slstm_unstabilized_forward(p, x), expect), 1e-10) << "seed " << seed;
  }
}

TEST(SLstmForward, SingleStepEqualsStep) {
  Rng rng(12);
  const SLstmParams p = random_params(small_config(3, 4, 2, GateActivation::Exp), rng);
  const Tensor x = random_tensor({1, 3}, rng);
  const SLstmSequence seq = slstm_forward(p, x);
  const SLstmStep st = slstm_step(p, SLstmState::zeros(4), Tensor::vector({x[0], x[1], x[2]}));
  for (std::size_t r = 0; r < 4; ++r) {
    EXPECT_EQ(seq.h[r], st.state.h[r]);
    EXPECT_EQ(seq.final_state.c[r], st.state.c[r]);
    EXPECT_EQ(seq.final_state.m[r], st.state.m[r]);
  }
}

TEST(SLstmForward, StepsChainLikeTheSequence) {
  Rng rng(13);
  const SLstmParams p = random_params(small_config(2, 4, 2, GateActivation::Sigmoid), rng);
  const Tensor x = random_tensor({6, 2}, rng);
  const SLstmSequence seq = slstm_forward(p, x);
  SLstmState s = SLstmState::zeros(4);
  for (std::size_t t = 0; t < 6; ++t) {
    s = slstm_step(p, s, Tensor::vector({x(t, 0), x(t, 1)})).state;
    for (std::size_t r = 0; r < 4; ++r) EXPECT_NEAR(seq.h(t, r), s.h[r], 1e-15);
  }
}

TEST(SLstmForward, HeadsDoNotMix) {
  Rng rng(14);
  SLstmConfig cfg = small_config(4, 4, 2, GateActivation::Sigmoid);
  cfg.block_diagonal_input = true;
  SLstmParams p = random_params(cfg, rng);
  // Zero biases for head 2 so its cell input is driven only by its own (zero) input.
  for (Tensor* b : {&p.b_z, &p.b_i, &p.b_f, &p.b_o}) (*b)[2] = (*b)[3] = 0;
  Tensor x = random_tensor({7, 4}, rng);
  for (std::size_t t = 0; t < 7; ++t) x(t, 2) = x(t, 3) = 0;
  const SLstmSequence s = slstm_forward(p, x);
  for (std::size_t t = 0; t < 7; ++t) {
    EXPECT_EQ(s.h(t, 2), 0);
    EXPECT_EQ(s.h(t, 3), 0);
    EXPECT_NE(s.h(t, 0), 0);
  }
}

TEST(SLstmForward, SaturatedForgetAccumulatesNormalizer) {
  SLstmConfig cfg = small_config(1, 1, 1, GateActivation::Sigmoid);
  SLstmParams p = SLstmParams::zeros(cfg);
  p.b_f[0] = 6;
  p.b_i[0] = 0.3;
  p.b_z[0] = 0.5;
  const Tensor x({5, 1});
  const SLstmSequence s = slstm_forward(p, x);
  const double f = 1.0 / (1.0 + std::exp(-6.0)), i = std::exp(0.3), z = std::tanh(0.5);
  for (std::size_t t = 1; t <= 5; ++t) {
    // n_t = i * (1 + f + ... + f^{t-1})
    const double n = i * (1 - std::pow(f, double(t))) / (1 - f);
    EXPECT_NEAR(s.cache.n[t] * std::exp(s.cache.m[t]), n, 1e-12 * n);
    EXPECT_NEAR(s.h(t - 1, 0), 0.5 * z, 1e-12);
    EXPECT_LE(std::abs(s.h(t - 1, 0)), 1.0);
  }
}

TEST(SLstmForward, NormalizerIsDiscountedInputSum) {
  Rng rng(15);
  const SLstmParams p = random_params(small_config(3, 4, 2, GateActivation::Exp), rng);
  const Tensor x = random_tensor({8, 3}, rng);
  const SLstmSequence s = slstm_forward(p, x);
  const Tensor& ip = s.cache.i_pre;
  const Tensor& fp = s.cache.f_pre;
  for (std::size_t t = 0; t < 8; ++t) {
    for (std::size_t r = 0; r < 4; ++r) {
      LD n = 0;
      for (std::size_t u = 0; u <= t; ++u) {
        LD term = std::exp(LD(ip(u, r)));
        for (std::size_t v = u + 1; v <= t; ++v) term *= std::exp(LD(fp(v, r)));
        n += term;
      }
      const double stabilized = s.cache.n(t + 1, r) * std::exp(s.cache.m(t + 1, r));
      EXPECT_NEAR(stabilized, double(n), 1e-12 * double(n));
    }
  }
}

TEST(SLstmForward, SigmoidInputGateIsNormalizedLstm) {
  Rng rng(16);
  SLstmConfig cfg = small_config(3, 4, 1, GateActivation::Sigmoid);
  cfg.input_gate = GateActivation::Sigmoid;
  const SLstmParams p = random_params(cfg, rng);
  const Tensor x = random_tensor({6, 3}, rng);
  const SLstmSequence s = slstm_forward(p, x);
  const OracleTrace o = slstm_oracle(p, x);
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t r = 0; r < 4; ++r) EXPECT_NEAR(s.h(t, r), double(o.h[t][r]), 1e-13);
}

TEST(SLstmForward, NonFiniteStateIsReported) {
  SLstmConfig cfg = small_config(1, 1, 1, GateActivation::Exp);
  SLstmParams p = SLstmParams::zeros(cfg);
  p.w_z(0, 0) = 1;
  Tensor x({3, 1});
  x(2, 0) = std::numeric_limits<Scalar>::quiet_NaN();
  try {
    slstm_forward(p, x);
    FAIL() << "expected NonFiniteError";
  } catch (const NonFiniteError& e) {
    EXPECT_EQ(e.timestep(), 2u);
  }
}

TEST(SLstmForward, RejectsBadShapes) {
  const SLstmParams p = SLstmParams::zeros(small_config(3, 4, 2, GateActivation::Exp));
  EXPECT_THROW(slstm_forward(p, Tensor({5, 2})), ShapeError);
  SLstmConfig bad = small_config(3, 5, 2, GateActivation::Exp);
  EXPECT_THROW(SLstmParams::zeros(bad), ShapeError);
}

TEST(SLstmInit, ForgetBiasEquidistant) {
  Rng rng(1);
  const SLstmParams p = SLstmParams::init(small_config(4, 8, 2, GateActivation::Sigmoid), rng);
  EXPECT_DOUBLE_EQ(p.b_f[0], 3.0);
  EXPECT_DOUBLE_EQ(p.b_f[7], 6.0);
  for (std::size_t r = 1; r < 8; ++r) EXPECT_NEAR(p.b_f[r] - p.b_f[r - 1], 3.0 / 7.0, 1e-14);
}

TEST(SLstmBackward, ZeroUpstreamGivesZeroGradients) {
  Rng rng(17);
  const SLstmParams p = random_params(small_config(3, 4, 2, GateActivation::Exp), rng);
  const Tensor x = random_tensor({5, 3}, rng);
  const SLstmSequence s = slstm_forward(p, x);
  SLstmGrads g = slstm_backward(p, s.cache, Tensor({5, 4}));
  EXPECT_EQ(g.input.max_abs(), 0);
  for (const ParamRef& r : param_list(g.params)) EXPECT_EQ(r.tensor->max_abs(), 0) << r.name;
}

TEST(SLstmBackward, ClampLimitsEachComponent) {
  std::vector<Scalar> g = {25, -30, 3, -10, 10.5};
  clip_recurrent_gradient(g, 10);
  EXPECT_EQ(g, (std::vector<Scalar>{10, -10, 3, -10, 10}));
  std::vector<Scalar> off = {25, -30};
  clip_recurrent_gradient(off, 0);
  EXPECT_EQ(off, (std::vector<Scalar>{25, -30}));
}

TEST(SLstmBackward, ClippingChangesOnlyLargeRecurrentGradients) {
  Rng rng(18);
  SLstmConfig cfg = small_config(2, 4, 2, GateActivation::Sigmoid);
  cfg.recurrent_grad_clip = 0;
  SLstmParams p = random_params(cfg, rng, 1.5);
  const Tensor x = random_tensor({6, 2}, rng);
  const Tensor probe = random_tensor({6, 4}, rng, -50, 50);
  const SLstmGrads free = slstm_backward(p, slstm_forward(p, x).cache, probe);
  p.config.recurrent_grad_clip = 1e6;
  const SLstmGrads loose = slstm_backward(p, slstm_forward(p, x).cache, probe);
  EXPECT_EQ(free.input, loose.input);
  p.config.recurrent_grad_clip = 1e-3;
  const SLstmGrads tight = slstm_backward(p, slstm_forward(p, x).cache, probe);
  EXPECT_GT(max_rel_error(free.input, tight.input), 1e-3);
  // The last step receives no recurrent gradient, so its input gradient is unaffected.
  for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(free.input(5, k), tight.input(5, k), 1e-14);
}

TEST(SLstmBackward, MatchesFiniteDifferencesOverSeeds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(100 + seed);
    SLstmConfig cfg = small_config(4, 4, 2, seed % 2 ? GateActivation::Exp : GateActivation::Sigmoid);
    cfg.recurrent_grad_clip = 0;
    cfg.block_diagonal_input = seed % 4 == 3;
    SLstmParams p = random_params(cfg, rng);
    Tensor x = random_tensor({8, 4}, rng);
    const Tensor probe = random_tensor({8, 4}, rng);
    auto loss = [&] { return weighted_sum(slstm_forward(p, x).h, probe); };
    SLstmGrads g = slstm_backward(p, slstm_forward(p, x).cache, probe);
    EXPECT_LT(max_rel_error(g.input, numeric_gradient(x, loss), 1e-6), 1e-5) << "seed " << seed;
    ParamList pl = param_list(p), gl = param_list(g.params);
    for (std::size_t k = 0; k < pl.size(); ++k) {
      EXPECT_LT(max_rel_error(*gl[k].tensor, numeric_gradient(*pl[k].tensor, loss), 1e-4), 1e-5)
          << gl[k].name << " seed " << seed;
    }
  }
}

TEST(SLstmBackward, InputBiasShiftIsInvisibleFromZeroState) {
  // Adding a constant to every input-gate pre-activation scales c and n alike, so h is unchanged.
  Rng rng(21);
  SLstmConfig cfg = small_config(3, 4, 2, GateActivation::Exp);
  cfg.recurrent_grad_clip = 0;
  SLstmParams p = random_params(cfg, rng);
  const Tensor x = random_tensor({6, 3}, rng);
  const Tensor h0 = slstm_forward(p, x).h;
  const Tensor probe = random_tensor({6, 4}, rng);
  const SLstmGrads g = slstm_backward(p, slstm_forward(p, x).cache, probe);
  EXPECT_LT(g.params.b_i.max_abs(), 1e-12);
  for (std::size_t r = 0; r < 4; ++r) p.b_i[r] += Scalar(0.7);
  EXPECT_LT(max_rel_error(slstm_forward(p, x).h, h0), 1e-13);
}

TEST(VanillaLstm, ZeroParamsGiveZeroHidden) {
  const VanillaLstmParams p = VanillaLstmParams::zeros(2, 3);
  const LstmState s = lstm_step(p, LstmState::zeros(3), Tensor::vector({1, 2}));
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_EQ(s.c[r], 0);
    EXPECT_EQ(s.h[r], 0);
  }
}

TEST(VanillaLstm, SaturatedGates) {
  VanillaLstmParams p = VanillaLstmParams::zeros(1, 1);
  p.b_i[0] = 20;
  p.b_f[0] = -20;
  p.b_z[0] = std::atanh(0.9);
  const LstmState s = lstm_step(p, LstmState::zeros(1), Tensor::vector({0}));
  EXPECT_NEAR(s.c[0], 0.9, 1e-8);
  EXPECT_NEAR(s.h[0], 0.5 * std::tanh(0.9), 1e-8);
}

TEST(VanillaLstm, HiddenIsBounded) {
  Rng rng(19);
  VanillaLstmParams p = VanillaLstmParams::init(3, 5, rng);
  for (const ParamRef& r : param_list(p)) *r.tensor *= Scalar(20);
  const Tensor h = lstm_forward(p, random_tensor({30, 3}, rng, -10, 10), LstmState::zeros(5));
  EXPECT_LE(h.max_abs(), 1.0);
}

TEST(VanillaLstm, MatchesDirectEvaluation) {
  Rng rng(20);
  VanillaLstmParams p = VanillaLstmParams::init(2, 3, rng);
  const Tensor x = random_tensor({4, 2}, rng);
  const Tensor h = lstm_forward(p, x, LstmState::zeros(3));
  std::vector<LD> hp(3, 0), c(3, 0);
  for (std::size_t t = 0; t < 4; ++t) {
    std::vector<LD> hn(3);
    for (std::size_t r = 0; r < 3; ++r) {
      LD pre[4] = {p.b_z[r], p.b_i[r], p.b_f[r], p.b_o[r]};
      const Tensor* w[4] = {&p.w_z, &p.w_i, &p.w_f, &p.w_o};
      const Tensor* rr[4] = {&p.r_z, &p.r_i, &p.r_f, &p.r_o};
      for (int g = 0; g < 4; ++g) {
        for (std::size_t k = 0; k < 2; ++k) pre[g] += LD((*w[g])(r, k)) * LD(x(t, k));
        for (std::size_t k = 0; k < 3; ++k) pre[g] += LD((*rr[g])(r, k)) * hp[k];
      }
      c[r] = sigmoid_ld(pre[2]) * c[r] + sigmoid_ld(pre[1]) * std::tanh(pre[0]);
      hn[r] = sigmoid_ld(pre[3]) * std::tanh(c[r]);
      EXPECT_NEAR(h(t, r), double(hn[r]), 1e-14);
    }
    hp = hn;
  }
}

}  // namespace
}  // namespace xlstm
