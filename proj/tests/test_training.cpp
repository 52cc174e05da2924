// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "test_util.hpp"
#include "xlstm/error.hpp"
#include "xlstm/model.hpp"
#include "xlstm/trainer.hpp"
#include "xlstm/training.hpp"

namespace xlstm {
namespace {

using test::max_rel_error;
using test::numeric_gradient;
using test::random_tensor;

struct Scalars {
  Tensor p = Tensor::vector({1.0});
  bool decay = true;
  void collect(ParamList& out, const std::string& prefix) { out.push_back({prefix + "p", &p, decay}); }
};

TEST(AdamW, ZeroGradientZeroDecayLeavesParams) {
  Scalars p, g;
  g.p = Tensor::vector({0.0});
  OptimizerState s = OptimizerState::for_params(param_list(p));
  AdamWConfig c;
  c.weight_decay = 0;
  for (int i = 0; i < 3; ++i) adamw_step(param_list(p), param_list(g), s, 0.1, c);
  EXPECT_EQ(p.p[0], 1.0);
  EXPECT_EQ(s.step, 3u);
}

TEST(AdamW, FirstStepByHand) {
  Scalars p, g;
  g.p = Tensor::vector({1.0});
  OptimizerState s = OptimizerState::for_params(param_list(p));
  adamw_step(param_list(p), param_list(g), s, 0.1);
  // m_hat = v_hat = 1 after bias correction.
  const double expect = 1.0 - 0.1 * (1.0 / (1.0 + 1e-5)) - 0.1 * 0.1 * 1.0;
  EXPECT_NEAR(p.p[0], expect, 1e-15);
  EXPECT_NEAR(s.m[0][0], 0.1, 1e-15);
  EXPECT_NEAR(s.v[0][0], 0.05, 1e-15);
}

TEST(AdamW, ExcludedParamsGetPureAdamStep) {
  Scalars a, b, g;
  b.decay = false;
  g.p = Tensor::vector({0.3});
  OptimizerState sa = OptimizerState::for_params(param_list(a)), sb = OptimizerState::for_params(param_list(b));
  adamw_step(param_list(a), param_list(g), sa, 0.1);
  adamw_step(param_list(b), param_list(g), sb, 0.1);
  EXPECT_NEAR(1.0 - b.p[0], 0.1 * 0.3 / (0.3 + 1e-5), 1e-15);
  EXPECT_NEAR(b.p[0] - a.p[0], 0.1 * 0.1 * 1.0, 1e-15);
}

TEST(AdamW, EmbeddingIsNeverDecayed) {
  Rng rng(1);
  StackConfig c;
  c.vocab_size = 5;
  c.embedding_dim = 8;
  ModelParams m = ModelParams::init(c, rng);
  for (const ParamRef& r : param_list(m)) {
    if (r.name == "embedding") EXPECT_FALSE(r.weight_decay);
  }
  ModelParams g = zeros_like_params(m);
  const Tensor before = m.embedding;
  OptimizerState s = OptimizerState::for_params(param_list(m));
  adamw_step(param_list(m), param_list(g), s, 0.1);
  EXPECT_EQ(m.embedding, before);
}

TEST(AdamW, ShapeMismatchIsRejected) {
  Scalars p;
  Scalars g;
  g.p = Tensor::vector({1.0, 2.0});
  OptimizerState s = OptimizerState::for_params(param_list(p));
  EXPECT_THROW(adamw_step(param_list(p), param_list(g), s, 0.1), ShapeError);
}

TEST(AdamW, LargeEpsilonDescendsQuadraticBowl) {
  struct Bowl {
    Tensor p = Tensor::vector({3.0, -2.0, 0.5, 4.0});
    void collect(ParamList& out, const std::string& prefix) { out.push_back({prefix + "p", &p}); }
  } bowl, grad;
  const std::vector<double> curvature = {1.0, 2.0, 0.5, 3.0};
  auto value = [&] {
    double f = 0;
    for (std::size_t i = 0; i < 4; ++i) f += curvature[i] * bowl.p[i] * bowl.p[i];
    return f;
  };
  AdamWConfig c;
  c.weight_decay = 0;
  c.eps = 1e3;
  OptimizerState s = OptimizerState::for_params(param_list(bowl));
  double prev = value();
  for (int step = 0; step < 100; ++step) {
    for (std::size_t i = 0; i < 4; ++i) grad.p[i] = 2 * curvature[i] * bowl.p[i];
    adamw_step(param_list(bowl), param_list(grad), s, 10.0, c);
    const double f = value();
    EXPECT_LT(f, prev) << "step " << step;
    prev = f;
  }
}

TEST(Schedule, SpecifiedPoints) {
  ScheduleConfig s;
  s.peak_lr = 2e-3;
  s.warmup_steps = 750;
  s.total_steps = 7500;
  EXPECT_DOUBLE_EQ(lr_at(s, 0), 0.0);
  EXPECT_NEAR(lr_at(s, 375), 0.5 * 2e-3, 1e-18);
  EXPECT_NEAR(lr_at(s, 750), 2e-3, 1e-18);
  EXPECT_NEAR(lr_at(s, 750 + (7500 - 750) / 2), 0.55 * 2e-3, 1e-15);
  EXPECT_NEAR(lr_at(s, 7500), 0.1 * 2e-3, 1e-18);
  EXPECT_THROW(lr_at(s, 7501), Error);
}

TEST(Schedule, ContinuousAtWarmupEnd) {
  ScheduleConfig s;
  s.warmup_steps = 100;
  s.total_steps = 1000;
  EXPECT_NEAR(lr_at(s, 99), s.peak_lr * 0.99, 1e-15);
  EXPECT_NEAR(lr_at(s, 100), s.peak_lr, 1e-18);
  EXPECT_NEAR(lr_at(s, 101), s.peak_lr, 1e-8);
  for (std::size_t t = 101; t <= 1000; ++t) EXPECT_LE(lr_at(s, t), lr_at(s, t - 1));
}

TEST(Schedule, DefaultWarmup) {
  EXPECT_EQ(ScheduleConfig::with_default_warmup(1e-3, 20000).warmup_steps, 750u);
  EXPECT_EQ(ScheduleConfig::with_default_warmup(1e-3, 5000).warmup_steps, 500u);
  ScheduleConfig bad;
  bad.warmup_steps = 10;
  bad.total_steps = 5;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(CrossEntropy, UniformLogits) {
  const Tensor logits({2, 7});
  const std::vector<std::int32_t> targets = {3, 6};
  const std::vector<Scalar> mask = {1, 1};
  EXPECT_NEAR(masked_cross_entropy(logits, targets, mask).loss, std::log(7.0), 1e-15);
}

TEST(CrossEntropy, ConfidentCorrectLogits) {
  Tensor logits({1, 4});
  logits(0, 2) = 30;
  const std::vector<std::int32_t> targets = {2};
  const std::vector<Scalar> mask = {1};
  EXPECT_LT(masked_cross_entropy(logits, targets, mask).loss, 1e-12);
}

TEST(CrossEntropy, GradientMatchesFiniteDifferencesAndMask) {
  Rng rng(2);
  Tensor logits = random_tensor({3, 5}, rng, -2, 2);
  const std::vector<std::int32_t> targets = {1, 4, 0};
  const std::vector<Scalar> mask = {1, 0, 1};
  const LossResult r = masked_cross_entropy(logits, targets, mask);
  EXPECT_EQ(r.count, 2u);
  for (std::size_t v = 0; v < 5; ++v) EXPECT_EQ(r.grad(1, v), 0);
  auto loss = [&] { return masked_cross_entropy(logits, targets, mask).loss; };
  EXPECT_LT(max_rel_error(r.grad, numeric_gradient(logits, loss)), 1e-8);
}

TEST(CrossEntropy, AllMaskedIsAnError) {
  const std::vector<std::int32_t> targets = {0};
  const std::vector<Scalar> mask = {0};
  EXPECT_THROW(masked_cross_entropy(Tensor({1, 3}), targets, mask), Error);
}

TEST(Mse, Values) {
  const Tensor pred = Tensor::matrix(3, 1, {1, 2, 3});
  const std::vector<Scalar> all = {1, 1, 1};
  EXPECT_EQ(mse_loss(pred, pred, all).loss, 0);
  const Tensor shifted = Tensor::matrix(3, 1, {0, 1, 2});
  EXPECT_DOUBLE_EQ(mse_loss(pred, shifted, all).loss, 1.0);
  const std::vector<Scalar> some = {0, 1, 1};
  const LossResult r = mse_loss(pred, Tensor::matrix(3, 1, {0, 1.5, 2}), some);
  EXPECT_DOUBLE_EQ(r.loss, (0.25 + 1.0) / 2);
  EXPECT_EQ(r.grad[0], 0);
  EXPECT_DOUBLE_EQ(r.grad[1], 2 * 0.5 / 2);
  EXPECT_DOUBLE_EQ(r.grad[2], 2 * 1.0 / 2);
}

TEST(Accuracy, ClassesRestrictTheArgmax) {
  const Tensor logits({3, 3}, {0.1, 0.2, 0.9,  //
                               0.5, 0.1, 0.0,  //
                               0.0, 0.3, 0.4});
  const std::vector<std::int32_t> targets{1, 0, 1};
  const std::vector<Scalar> mask{1, 1, 1};
  const std::vector<std::int32_t> classes{0, 1};
  EXPECT_EQ(count_correct(logits, targets, mask), 1u);
  EXPECT_EQ(count_correct(logits, targets, mask, classes), 3u);
  EXPECT_EQ(count_correct(logits, targets, std::vector<Scalar>{0, 1, 0}, classes), 1u);
  const std::vector<std::int32_t> bad{0, 3};
  EXPECT_THROW(count_correct(logits, targets, mask, bad), ShapeError);
}

TEST(Training, OverfitsFixedSequence) {
  for (auto [a, b] : {std::pair{1u, 1u}, std::pair{1u, 0u}, std::pair{0u, 1u}}) {
    Rng rng(3);
    StackConfig c;
    c.num_blocks = 2;
    c.ratio_mlstm = a;
    c.ratio_slstm = b;
    c.embedding_dim = 16;
    c.vocab_size = 11;
    ModelParams m = ModelParams::init(c, rng);
    std::vector<std::int32_t> seq(17);
    for (auto& t : seq) t = std::int32_t(rng.uniform_int(0, 10));
    const std::vector<std::int32_t> inputs(seq.begin(), seq.end() - 1), targets(seq.begin() + 1, seq.end());
    const std::vector<Scalar> mask(16, 1);
    OptimizerState s = OptimizerState::for_params(param_list(m));
    double first = 0, last = 0;
    for (int step = 0; step < 200; ++step) {
      const ModelOutput out = model_forward(m, inputs);
      const LossResult r = masked_cross_entropy(out.logits, targets, mask);
      if (step == 0) first = r.loss;
      last = r.loss;
      ModelParams g = model_backward(m, out.cache, r.grad);
      adamw_step(param_list(m), param_list(g), s, 1e-2);
      if (step == 49) EXPECT_LT(r.loss, first);
    }
    EXPECT_LT(last, 0.5 * first) << a << ":" << b;
  }
}

RunConfig tiny_run(TaskKind kind) {
  RunConfig c;
  c.seed = 5;
  c.model.num_blocks = 2;
  c.model.embedding_dim = 8;
  c.task.kind = kind;
  c.task.min_length = 2;
  c.task.max_length = 6;
  c.task.context = kind == TaskKind::Mqar ? 16 : 0;
  c.task.vocab_size = 16;
  c.task.kv_pairs = 2;
  c.eval.samples = 8;
  c.eval.interval = 2;
  c.train.steps = 4;
  c.train.batch_size = 3;
  c.finalize();
  return c;
}

TEST(Trainer, StepsAreDeterministic) {
  for (TaskKind kind : {TaskKind::Parity, TaskKind::Mqar, TaskKind::Nns}) {
    Trainer a(tiny_run(kind)), b(tiny_run(kind));
    for (int i = 0; i < 3; ++i) EXPECT_EQ(a.step(), b.step());
    EXPECT_EQ(a.steps_done(), 3u);
    const EvalMetrics ea = a.evaluate(), eb = b.evaluate();
    EXPECT_EQ(ea.loss, eb.loss);
    if (kind == TaskKind::Nns) {
      EXPECT_TRUE(std::isnan(ea.accuracy));
      EXPECT_EQ(ea.mse, ea.loss);
    } else {
      EXPECT_TRUE(std::isnan(ea.mse));
    }
  }
}

TEST(Trainer, BatchGradientIsMeanOfSampleGradients) {
  RunConfig c = tiny_run(TaskKind::Parity);
  const ModelParams m = init_model(c);
  std::vector<TaskSample> samples = eval_samples(c.task, 3, 1);
  ModelParams batch = zeros_like_params(m);
  for (const TaskSample& s : samples) sample_loss_and_grad(m, s, 1.0 / 3.0, batch);
  ModelParams mean = zeros_like_params(m);
  for (const TaskSample& s : samples) {
    ModelParams one = zeros_like_params(m);
    sample_loss_and_grad(m, s, 1.0, one);
    for (const ParamRef& r : param_list(one)) *r.tensor *= Scalar(1.0 / 3.0);
    accumulate_params(mean, one);
  }
  ParamList a = param_list(batch), b = param_list(mean);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_LT(max_rel_error(*a[k].tensor, *b[k].tensor, 1e-6), 1e-10) << a[k].name;
}

TEST(Trainer, UntrainedParityIsNearChance) {
  RunConfig c = tiny_run(TaskKind::Parity);
  c.model.embedding_dim = 16;
  c.eval.samples = 400;
  const ModelParams m = init_model(c);
  const EvalMetrics e = evaluate(m, c.eval_task(), eval_samples(c.eval_task(), c.eval.samples, 11));
  EXPECT_NEAR(e.scaled_accuracy, 0.0, 0.1);
}

TEST(Metrics, RowFormat) {
  MetricsRow r;
  r.step = 10;
  r.train_loss = 0.5;
  r.eval.loss = 0.25;
  r.eval.accuracy = 0.75;
  r.eval.scaled_accuracy = 0.5;
  r.eval.mse = std::numeric_limits<double>::quiet_NaN();
  r.lr = 1e-3;
  EXPECT_EQ(metrics_header(), "step,train_loss,eval_loss,eval_accuracy,eval_scaled_accuracy,eval_mse,lr");
  EXPECT_EQ(format_metrics_row(r), "10,0.5,0.25,0.75,0.5,,0.001");
}

}  // namespace
}  // namespace xlstm
