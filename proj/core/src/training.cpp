// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include "xlstm/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "xlstm/error.hpp"

namespace xlstm {

OptimizerState OptimizerState::for_params(const ParamList& params) {
  OptimizerState s;
  for (const ParamRef& p : params) {
    s.m.push_back(Tensor::zeros_like(*p.tensor));
    s.v.push_back(Tensor::zeros_like(*p.tensor));
  }
  return s;
}

void adamw_step(const ParamList& params, const ParamList& grads, OptimizerState& state, double lr,
                const AdamWConfig& c) {
  require_congruent(params, grads, "adamw_step");
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adamw_step: optimizer state does not match the parameter list");
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(c.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, double(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k].tensor;
    const Tensor& g = *grads[k].tensor;
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    require_shape(m, p.shape(), "adamw_step first moment");
    const double wd = params[k].weight_decay ? c.weight_decay : 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      const double mi = c.beta1 * double(m[i]) + (1.0 - c.beta1) * gi;
      const double vi = c.beta2 * double(v[i]) + (1.0 - c.beta2) * gi * gi;
      m[i] = Scalar(mi);
      v[i] = Scalar(vi);
      const double update = (mi / bc1) / (std::sqrt(vi / bc2) + c.eps) + wd * double(p[i]);
      p[i] = Scalar(double(p[i]) - lr * update);
    }
  }
}

ScheduleConfig ScheduleConfig::with_default_warmup(double peak_lr, std::size_t total_steps) {
  ScheduleConfig s;
  s.peak_lr = peak_lr;
  s.total_steps = total_steps;
  s.warmup_steps = total_steps < 7500 ? total_steps / 10 : 750;
  return s;
}

void ScheduleConfig::validate() const {
  if (warmup_steps > total_steps) throw ConfigError("train.warmup_steps", "warmup exceeds total steps");
  if (!(peak_lr > 0)) throw ConfigError("train.lr", "peak learning rate must be positive");
  if (floor_fraction < 0 || floor_fraction > 1) throw ConfigError("train.lr_floor", "floor fraction must be in [0, 1]");
}

double lr_at(const ScheduleConfig& s, std::size_t step) {
  s.validate();
  if (step > s.total_steps) {
    throw Error("lr_at: step " + std::to_string(step) + " beyond total " + std::to_string(s.total_steps));
  }
  if (step < s.warmup_steps) return s.peak_lr * double(step) / double(s.warmup_steps);
  if (s.total_steps == s.warmup_steps) return s.peak_lr;
  const double progress = double(step - s.warmup_steps) / double(s.total_steps - s.warmup_steps);
  const double floor = s.floor_fraction * s.peak_lr;
  return floor + (s.peak_lr - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

LossResult masked_cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets,
                                std::span<const Scalar> mask) {
  if (logits.rank() != 2) throw ShapeError("masked_cross_entropy: logits must be [T x V]");
  const std::size_t steps = logits.dim(0), vocab = logits.dim(1);
  if (targets.size() != steps || mask.size() != steps) {
    throw ShapeError("masked_cross_entropy: targets/mask length does not match logits");
  }
  LossResult r;
  r.grad = Tensor::zeros_like(logits);
  for (std::size_t t = 0; t < steps; ++t) r.count += mask[t] != 0;
  if (r.count == 0) throw Error("masked_cross_entropy: every position is masked out");
  const double inv = 1.0 / double(r.count);
  double total = 0;
  for (std::size_t t = 0; t < steps; ++t) {
    if (mask[t] == 0) continue;
    const std::int32_t target = targets[t];
    if (target < 0 || std::size_t(target) >= vocab) {
      throw ShapeError("masked_cross_entropy: target " + std::to_string(target) + " outside vocabulary");
    }
    const Scalar* row = logits.data() + t * vocab;
    const Scalar mx = *std::max_element(row, row + vocab);
    double sum = 0;
    for (std::size_t j = 0; j < vocab; ++j) sum += std::exp(double(row[j] - mx));
    const double log_z = double(mx) + std::log(sum);
    total += log_z - double(row[target]);
    Scalar* g = r.grad.data() + t * vocab;
    for (std::size_t j = 0; j < vocab; ++j) g[j] = Scalar(std::exp(double(row[j]) - log_z) * inv);
    g[target] -= Scalar(inv);
  }
  r.loss = total * inv;
  return r;
}

LossResult mse_loss(const Tensor& pred, const Tensor& target, std::span<const Scalar> mask) {
  require_shape(target, pred.shape(), "mse_loss target");
  const std::size_t rows = pred.rows(), cols = pred.cols();
  if (mask.size() != rows) throw ShapeError("mse_loss: mask length does not match rows");
  LossResult r;
  r.grad = Tensor::zeros_like(pred);
  for (std::size_t t = 0; t < rows; ++t) r.count += mask[t] != 0 ? cols : 0;
  if (r.count == 0) throw Error("mse_loss: every position is masked out");
  double total = 0;
  const double inv = 1.0 / double(r.count);
  for (std::size_t t = 0; t < rows; ++t) {
    if (mask[t] == 0) continue;
    for (std::size_t c = 0; c < cols; ++c) {
      const double e = double(pred[t * cols + c]) - double(target[t * cols + c]);
      total += e * e;
      r.grad[t * cols + c] = Scalar(2.0 * e * inv);
    }
  }
  r.loss = total * inv;
  return r;
}

std::size_t count_correct(const Tensor& logits, std::span<const std::int32_t> targets, std::span<const Scalar> mask,
                          std::span<const std::int32_t> classes) {
  const std::size_t steps = logits.dim(0), vocab = logits.dim(1);
  if (targets.size() != steps || mask.size() != steps) throw ShapeError("count_correct: length mismatch");
  std::size_t correct = 0;
  for (std::size_t t = 0; t < steps; ++t) {
    if (mask[t] == 0) continue;
    const Scalar* row = logits.data() + t * vocab;
    std::int32_t best = std::int32_t(std::max_element(row, row + vocab) - row);
    if (!classes.empty()) {
      best = classes[0];
      for (std::int32_t c : classes) {
        if (c < 0 || std::size_t(c) >= vocab) throw ShapeError("count_correct: class out of range");
        if (row[c] > row[best]) best = c;
      }
    }
    correct += best == targets[t];
  }
  return correct;
}

}  // namespace xlstm
