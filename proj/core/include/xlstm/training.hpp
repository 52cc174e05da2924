// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "xlstm/params.hpp"
#include "xlstm/tensor.hpp"

namespace xlstm {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-5;
  double weight_decay = 0.1;
};

struct OptimizerState {
  std::vector<Tensor> m, v;
  std::uint64_t step = 0;

  static OptimizerState for_params(const ParamList& params);
};

/// Decoupled weight decay with bias-corrected moments:
///   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)
/// Parameters whose ParamRef has weight_decay == false skip the decay term.
void adamw_step(const ParamList& params, const ParamList& grads, OptimizerState& state, double lr,
                const AdamWConfig& config = {});

struct ScheduleConfig {
  double peak_lr = 1e-3;
  std::size_t warmup_steps = 750;
  std::size_t total_steps = 7500;
  double floor_fraction = 0.1;

  /// 750 warmup steps, or 10% of the total when the run is shorter than 7500 steps.
  static ScheduleConfig with_default_warmup(double peak_lr, std::size_t total_steps);
  void validate() const;
};

/// Linear warmup from 0 to peak, then cosine decay to floor_fraction * peak at total_steps.
double lr_at(const ScheduleConfig& schedule, std::size_t step);

struct LossResult {
  double loss = 0;
  Tensor grad;            // same shape as the prediction
  std::size_t count = 0;  // number of evaluated positions
};

/// Mean negative log-likelihood over positions with mask != 0. Throws when nothing is masked in.
LossResult masked_cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets,
                                std::span<const Scalar> mask);

/// Mean squared error over the rows with mask != 0 (all columns of those rows).
LossResult mse_loss(const Tensor& pred, const Tensor& target, std::span<const Scalar> mask);

/// Number of masked-in rows whose argmax equals the target. A non-empty `classes` restricts the argmax to those tokens.
std::size_t count_correct(const Tensor& logits, std::span<const std::int32_t> targets, std::span<const Scalar> mask,
                          std::span<const std::int32_t> classes = {});

}  // namespace xlstm
