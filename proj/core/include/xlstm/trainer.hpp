// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

// Training loop, evaluation and run artifacts.
//
// A run directory holds:
//   run.yaml        the finalized config
//   metrics.csv     "# "-prefixed config echo, then one CSV row per evaluation
//   timing.csv      wall-clock seconds per evaluation (kept out of metrics.csv so reruns diff clean)
//   model.ckpt      final parameters (see checkpoint.hpp)

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "xlstm/config.hpp"
#include "xlstm/model.hpp"
#include "xlstm/tasks.hpp"
#include "xlstm/training.hpp"

namespace xlstm {

/// Random stream tags mixed into the run seed.
inline constexpr std::uint64_t kInitStream = 0x696e6974;   // "init"
inline constexpr std::uint64_t kTrainStream = 0x747261696e;  // "train"
inline constexpr std::uint64_t kEvalStream = 0x6576616c;   // "eval"

struct EvalMetrics {
  double loss = 0;
  /// Token tasks only; NaN for NNS.
  double accuracy = 0;
  double scaled_accuracy = 0;
  /// NNS only; NaN for token tasks.
  double mse = 0;
  std::size_t samples = 0;
  std::size_t positions = 0;
};

/// Held-out samples for `task`, drawn from the evaluation stream of `seed`.
std::vector<TaskSample> eval_samples(const TaskConfig& task, std::size_t count, std::uint64_t seed);

EvalMetrics evaluate(const ModelParams& model, const TaskConfig& task, const std::vector<TaskSample>& samples);

/// Loss of one sample (forward truncated to its evaluated prefix); accumulates weight * gradient.
double sample_loss_and_grad(const ModelParams& model, const TaskSample& sample, double weight, ModelParams& grads);

/// Freshly initialized parameters for the finalized config (init stream of config.seed).
ModelParams init_model(RunConfig config);

class Trainer {
 public:
  explicit Trainer(RunConfig config);
  Trainer(RunConfig config, ModelParams model);

  /// One optimizer step on a fresh batch; returns the batch loss (mean of per-sample means).
  double step();
  EvalMetrics evaluate() const;

  std::size_t steps_done() const { return static_cast<std::size_t>(state_.step); }
  double current_lr() const;
  const RunConfig& config() const { return config_; }
  const ModelParams& model() const { return model_; }

 private:
  RunConfig config_;
  ModelParams model_;
  ModelParams grads_;
  OptimizerState state_;
  ScheduleConfig schedule_;
  TaskConfig train_task_;
  TaskConfig eval_task_;
  std::vector<TaskSample> eval_set_;
};

struct MetricsRow {
  std::size_t step = 0;
  double train_loss = 0;
  EvalMetrics eval;
  double lr = 0;
};

std::string metrics_header();
std::string format_metrics_row(const MetricsRow& row);

struct TrainSummary {
  std::vector<MetricsRow> rows;
  bool stopped_early = false;
};

/// Trains for config.train.steps (or until the stop criterion holds), evaluating every
/// eval.interval steps and at the end, and writes the run directory. `log` receives progress lines.
TrainSummary run_training(const RunConfig& config, std::ostream* log = nullptr);

}  // namespace xlstm
