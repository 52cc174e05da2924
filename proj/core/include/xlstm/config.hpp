// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

// Run configuration files (YAML). Every key is optional; unknown keys are rejected with a
// ConfigError naming the dotted key path. See configs/ and README.md for the full grammar.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "xlstm/gradcheck.hpp"
#include "xlstm/model.hpp"
#include "xlstm/tasks.hpp"
#include "xlstm/training.hpp"

namespace xlstm {

struct EvalConfig {
  /// Length range of held-out samples; 0 keeps the training range.
  std::size_t min_length = 0;
  std::size_t max_length = 0;
  std::size_t samples = 256;
  std::size_t interval = 100;
};

struct TrainConfig {
  std::size_t steps = 1000;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  /// Negative selects the default warmup (750, or 10% of steps below 7500).
  long warmup_steps = -1;
  double lr_floor = 0.1;
  AdamWConfig adamw;
  /// Train on every position of parity and NNS samples (evaluation keeps task.mask_all_positions).
  bool mask_all_positions = false;
  /// Stop once an evaluation reaches this scaled accuracy (token tasks) or MSE (NNS); 0 disables.
  double stop_scaled_accuracy = 0;
  double stop_mse = 0;

  ScheduleConfig schedule() const;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "runs/default";
  StackConfig model;
  TaskConfig task;
  EvalConfig eval;
  TrainConfig train;

  /// Derives the model's input/output interface from the task and validates everything.
  void finalize();
  TaskConfig train_task() const;
  TaskConfig eval_task() const;
};

RunConfig parse_run_config(const std::string& yaml_text);
RunConfig load_run_config(const std::string& path);
std::string to_yaml(const RunConfig& config);

/// Gradient-check configuration: seed, step, threshold and a list of models.
struct GradCheckConfig {
  std::uint64_t seed = 7;
  double step = 1e-6;
  double threshold = 1e-4;
  std::vector<GradCheckModelSpec> models = standard_gradcheck_models();
};

GradCheckConfig parse_gradcheck_config(const std::string& yaml_text);
GradCheckConfig load_gradcheck_config(const std::string& path);

/// Model section only (used as the checkpoint header).
std::string model_to_yaml(const StackConfig& config);
StackConfig model_from_yaml(const std::string& yaml_text);

}  // namespace xlstm
