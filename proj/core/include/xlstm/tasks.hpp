// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

// Synthetic task generators: parity, multi-query associative recall (MQAR) and nearest
// neighbor search (NNS). Generators are pure functions of (config, rng).
//
// Line format used by `to_line` / `sample_from_line` (one sample per line, fields separated by
// " | "):
//
//   <task> <length> | <inputs> | <targets> | <mask>
//
// Token tasks list inputs and targets as space-separated integers. NNS lists each input row as
// "x1,x2,value" and targets as decimal reals. The mask is a run of 0/1 digits.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xlstm/rng.hpp"
#include "xlstm/tensor.hpp"

namespace xlstm {

enum class TaskKind { Parity, Mqar, Nns };

std::string_view to_string(TaskKind kind);
TaskKind task_kind_from_string(std::string_view name);

namespace parity {
inline constexpr std::int32_t kA = 0;
inline constexpr std::int32_t kB = 1;
inline constexpr std::int32_t kPad = 2;
inline constexpr std::size_t kVocab = 3;
}  // namespace parity

struct TaskConfig {
  TaskKind kind = TaskKind::Parity;
  /// Sequence length range (parity: number of a/b symbols; NNS: candidates after the reference).
  std::size_t min_length = 2;
  std::size_t max_length = 32;
  /// Padded length of every sample. 0 means the shortest length that fits max_length.
  std::size_t context = 0;
  std::size_t vocab_size = 512;  // MQAR
  std::size_t kv_pairs = 4;      // MQAR
  /// NNS: evaluate every position t >= 1 instead of only the last one. Parity: also supervise the
  /// running parity at every symbol position.
  bool mask_all_positions = false;

  void validate() const;
  std::size_t padded_length() const;
  std::size_t model_vocab() const;  // 0 for vector-input tasks
  std::size_t input_dim() const;    // 0 for token tasks
  /// Chance-level accuracy of the task's evaluated tokens.
  double random_baseline() const;
  /// Tokens the answer is chosen from when scoring accuracy; empty means the whole vocabulary.
  std::span<const std::int32_t> answer_classes() const;
};

struct TaskSample {
  TaskKind kind = TaskKind::Parity;
  std::vector<std::int32_t> tokens;   // token tasks
  Tensor inputs;                      // NNS: [T x 3]
  std::vector<std::int32_t> targets;  // token tasks
  Tensor target_values;               // NNS: [T x 1]
  std::vector<Scalar> mask;           // [T]
  std::size_t length = 0;             // positions holding real content (before padding)

  std::size_t size() const { return mask.size(); }
  /// One past the last masked-in position.
  std::size_t evaluated_prefix() const;
};

/// Parity over `length` symbols uniform in [min_length, max_length]. Layout: the symbols, one pad
/// slot that carries the answer target, then pad up to the context.
TaskSample gen_parity(const TaskConfig& config, Rng& rng);
/// Parity sample for a fixed symbol string. With `all_positions`, symbol t also carries the parity
/// of symbols 0..t as a masked-in target.
TaskSample make_parity(const std::vector<std::int32_t>& symbols, std::size_t context, bool all_positions = false);

/// Keys from [1, V/2), values from [V/2, V), token 0 fills gaps. The prefix lists k1 v1 ... kn vn;
/// each key is queried once afterwards at an even offset of the query region drawn from a Zipf(1)
/// law without replacement. The target at a query position is the bound value.
TaskSample gen_mqar(const TaskConfig& config, Rng& rng);

/// Row 0 is the reference vector (value 0); rows 1..L are unit 2-vectors with values in [0, 1].
/// The target at row t >= 1 is the value of the most similar candidate among rows 1..t.
TaskSample gen_nns(const TaskConfig& config, Rng& rng);

TaskSample generate(const TaskConfig& config, Rng& rng);

/// (raw - s_rand) / (1 - s_rand), optionally clamped below at `floor`.
double scaled_accuracy(double raw, double s_rand);
double scaled_accuracy(double raw, double s_rand, double floor);

std::string to_line(const TaskSample& sample);
TaskSample sample_from_line(std::string_view line);

}  // namespace xlstm
