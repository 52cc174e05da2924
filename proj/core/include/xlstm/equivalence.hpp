// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

// Randomized equivalence trials: stabilized vs unstabilized recurrences (sLSTM and mLSTM) and
// parallel vs recurrent mLSTM. Trial `i` of a run with base seed `s` uses seed s + i, so any trial
// can be replayed alone with that seed and a single trial.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "xlstm/slstm.hpp"

namespace xlstm {

enum class EquivalenceKind { SLstmStabilization, MLstmStabilization, MLstmParallel };

std::string_view to_string(EquivalenceKind kind);

struct EquivalenceOptions {
  std::size_t trials = 100;
  std::size_t max_steps = 64;
  std::size_t max_dim = 32;
  std::uint64_t seed = 0;
};

struct TrialResult {
  EquivalenceKind kind = EquivalenceKind::SLstmStabilization;
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  std::size_t dim = 0;
  std::size_t heads = 0;
  GateActivation forget_gate = GateActivation::Sigmoid;
  double rel_error = 0;
};

/// One trial of one kind; fully determined by (kind, seed, max_steps, max_dim).
TrialResult run_equivalence_trial(EquivalenceKind kind, std::uint64_t seed, std::size_t max_steps,
                                  std::size_t max_dim);

struct EquivalenceReport {
  std::vector<TrialResult> trials;
  /// Worst trial of the given kind (or overall when kind is omitted).
  const TrialResult& worst(EquivalenceKind kind) const;
  const TrialResult& worst() const;
};

/// Runs `trials` trials of every kind. Throws ConfigError when trials, max_steps or max_dim is 0.
EquivalenceReport run_equivalence(const EquivalenceOptions& options);

}  // namespace xlstm
