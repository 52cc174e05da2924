// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

#include "xlstm/tensor.hpp"

namespace xlstm {

/// Seeded random source. The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard; the distributions are implemented here so draws are identical on every platform
/// (std:: distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  /// Independent stream for (seed, stream) pairs, e.g. one per generated sample.
  static Rng derive(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  double normal(double mean = 0.0, double stddev = 1.0);
  /// Normal truncated (by resampling) to mean +- cutoff * stddev.
  double truncated_normal(double mean, double stddev, double cutoff);

  void fill_normal(Tensor& t, double mean, double stddev);
  void fill_truncated_normal(Tensor& t, double mean, double stddev, double cutoff);
  void fill_uniform(Tensor& t, double lo, double hi);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace xlstm
