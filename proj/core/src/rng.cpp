// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include "xlstm/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "xlstm/error.hpp"

namespace xlstm {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng Rng::derive(std::uint64_t seed, std::uint64_t stream) {
  return Rng(splitmix64(splitmix64(seed) ^ (stream * 0xd1342543de82ef95ULL + 1)));
}

double Rng::uniform() {
  // 53 random mantissa bits.
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw Error("uniform_int: empty range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(engine_());
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t draw;
  do {
    draw = engine_();
  } while (draw >= limit);
  return lo + static_cast<std::int64_t>(draw % span);
}

double Rng::normal(double mean, double stddev) {
  if (has_spare_) {
    has_spare_ = false;
    return mean + stddev * spare_;
  }
  // Marsaglia polar method.
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double factor = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * factor;
  has_spare_ = true;
  return mean + stddev * u * factor;
}

double Rng::truncated_normal(double mean, double stddev, double cutoff) {
  for (;;) {
    const double z = normal();
    if (std::abs(z) <= cutoff) return mean + stddev * z;
  }
}

void Rng::fill_normal(Tensor& t, double mean, double stddev) {
  for (Scalar& v : t.values()) v = static_cast<Scalar>(normal(mean, stddev));
}

void Rng::fill_truncated_normal(Tensor& t, double mean, double stddev, double cutoff) {
  for (Scalar& v : t.values()) v = static_cast<Scalar>(truncated_normal(mean, stddev, cutoff));
}

void Rng::fill_uniform(Tensor& t, double lo, double hi) {
  for (Scalar& v : t.values()) v = static_cast<Scalar>(uniform(lo, hi));
}

}  // namespace xlstm
