// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include "xlstm/equivalence.hpp"

#include <algorithm>
#include <cmath>

#include "xlstm/error.hpp"
#include "xlstm/gradcheck.hpp"
#include "xlstm/mlstm.hpp"
#include "xlstm/reference.hpp"

namespace xlstm {

std::string_view to_string(EquivalenceKind kind) {
  switch (kind) {
    case EquivalenceKind::SLstmStabilization: return "slstm-stabilized-vs-unstabilized";
    case EquivalenceKind::MLstmStabilization: return "mlstm-stabilized-vs-unstabilized";
    case EquivalenceKind::MLstmParallel: return "mlstm-parallel-vs-recurrent";
  }
  return "";
}

namespace {

constexpr EquivalenceKind kKinds[] = {EquivalenceKind::SLstmStabilization, EquivalenceKind::MLstmStabilization,
                                      EquivalenceKind::MLstmParallel};

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::size_t(rng.uniform_int(std::int64_t(lo), std::int64_t(hi)));
}

/// Heads in {1, 2, 4} and a width that is a multiple of the head count, at most max_dim.
std::pair<std::size_t, std::size_t> pick_width(Rng& rng, std::size_t max_dim) {
  std::size_t heads = std::size_t(1) << pick(rng, 0, 2);
  while (heads > max_dim) heads /= 2;
  const std::size_t per_head = pick(rng, 1, max_dim / heads);
  return {heads, heads * per_head};
}

void fill_normal(Rng& rng, Tensor& t, double stddev) { rng.fill_normal(t, 0.0, stddev); }

}  // namespace

TrialResult run_equivalence_trial(EquivalenceKind kind, std::uint64_t seed, std::size_t max_steps,
                                  std::size_t max_dim) {
  Rng rng(seed);
  TrialResult r;
  r.kind = kind;
  r.seed = seed;
  r.forget_gate = seed % 2 == 0 ? GateActivation::Sigmoid : GateActivation::Exp;
  r.steps = pick(rng, 1, max_steps);
  std::tie(r.heads, r.dim) = pick_width(rng, max_dim);
  const std::size_t d_in = pick(rng, 1, max_dim);
  Tensor x({r.steps, d_in});
  fill_normal(rng, x, 1.0);

  if (kind == EquivalenceKind::SLstmStabilization) {
    SLstmConfig cfg{d_in, r.dim, r.heads, r.forget_gate, GateActivation::Exp, false, 0};
    SLstmParams p = SLstmParams::zeros(cfg);
    const double w_std = 1.0 / std::sqrt(double(d_in));
    for (Tensor* w : {&p.w_z, &p.w_i, &p.w_f, &p.w_o}) fill_normal(rng, *w, w_std);
    for (Tensor* w : {&p.r_z, &p.r_i, &p.r_f, &p.r_o}) fill_normal(rng, *w, 1.0 / std::sqrt(double(cfg.head_dim())));
    for (Tensor* b : {&p.b_z, &p.b_i, &p.b_f, &p.b_o}) fill_normal(rng, *b, 1.0);
    const Tensor stable = slstm_forward(p, x).h;
    const Tensor raw = slstm_unstabilized_forward(p, x);
    r.rel_error = relative_error(stable.values(), raw.values());
    return r;
  }

  MLstmCoreInputs in{Tensor({r.steps, r.dim}), Tensor({r.steps, r.dim}), Tensor({r.steps, r.dim}),
                     Tensor({r.steps, r.heads}), Tensor({r.steps, r.heads})};
  fill_normal(rng, in.q, 1.0);
  fill_normal(rng, in.k, 1.0);
  fill_normal(rng, in.v, 1.0);
  fill_normal(rng, in.i, 2.0);
  fill_normal(rng, in.f, 2.0);
  for (Scalar& f : in.f.values()) f += Scalar(2);
  const Tensor recurrent =
      mlstm_core_recurrent(in, r.heads, r.forget_gate, MLstmState::zeros(r.heads, r.dim / r.heads)).h;
  const Tensor other = kind == EquivalenceKind::MLstmStabilization
                           ? mlstm_core_unstabilized(in, r.heads, r.forget_gate)
                           : mlstm_core_parallel(in, r.heads, r.forget_gate).h;
  r.rel_error = relative_error(recurrent.values(), other.values());
  return r;
}

const TrialResult& EquivalenceReport::worst(EquivalenceKind kind) const {
  const TrialResult* best = nullptr;
  for (const TrialResult& t : trials) {
    if (t.kind == kind && (!best || t.rel_error > best->rel_error)) best = &t;
  }
  if (!best) throw Error("equivalence report has no trials of kind " + std::string(to_string(kind)));
  return *best;
}

const TrialResult& EquivalenceReport::worst() const {
  if (trials.empty()) throw Error("equivalence report is empty");
  return *std::max_element(trials.begin(), trials.end(),
                           [](const TrialResult& a, const TrialResult& b) { return a.rel_error < b.rel_error; });
}

EquivalenceReport run_equivalence(const EquivalenceOptions& o) {
  if (o.trials == 0) throw ConfigError("trials", "must be at least 1");
  if (o.max_steps == 0) throw ConfigError("max_steps", "must be at least 1");
  if (o.max_dim == 0) throw ConfigError("max_dim", "must be at least 1");
  EquivalenceReport report;
  for (EquivalenceKind kind : kKinds) {
    for (std::size_t i = 0; i < o.trials; ++i) {
      report.trials.push_back(run_equivalence_trial(kind, o.seed + i, o.max_steps, o.max_dim));
    }
  }
  return report;
}

}  // namespace xlstm
