// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include "xlstm/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "xlstm/error.hpp"
#include "xlstm/training.hpp"

namespace xlstm {

double relative_error(std::span<const Scalar> a, std::span<const Scalar> b, double floor) {
  if (a.size() != b.size()) throw ShapeError("relative_error: length mismatch");
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(double(a[i]) - double(b[i])));
    na = std::max(na, std::abs(double(a[i])));
    nb = std::max(nb, std::abs(double(b[i])));
  }
  if (!std::isfinite(diff)) return INFINITY;
  return diff / std::max({na, nb, floor});
}

double GradCheckReport::worst() const {
  double w = 0;
  for (const GroupReport& g : groups) w = std::max(w, g.rel_error);
  return w;
}

GradCheckReport finite_difference_check(const ParamList& params, const ParamList& analytic,
                                        const std::function<double()>& loss, double step) {
  require_congruent(params, analytic, "finite_difference_check");
  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k].tensor;
    const Tensor& a = *analytic[k].tensor;
    Tensor numeric = Tensor::zeros_like(p);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const Scalar saved = p[i];
      p[i] = saved + Scalar(step);
      const double up = loss();
      p[i] = saved - Scalar(step);
      const double down = loss();
      p[i] = saved;
      numeric[i] = Scalar((up - down) / (2 * step));
    }
    GroupReport g;
    g.name = params[k].name;
    g.entries = p.size();
    g.max_abs_analytic = a.max_abs();
    double diff = 0;
    for (std::size_t i = 0; i < p.size(); ++i) diff = std::max(diff, std::abs(double(a[i]) - double(numeric[i])));
    g.max_abs_error = diff;
    g.rel_error = relative_error(a.values(), numeric.values());
    report.groups.push_back(g);
  }
  return report;
}

std::vector<GradCheckModelSpec> standard_gradcheck_models() {
  return {{"slstm", 0, 1, 2, 16, 11, 8}, {"mlstm", 1, 0, 2, 16, 11, 8}, {"xlstm[1:1]", 1, 1, 2, 16, 11, 8}};
}

GradCheckReport gradcheck_model(const GradCheckModelSpec& spec, std::uint64_t seed, double step) {
  StackConfig cfg;
  cfg.num_blocks = spec.num_blocks;
  cfg.ratio_mlstm = spec.ratio_mlstm;
  cfg.ratio_slstm = spec.ratio_slstm;
  cfg.embedding_dim = spec.dim;
  cfg.vocab_size = spec.vocab;
  cfg.slstm.recurrent_grad_clip = 0;
  Rng rng(seed);
  ModelParams model = ModelParams::init(cfg, rng);
  // Perturb the identity-initialized affine parameters so their gradients are exercised generically.
  ParamList plist = param_list(model);
  for (const ParamRef& r : plist) {
    for (Scalar& v : r.tensor->values()) v += Scalar(rng.uniform(-0.1, 0.1));
  }
  std::vector<std::int32_t> tokens(spec.steps), targets(spec.steps);
  for (auto& t : tokens) t = std::int32_t(rng.uniform_int(0, std::int64_t(spec.vocab) - 1));
  for (auto& t : targets) t = std::int32_t(rng.uniform_int(0, std::int64_t(spec.vocab) - 1));
  const std::vector<Scalar> mask(spec.steps, Scalar(1));

  ModelOutput out = model_forward(model, tokens);
  LossResult l = masked_cross_entropy(out.logits, targets, mask);
  ModelParams grads = model_backward(model, out.cache, l.grad);

  auto loss = [&]() {
    return double(masked_cross_entropy(model_forward(model, tokens).logits, targets, mask).loss);
  };
  GradCheckReport report = finite_difference_check(param_list(model), param_list(grads), loss, step);
  report.label = spec.label;
  return report;
}

}  // namespace xlstm
