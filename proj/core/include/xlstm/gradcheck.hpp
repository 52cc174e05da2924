// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

// Central finite-difference checks of analytic gradients, reported per parameter tensor.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "xlstm/model.hpp"
#include "xlstm/params.hpp"

namespace xlstm {

/// max|a - b| / max(max|a|, max|b|); when both maxima are below `floor` the absolute difference
/// divided by `floor` is returned instead.
double relative_error(std::span<const Scalar> a, std::span<const Scalar> b, double floor = 1e-4);

struct GroupReport {
  std::string name;
  std::size_t entries = 0;
  double max_abs_analytic = 0;
  double max_abs_error = 0;
  double rel_error = 0;
};

struct GradCheckReport {
  std::string label;
  std::vector<GroupReport> groups;
  double worst() const;
  bool passed(double threshold) const { return worst() < threshold; }
};

/// Compares `analytic` against central differences of `loss` over every entry of `params`.
GradCheckReport finite_difference_check(const ParamList& params, const ParamList& analytic,
                                        const std::function<double()>& loss, double step = 1e-6);

struct GradCheckModelSpec {
  std::string label;
  std::size_t ratio_mlstm = 1;
  std::size_t ratio_slstm = 1;
  std::size_t num_blocks = 2;
  std::size_t dim = 16;
  std::size_t vocab = 11;
  std::size_t steps = 8;
};

/// The three standard models: sLSTM-only, mLSTM-only and xLSTM[1:1].
std::vector<GradCheckModelSpec> standard_gradcheck_models();

/// Random model and token sequence (clipping disabled); loss is the mean cross-entropy over all
/// positions against random targets.
GradCheckReport gradcheck_model(const GradCheckModelSpec& spec, std::uint64_t seed, double step = 1e-6);

}  // namespace xlstm
