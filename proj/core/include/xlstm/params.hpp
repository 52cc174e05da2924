// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "xlstm/tensor.hpp"

namespace xlstm {

/// Named handle to a parameter tensor. Parameter structs and their gradient twins (same type,
/// same shapes) list their tensors in the same declaration order, so two lists can be zipped.
struct ParamRef {
  std::string name;
  Tensor* tensor;
  bool weight_decay = true;
};

using ParamList = std::vector<ParamRef>;

std::size_t parameter_count(const ParamList& params);
void zero_all(const ParamList& params);

/// Throws ShapeError unless both lists have the same names and shapes in the same order.
void require_congruent(const ParamList& a, const ParamList& b, const char* what);

/// Generic helpers for any type exposing `void collect(ParamList&, const std::string& prefix)`.
template <class P>
ParamList param_list(P& p, const std::string& prefix = "") {
  ParamList out;
  p.collect(out, prefix);
  return out;
}

template <class P>
std::size_t parameter_count(const P& p) {
  // collect() only hands out pointers; counting never writes through them.
  return parameter_count(param_list(const_cast<P&>(p)));
}

/// A zero-valued copy of `p` (used as the gradient accumulator).
template <class P>
P zeros_like_params(const P& p) {
  P g = p;
  zero_all(param_list(g));
  return g;
}

/// `acc += other` for two parameter structs of the same type.
template <class P>
void accumulate_params(P& acc, const P& other) {
  ParamList a = param_list(acc);
  ParamList b = param_list(const_cast<P&>(other));
  require_congruent(a, b, "accumulate_params");
  for (std::size_t i = 0; i < a.size(); ++i) *a[i].tensor += *b[i].tensor;
}

}  // namespace xlstm
