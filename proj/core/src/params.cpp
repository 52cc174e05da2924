// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include "xlstm/params.hpp"

#include "xlstm/error.hpp"

namespace xlstm {

std::size_t parameter_count(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor->size();
  return n;
}

void zero_all(const ParamList& params) {
  for (const auto& p : params) p.tensor->set_zero();
}

void require_congruent(const ParamList& a, const ParamList& b, const char* what) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(what) + ": parameter lists differ in length (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name || a[i].tensor->shape() != b[i].tensor->shape()) {
      throw ShapeError(std::string(what) + ": parameter '" + a[i].name + "' " + shape_string(a[i].tensor->shape()) +
                       " does not match '" + b[i].name + "' " + shape_string(b[i].tensor->shape()));
    }
  }
}

}  // namespace xlstm
