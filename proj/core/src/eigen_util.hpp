// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include "xlstm/tensor.hpp"

namespace xlstm::detail {

using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;
using StridedMap = Eigen::Map<RowMatrix, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMatrix, 0, Eigen::OuterStride<>>;
using VecMap = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>;
using ConstVecMap = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>;

inline MatMap as_matrix(Tensor& t) { return MatMap(t.data(), t.rows(), t.cols()); }
inline ConstMatMap as_matrix(const Tensor& t) { return ConstMatMap(t.data(), t.rows(), t.cols()); }
inline MatMap as_matrix(Tensor& t, std::size_t rows, std::size_t cols) { return MatMap(t.data(), rows, cols); }
inline ConstMatMap as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  return ConstMatMap(t.data(), rows, cols);
}

}  // namespace xlstm::detail
