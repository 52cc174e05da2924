// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace xlstm {

#ifdef XLSTM_FLOAT32
using Scalar = float;
#else
using Scalar = double;
#endif

using Shape = std::vector<std::size_t>;

/// Cache-line aligned storage. Fixed alignment keeps SIMD reduction order (and so results)
/// independent of where the allocator places a buffer.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() noexcept = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t n) noexcept { ::operator delete(p, n * sizeof(T), kAlign); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

using ScalarBuffer = std::vector<Scalar, AlignedAllocator<Scalar>>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// Dense row-major array. Rank 0 is not used; an empty tensor has rank 0 and size 0.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Scalar fill = Scalar(0));
  Tensor(Shape shape, std::vector<Scalar> values);

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }
  static Tensor vector(std::initializer_list<Scalar> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<Scalar> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  Scalar* data() noexcept { return data_.data(); }
  const Scalar* data() const noexcept { return data_.data(); }
  std::span<Scalar> values() noexcept { return data_; }
  std::span<const Scalar> values() const noexcept { return data_; }

  Scalar& operator[](std::size_t i) noexcept { return data_[i]; }
  Scalar operator[](std::size_t i) const noexcept { return data_[i]; }
  Scalar& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * shape_[1] + j]; }
  Scalar operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * shape_[1] + j]; }
  Scalar& operator()(std::size_t i, std::size_t j, std::size_t k) noexcept {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  Scalar operator()(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  /// Number of rows when viewed as a matrix whose columns are the last axis.
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept { return shape_.empty() ? 0 : shape_.back(); }
  std::span<Scalar> row(std::size_t r) noexcept { return {data_.data() + r * cols(), cols()}; }
  std::span<const Scalar> row(std::size_t r) const noexcept { return {data_.data() + r * cols(), cols()}; }

  Tensor reshaped(Shape shape) const;
  void fill(Scalar value) noexcept;
  void set_zero() noexcept { fill(Scalar(0)); }
  bool all_finite() const noexcept;
  /// Index of the first non-finite entry, or size() when all are finite.
  std::size_t first_non_finite() const noexcept;
  Scalar max_abs() const noexcept;

  Tensor& operator+=(const Tensor& other);
  Tensor& operator-=(const Tensor& other);
  Tensor& operator*=(Scalar s) noexcept;
  /// this += alpha * other
  void axpy(Scalar alpha, const Tensor& other);

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  ScalarBuffer data_;
};

Tensor operator+(Tensor a, const Tensor& b);
Tensor operator-(Tensor a, const Tensor& b);
Tensor operator*(Tensor a, Scalar s);

/// Throws ShapeError unless `t` has exactly `expected` shape.
void require_shape(const Tensor& t, const Shape& expected, const char* what);

}  // namespace xlstm
