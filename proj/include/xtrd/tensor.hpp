/* Copyright 2026 The xtrd Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace xtrd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Raised when a forward computation produces NaN/Inf, or a loss receives them.
class NumericError : public Error {
 public:
  using Error::Error;
};

enum class DType : std::uint8_t { kFloat32 = 0, kFloat64 = 1 };

template <typename T>
constexpr DType dtype_of() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>,
                "xtrd tensors hold float or double");
  return std::is_same_v<T, float> ? DType::kFloat32 : DType::kFloat64;
}

inline const char* dtype_name(DType d) {
  return d == DType::kFloat32 ? "float32" : "float64";
}

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream oss;
  oss << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) oss << "x";
    oss << s[i];
  }
  oss << "]";
  return oss.str();
}

/// Dense row-major array. A value type: copies are deep, operations never
/// alias their inputs.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {
    check_extents();
  }

  Tensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_extents();
    if (shape_numel(shape_) != data_.size()) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
    }
  }

  /// Builds a 2-D tensor from nested rows, mostly for tests.
  static Tensor matrix(std::initializer_list<std::initializer_list<T>> rows) {
    std::vector<T> data;
    std::size_t cols = rows.size() ? rows.begin()->size() : 0;
    for (const auto& r : rows) {
      if (r.size() != cols) throw ShapeError("ragged matrix literal");
      data.insert(data.end(), r.begin(), r.end());
    }
    return Tensor({rows.size(), cols}, std::move(data));
  }

  static Tensor vector(std::initializer_list<T> values) {
    return Tensor({values.size()}, std::vector<T>(values));
  }

  static Tensor scalar(T v) { return Tensor({1}, std::vector<T>{v}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  /// Extent of the last axis; the row width for row-wise kernels.
  std::size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }
  /// Product of all leading axes.
  std::size_t rows() const { return cols() ? numel() / cols() : 0; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }
  const T& at(std::size_t i, std::size_t j) const {
    return data_[i * cols() + j];
  }

  std::span<T> row(std::size_t i) {
    return std::span<T>(data_).subspan(i * cols(), cols());
  }
  std::span<const T> row(std::size_t i) const {
    return std::span<const T>(data_).subspan(i * cols(), cols());
  }

  Tensor reshaped(Shape s) const {
    if (shape_numel(s) != numel()) {
      throw ShapeError("cannot reshape " + shape_str(shape_) + " to " +
                       shape_str(s));
    }
    return Tensor(std::move(s), data_);
  }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](T v) { return std::isfinite(v); });
  }

  T sum() const { return std::accumulate(data_.begin(), data_.end(), T(0)); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  /// Bitwise-equal shape and contents.
  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void check_extents() const {
    for (auto e : shape_) {
      if (e == 0) throw ShapeError("tensor extents must be positive");
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("max_abs_diff shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
  T m = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

}  // namespace xtrd
