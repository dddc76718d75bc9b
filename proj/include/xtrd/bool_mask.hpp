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

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "xtrd/tensor.hpp"

namespace xtrd {

/// Row-major query x key allowance matrix. Entry (i, j) true means query i
/// may attend key j.
class BoolMask {
 public:
  BoolMask() = default;
  BoolMask(std::size_t rows, std::size_t cols, bool fill = false)
      : rows_(rows), cols_(cols), bits_(rows * cols, fill ? 1 : 0) {}

  static BoolMask all_true(std::size_t rows, std::size_t cols) {
    return BoolMask(rows, cols, true);
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  bool operator()(std::size_t i, std::size_t j) const {
    return bits_[i * cols_ + j] != 0;
  }
  void set(std::size_t i, std::size_t j, bool v) {
    bits_[i * cols_ + j] = v ? 1 : 0;
  }

  std::size_t count_row(std::size_t i) const {
    std::size_t n = 0;
    for (std::size_t j = 0; j < cols_; ++j) n += bits_[i * cols_ + j];
    return n;
  }

  bool all() const {
    for (auto b : bits_) {
      if (!b) return false;
    }
    return true;
  }

  friend bool operator==(const BoolMask&, const BoolMask&) = default;

  /// One line per query row, '#' for allowed and '.' for masked.
  std::string to_ascii() const {
    std::string out;
    out.reserve(rows_ * (cols_ + 1));
    for (std::size_t i = 0; i < rows_; ++i) {
      for (std::size_t j = 0; j < cols_; ++j) out += (*this)(i, j) ? '#' : '.';
      out += '\n';
    }
    return out;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

}  // namespace xtrd
