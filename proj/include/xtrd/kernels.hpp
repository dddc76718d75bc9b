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

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>

#include "xtrd/bool_mask.hpp"
#include "xtrd/tensor.hpp"

// Plain forward kernels. The autograd layer wraps these; the streaming encoder
// and the decoders call them directly. Every kernel computes each output row
// from its own input row in a fixed order, so results do not depend on how
// many rows are processed together.
namespace xtrd::kernels {

/// Additive score used for disallowed attention entries before normalization.
template <typename T>
constexpr T kMaskFill = T(-1e9);

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.rank() == 2 && b.rank() == 2, "matmul expects 2-D operands");
  require(a.dim(1) == b.dim(0), "matmul inner extents differ: " +
                                    shape_str(a.shape()) + " x " +
                                    shape_str(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    T* o = &out[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      const T* br = &b[p * n];
      for (std::size_t j = 0; j < n; ++j) o[j] += av * br[j];
    }
  }
  return out;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  require(a.rank() == 2, "transpose expects a 2-D tensor");
  const std::size_t m = a.dim(0), n = a.dim(1);
  Tensor<T> out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  return out;
}

template <typename T, typename F>
Tensor<T> map(const Tensor<T>& a, F f) {
  Tensor<T> out = a;
  for (auto& v : out.storage()) v = f(v);
  return out;
}

template <typename T, typename F>
Tensor<T> zip(const Tensor<T>& a, const Tensor<T>& b, F f) {
  require(a.shape() == b.shape(), "elementwise shape mismatch " +
                                      shape_str(a.shape()) + " vs " +
                                      shape_str(b.shape()));
  Tensor<T> out = a;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return zip(a, b, [](T x, T y) { return x + y; });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return zip(a, b, [](T x, T y) { return x * y; });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  return map(a, [c](T x) { return x * c; });
}

/// a[..., n] + b[n], broadcasting b over the leading axes.
template <typename T>
Tensor<T> add_row(const Tensor<T>& a, const Tensor<T>& b) {
  require(b.rank() == 1 && b.dim(0) == a.cols(),
          "add_row: bias " + shape_str(b.shape()) + " vs " +
              shape_str(a.shape()));
  Tensor<T> out = a;
  const std::size_t n = a.cols();
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] += b[j];
  return out;
}

template <typename T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
}

template <typename T>
T gelu_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
  const T pdf = std::exp(T(-0.5) * x * x) / std::sqrt(T(2) * std::numbers::pi_v<T>);
  return cdf + x * pdf;
}

template <typename T>
constexpr T kLayerNormEps = T(1e-5);

/// Row-wise normalization; also returns per-row mean and reciprocal stddev.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain,
                     const Tensor<T>& bias, std::vector<T>* mean_out = nullptr,
                     std::vector<T>* rstd_out = nullptr) {
  const std::size_t d = x.cols();
  require(d >= 2, "layer_norm needs at least 2 features");
  require(gain.numel() == d && bias.numel() == d,
          "layer_norm affine parameters must have width " + std::to_string(d));
  Tensor<T> y(x.shape());
  if (mean_out) mean_out->resize(x.rows());
  if (rstd_out) rstd_out->resize(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto xr = x.row(r);
    T mean = 0;
    for (T v : xr) mean += v;
    mean /= T(d);
    T var = 0;
    for (T v : xr) var += (v - mean) * (v - mean);
    var /= T(d);
    const T rstd = T(1) / std::sqrt(var + kLayerNormEps<T>);
    for (std::size_t j = 0; j < d; ++j)
      y[r * d + j] = (xr[j] - mean) * rstd * gain[j] + bias[j];
    if (mean_out) (*mean_out)[r] = mean;
    if (rstd_out) (*rstd_out)[r] = rstd;
  }
  return y;
}

/// Softmax over the last axis without a mask.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  const std::size_t n = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const T* s = &x[r * n];
    T* o = &y[r * n];
    T m = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < n; ++j) m = std::max(m, s[j]);
    T sum = 0;
    for (std::size_t j = 0; j < n; ++j) {
      o[j] = std::exp(s[j] - m);
      sum += o[j];
    }
    for (std::size_t j = 0; j < n; ++j) o[j] /= sum;
  }
  return y;
}

/// Softmax over the last axis after adding kMaskFill at disallowed entries.
/// The mask covers the trailing two axes and is shared by any leading axes.
/// Disallowed entries are then set to exactly zero.
template <typename T>
Tensor<T> masked_softmax(const Tensor<T>& x, const BoolMask& mask) {
  require(x.rank() >= 2, "masked_softmax expects [..., rows, cols] scores");
  const std::size_t q = x.dim(x.rank() - 2), n = x.cols();
  require(mask.rows() == q && mask.cols() == n,
          "mask " + std::to_string(mask.rows()) + "x" +
              std::to_string(mask.cols()) + " does not match scores " +
              shape_str(x.shape()));
  for (std::size_t i = 0; i < q; ++i) {
    if (mask.count_row(i) == 0) {
      throw Error("masked_softmax: query row " + std::to_string(i) +
                  " has no allowed key (malformed mask)");
    }
  }
  Tensor<T> y(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const std::size_t i = r % q;
    const T* s = &x[r * n];
    T* o = &y[r * n];
    T m = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      o[j] = s[j] + (mask(i, j) ? T(0) : kMaskFill<T>);
      m = std::max(m, o[j]);
    }
    T sum = 0;
    for (std::size_t j = 0; j < n; ++j) {
      o[j] = std::exp(o[j] - m);
      sum += o[j];
    }
    for (std::size_t j = 0; j < n; ++j) o[j] = mask(i, j) ? o[j] / sum : T(0);
  }
  return y;
}

/// Numerically stable log-softmax over the last axis.
template <typename T>
Tensor<T> log_softmax(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  const std::size_t n = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const T* s = &x[r * n];
    T m = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < n; ++j) m = std::max(m, s[j]);
    T sum = 0;
    for (std::size_t j = 0; j < n; ++j) sum += std::exp(s[j] - m);
    const T lse = m + std::log(sum);
    for (std::size_t j = 0; j < n; ++j) y[r * n + j] = s[j] - lse;
  }
  return y;
}

/// Causal 1-D convolution: x [T x d_in], kernel [k x d_in x d_out]. Tap k-1
/// reads the current step; taps before the sequence start read zero.
template <typename T>
Tensor<T> conv1d_causal(const Tensor<T>& x, const Tensor<T>& kernel) {
  require(x.rank() == 2, "conv1d expects x [T x d_in]");
  require(kernel.rank() == 3 && kernel.dim(1) == x.dim(1),
          "conv1d kernel " + shape_str(kernel.shape()) + " incompatible with " +
              shape_str(x.shape()));
  const std::size_t len = x.dim(0), din = x.dim(1), k = kernel.dim(0),
                    dout = kernel.dim(2);
  Tensor<T> out({len, dout});
  for (std::size_t t = 0; t < len; ++t) {
    T* o = &out[t * dout];
    for (std::size_t tap = 0; tap < k; ++tap) {
      const std::ptrdiff_t src =
          static_cast<std::ptrdiff_t>(t + tap) - static_cast<std::ptrdiff_t>(k - 1);
      if (src < 0) continue;
      const T* xr = &x[static_cast<std::size_t>(src) * din];
      for (std::size_t i = 0; i < din; ++i) {
        const T xv = xr[i];
        const T* kr = &kernel[(tap * din + i) * dout];
        for (std::size_t j = 0; j < dout; ++j) o[j] += xv * kr[j];
      }
    }
  }
  return out;
}

/// out[t * U + u] = a[t] + b[u] for a [T x H], b [U x H].
template <typename T>
Tensor<T> pairwise_add(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(1),
          "pairwise_add expects [T x H] and [U x H]");
  const std::size_t nt = a.dim(0), nu = b.dim(0), h = a.dim(1);
  Tensor<T> out({nt * nu, h});
  for (std::size_t t = 0; t < nt; ++t)
    for (std::size_t u = 0; u < nu; ++u)
      for (std::size_t j = 0; j < h; ++j)
        out[(t * nu + u) * h + j] = a[t * h + j] + b[u * h + j];
  return out;
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& a, std::size_t begin, std::size_t count) {
  require(a.rank() == 2 && begin + count <= a.dim(0) && count > 0,
          "slice_rows out of range");
  const std::size_t n = a.dim(1);
  return Tensor<T>({count, n},
                   std::vector<T>(a.storage().begin() + begin * n,
                                  a.storage().begin() + (begin + count) * n));
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& a, std::size_t begin, std::size_t count) {
  require(a.rank() == 2 && begin + count <= a.dim(1) && count > 0,
          "slice_cols out of range");
  const std::size_t m = a.dim(0), n = a.dim(1);
  Tensor<T> out({m, count});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = a[i * n + begin + j];
  return out;
}

template <typename T>
Tensor<T> concat_rows(std::span<const Tensor<T>> parts) {
  require(!parts.empty(), "concat_rows of nothing");
  const std::size_t n = parts[0].cols();
  std::size_t m = 0;
  for (const auto& p : parts) {
    require(p.rank() == 2 && p.dim(1) == n, "concat_rows width mismatch");
    m += p.dim(0);
  }
  std::vector<T> data;
  data.reserve(m * n);
  for (const auto& p : parts) data.insert(data.end(), p.storage().begin(), p.storage().end());
  return Tensor<T>({m, n}, std::move(data));
}

template <typename T>
Tensor<T> concat_cols(std::span<const Tensor<T>> parts) {
  require(!parts.empty(), "concat_cols of nothing");
  const std::size_t m = parts[0].dim(0);
  std::size_t n = 0;
  for (const auto& p : parts) {
    require(p.rank() == 2 && p.dim(0) == m, "concat_cols height mismatch");
    n += p.dim(1);
  }
  Tensor<T> out({m, n});
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.dim(1);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) out[i * n + off + j] = p[i * w + j];
    off += w;
  }
  return out;
}

template <typename T>
T log_add_exp(T a, T b) {
  if (a == -std::numeric_limits<T>::infinity()) return b;
  if (b == -std::numeric_limits<T>::infinity()) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

}  // namespace xtrd::kernels
