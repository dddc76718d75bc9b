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
#include <memory>
#include <tuple>
#include <span>
#include <vector>

#include "xtrd/autograd.hpp"
#include "xtrd/kernels.hpp"

namespace xtrd {

inline constexpr int kBlank = 0;

template <typename T>
struct RnntResult {
  T nll = 0;
  Tensor<T> grad;  // d nll / d logits, same shape as logits
};

namespace detail {

inline void check_rnnt_inputs(const Shape& s, std::span<const int> target) {
  if (s.size() != 3)
    throw ShapeError("transducer logits must be [T x (U+1) x V], got " + shape_str(s));
  if (s[1] != target.size() + 1)
    throw ShapeError("logits have " + std::to_string(s[1]) + " label positions for a target of " +
                     std::to_string(target.size()) + " tokens");
  for (int y : target) {
    if (y == kBlank) throw Error("target contains the blank token");
    if (y < 0 || static_cast<std::size_t>(y) >= s[2])
      throw Error("target token " + std::to_string(y) + " outside vocabulary");
  }
}

}  // namespace detail

/// Exact transducer negative log-likelihood with the analytic gradient from the
/// forward (alpha) and backward (beta) lattice recursions in log space.
template <typename T>
RnntResult<T> rnnt_loss(const Tensor<T>& logits, std::span<const int> target) {
  detail::check_rnnt_inputs(logits.shape(), target);
  if (!logits.all_finite()) throw NumericError("transducer logits contain NaN/Inf");
  const std::size_t nt = logits.dim(0), nu = logits.dim(1), nv = logits.dim(2);
  const std::size_t U = nu - 1;
  constexpr T kNegInf = -std::numeric_limits<T>::infinity();

  const Tensor<T> lp = kernels::log_softmax(logits);
  auto at = [&](std::size_t t, std::size_t u, std::size_t k) { return lp[(t * nu + u) * nv + k]; };
  auto blank = [&](std::size_t t, std::size_t u) { return at(t, u, kBlank); };
  auto label = [&](std::size_t t, std::size_t u) {
    return at(t, u, static_cast<std::size_t>(target[u]));
  };

  std::vector<T> alpha(nt * nu, kNegInf), beta(nt * nu, kNegInf);
  alpha[0] = 0;
  for (std::size_t t = 0; t < nt; ++t) {
    for (std::size_t u = 0; u < nu; ++u) {
      if (t == 0 && u == 0) continue;
      T a = kNegInf;
      if (t > 0) a = alpha[(t - 1) * nu + u] + blank(t - 1, u);
      if (u > 0) a = kernels::log_add_exp(a, alpha[t * nu + u - 1] + label(t, u - 1));
      alpha[t * nu + u] = a;
    }
  }
  for (std::size_t t = nt; t-- > 0;) {
    for (std::size_t u = nu; u-- > 0;) {
      if (t == nt - 1 && u == U) {
        beta[t * nu + u] = blank(t, u);
        continue;
      }
      T b = kNegInf;
      if (t + 1 < nt) b = beta[(t + 1) * nu + u] + blank(t, u);
      if (u < U) b = kernels::log_add_exp(b, beta[t * nu + u + 1] + label(t, u));
      beta[t * nu + u] = b;
    }
  }

  const T log_z = alpha[(nt - 1) * nu + U] + blank(nt - 1, U);
  RnntResult<T> res;
  res.nll = -log_z;
  res.grad = Tensor<T>(logits.shape());
  for (std::size_t t = 0; t < nt; ++t) {
    for (std::size_t u = 0; u < nu; ++u) {
      const T a = alpha[t * nu + u];
      const T occ = std::exp(a + beta[t * nu + u] - log_z);
      T* g = &res.grad[(t * nu + u) * nv];
      for (std::size_t k = 0; k < nv; ++k) g[k] = std::exp(at(t, u, k)) * occ;
      if (a == kNegInf) continue;
      const T next_blank = t + 1 < nt ? beta[(t + 1) * nu + u] : (u == U ? T(0) : kNegInf);
      g[kBlank] -= std::exp(a + blank(t, u) + next_blank - log_z);
      if (u < U)
        g[static_cast<std::size_t>(target[u])] -=
            std::exp(a + label(t, u) + beta[t * nu + u + 1] - log_z);
    }
  }
  return res;
}

template <typename T>
struct BruteForceResult {
  T nll = 0;
  std::size_t paths = 0;
};

/// Enumerates every alignment (T-1 frame advances interleaved with U labels,
/// then the final blank) and log-sum-exps their scores. Test oracle only.
template <typename T>
BruteForceResult<T> rnnt_loss_bruteforce(const Tensor<T>& logits, std::span<const int> target) {
  detail::check_rnnt_inputs(logits.shape(), target);
  const std::size_t nt = logits.dim(0), nu = logits.dim(1), nv = logits.dim(2);
  const std::size_t U = nu - 1;
  if (nt > 8 || U > 6) throw Error("brute-force instance too large (T <= 8, U <= 6)");
  const Tensor<T> lp = kernels::log_softmax(logits);
  auto at = [&](std::size_t t, std::size_t u, std::size_t k) { return lp[(t * nu + u) * nv + k]; };

  BruteForceResult<T> res;
  T total = -std::numeric_limits<T>::infinity();
  // Depth-first over (t, u) with the accumulated path score.
  std::vector<std::tuple<std::size_t, std::size_t, T>> stack{{0, 0, T(0)}};
  while (!stack.empty()) {
    auto [t, u, s] = stack.back();
    stack.pop_back();
    if (t == nt - 1 && u == U) {
      total = kernels::log_add_exp(total, s + at(t, u, kBlank));
      ++res.paths;
      continue;
    }
    if (t + 1 < nt) stack.emplace_back(t + 1, u, s + at(t, u, kBlank));
    if (u < U) stack.emplace_back(t, u + 1, s + at(t, u, static_cast<std::size_t>(target[u])));
  }
  res.nll = -total;
  return res;
}

namespace ag {

/// Scalar transducer loss node over logits [T x (U+1) x V].
template <typename T>
Var<T> rnnt_loss(Var<T> logits, std::vector<int> target) {
  auto& g = *logits.graph;
  auto result = std::make_shared<RnntResult<T>>(xtrd::rnnt_loss(logits.value(), target));
  auto fwd = [l = logits.id, target](const Graph<T>& g) {
    return Tensor<T>::scalar(xtrd::rnnt_loss(g.value(l), target).nll);
  };
  auto bwd = [l = logits.id, result](Graph<T>& g, const Tensor<T>& dy) {
    g.accumulate(l, kernels::scale(result->grad, dy[0]));
  };
  return g.push("rnnt_loss", {logits.id}, Tensor<T>::scalar(result->nll), bwd, fwd);
}

}  // namespace ag
}  // namespace xtrd
