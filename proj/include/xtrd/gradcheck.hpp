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
#include <functional>
#include <vector>

#include "xtrd/autograd.hpp"

namespace xtrd {

/// Builds a scalar from differentiable leaves placed on `g`.
using ScalarFn = std::function<Var<double>(Graph<double>& g,
                                           const std::vector<Var<double>>& leaves)>;

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
};

/// |a - n| / max(|a|, |n|, 1e-8)
inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

/// Compares reverse-mode gradients of `f` against central differences taken
/// coordinate by coordinate. `order` 4 uses the five-point stencil, whose
/// smaller truncation error allows a larger step and so less cancellation
/// noise on losses of large magnitude.
inline GradcheckResult finite_difference_gradcheck(const ScalarFn& f,
                                                   std::vector<Tensor<double>> params,
                                                   double step = 1e-5, int order = 2) {
  if (order != 2 && order != 4) throw Error("finite difference order must be 2 or 4");
  auto evaluate = [&](const std::vector<Tensor<double>>& ps) {
    Graph<double> g(false);
    std::vector<Var<double>> leaves;
    for (const auto& p : ps) leaves.push_back(g.leaf(p));
    return f(g, leaves).value()[0];
  };

  Graph<double> g;
  std::vector<Var<double>> leaves;
  for (const auto& p : params) leaves.push_back(g.leaf(p));
  g.backward(f(g, leaves));

  GradcheckResult res;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const Tensor<double> analytic = g.grad(leaves[p]);
    for (std::size_t i = 0; i < params[p].numel(); ++i) {
      const double orig = params[p][i];
      auto at = [&](double delta) {
        params[p][i] = orig + delta;
        const double v = evaluate(params);
        params[p][i] = orig;
        return v;
      };
      const double numeric =
          order == 2 ? (at(step) - at(-step)) / (2.0 * step)
                     : (8.0 * (at(step) - at(-step)) - (at(2 * step) - at(-2 * step))) / (12.0 * step);
      const double err = relative_error(analytic[i], numeric);
      if (err > res.max_rel_error) res = {err, p, i};
    }
  }
  return res;
}

}  // namespace xtrd
