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
#include <cstdint>
#include <map>
#include <string>

#include "xtrd/params.hpp"

namespace xtrd {

struct ScheduleConfig {
  double base_lr = 1.25e-3;
  std::size_t warmup_steps = 500;
  double epoch_decay = 0.9;
};

/// Linear warmup to base_lr, then inverse-square-root decay in steps times a
/// geometric per-epoch factor:
///   lr = base * min(step / warmup, 1) * sqrt(warmup / max(step, warmup)) * decay^epoch
inline double lr_at(std::size_t step, std::size_t epoch, const ScheduleConfig& cfg) {
  if (step < 1) throw Error("learning-rate schedule steps start at 1");
  if (cfg.warmup_steps < 1) throw Error("warmup_steps must be >= 1");
  const double s = double(step), w = double(cfg.warmup_steps);
  const double warm = std::min(s / w, 1.0);
  const double decay = std::sqrt(w / std::max(s, w)) * std::pow(cfg.epoch_decay, double(epoch));
  return cfg.base_lr * warm * decay;
}

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
};

template <typename T>
struct OptimState {
  std::map<std::string, Tensor<T>> m;
  std::map<std::string, Tensor<T>> v;
  std::uint64_t step = 0;

  friend bool operator==(const OptimState&, const OptimState&) = default;
};

template <typename T>
using GradMap = std::map<std::string, Tensor<T>>;

/// Scales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
template <typename T>
double clip_grad_norm(GradMap<T>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [_, g] : grads)
    for (T v : g.storage()) sq += double(v) * double(v);
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const T f = T(max_norm / norm);
    for (auto& [_, g] : grads)
      for (T& v : g.storage()) v *= f;
  }
  return norm;
}

/// One Adam update with bias correction. Returns false, leaving parameters and
/// state untouched, when any gradient is non-finite.
template <typename T>
bool adam_step(ParameterStore<T>& params, const GradMap<T>& grads, OptimState<T>& state, double lr,
               const AdamConfig& cfg = {}) {
  for (const auto& [name, g] : grads) {
    if (g.shape() != params.get(name).shape())
      throw ShapeError("gradient for '" + name + "' has shape " + shape_str(g.shape()));
    if (!g.all_finite()) return false;
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, double(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, double(state.step));
  for (const auto& [name, g] : grads) {
    Tensor<T>& p = params.get(name);
    auto [mit, mnew] = state.m.try_emplace(name, p.shape());
    auto [vit, vnew] = state.v.try_emplace(name, p.shape());
    Tensor<T>& m = mit->second;
    Tensor<T>& v = vit->second;
    for (std::size_t i = 0; i < p.numel(); ++i) {
      m[i] = T(cfg.beta1 * double(m[i]) + (1.0 - cfg.beta1) * double(g[i]));
      v[i] = T(cfg.beta2 * double(v[i]) + (1.0 - cfg.beta2) * double(g[i]) * double(g[i]));
      const double mhat = double(m[i]) / c1;
      const double vhat = double(v[i]) / c2;
      p[i] = T(double(p[i]) - lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
  return true;
}

}  // namespace xtrd
