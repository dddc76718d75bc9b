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
#include <map>
#include <random>
#include <string>
#include <vector>

#include "xtrd/autograd.hpp"
#include "xtrd/tensor.hpp"

namespace xtrd {

/// Named model parameters, addressed hierarchically ("encoder.layer0.attn.wq").
template <typename T>
class ParameterStore {
 public:
  void add(const std::string& name, Tensor<T> value) {
    if (!tensors_.emplace(name, std::move(value)).second)
      throw Error("duplicate parameter '" + name + "'");
  }

  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }

  const Tensor<T>& get(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw Error("unknown parameter '" + name + "'");
    return it->second;
  }
  Tensor<T>& get(const std::string& name) {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw Error("unknown parameter '" + name + "'");
    return it->second;
  }

  const std::map<std::string, Tensor<T>>& all() const { return tensors_; }
  std::map<std::string, Tensor<T>>& all() { return tensors_; }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : tensors_) n += t.numel();
    return n;
  }

  friend bool operator==(const ParameterStore&, const ParameterStore&) = default;

 private:
  std::map<std::string, Tensor<T>> tensors_;
};

/// Places parameters on a graph on first use, so each forward pass only
/// copies what it touches.
template <typename T>
class Binder {
 public:
  Binder(Graph<T>& g, const ParameterStore<T>& store) : g_(g), store_(store) {}

  Var<T> operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    Var<T> v = g_.leaf(store_.get(name), name);
    bound_.emplace(name, v);
    return v;
  }

  Graph<T>& graph() { return g_; }

 private:
  Graph<T>& g_;
  const ParameterStore<T>& store_;
  std::map<std::string, Var<T>> bound_;
};

/// Glorot-uniform initialization for a [fan_in x fan_out] matrix (or any
/// tensor whose last axis is fan_out).
template <typename T, typename Rng>
Tensor<T> glorot(Shape shape, Rng& rng) {
  const std::size_t fan_out = shape.back();
  const std::size_t fan_in = shape_numel(shape) / fan_out;
  const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor<T> t(std::move(shape));
  for (auto& v : t.storage()) v = T(dist(rng));
  return t;
}

template <typename T, typename Rng>
Tensor<T> normal(Shape shape, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor<T> t(std::move(shape));
  for (auto& v : t.storage()) v = T(dist(rng));
  return t;
}

}  // namespace xtrd
