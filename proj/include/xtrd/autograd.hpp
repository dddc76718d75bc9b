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
#include <functional>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "xtrd/kernels.hpp"
#include "xtrd/tensor.hpp"

namespace xtrd {

template <typename T>
class Graph;

/// Handle to a node on a Graph. Cheap to copy; valid while the graph lives.
template <typename T>
struct Var {
  Graph<T>* graph = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const { return graph->value(id); }
  const Shape& shape() const { return value().shape(); }
};

/// Reverse-mode tape. Nodes are appended in execution order, so every input id
/// is smaller than its consumer's id. A graph built with `record = false`
/// keeps only forward values and is what inference paths use.
template <typename T>
class Graph {
 public:
  using Backward = std::function<void(Graph&, const Tensor<T>& grad_out)>;
  using Forward = std::function<Tensor<T>(const Graph&)>;

  struct Entry {
    std::string op;
    std::vector<std::size_t> inputs;
    Tensor<T> value;
    bool requires_grad = false;
    Backward backward;
    Forward forward;
  };

  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return record_; }
  void set_check_finite(bool on) { check_finite_ = on; }

  Var<T> constant(Tensor<T> v) {
    return push("constant", {}, std::move(v), nullptr, nullptr);
  }

  /// Differentiable leaf. Named leaves are reported by gradients().
  Var<T> leaf(Tensor<T> v, const std::string& name = {}) {
    Var<T> out = push("leaf", {}, std::move(v), nullptr, nullptr);
    entries_[out.id].requires_grad = record_;
    if (!name.empty()) names_[name] = out.id;
    return out;
  }

  const Tensor<T>& value(std::size_t id) const { return entries_.at(id).value; }
  const Entry& entry(std::size_t id) const { return entries_.at(id); }
  std::size_t size() const { return entries_.size(); }
  bool requires_grad(std::size_t id) const { return entries_[id].requires_grad; }

  /// Appends a node. `backward` receives d(root)/d(this) and must call
  /// accumulate() for each differentiable input.
  Var<T> push(std::string op, std::vector<std::size_t> inputs, Tensor<T> value,
              Backward backward, Forward forward) {
    if (check_finite_ && !value.all_finite()) {
      throw NumericError("non-finite values produced by op '" + op + "'");
    }
    Entry e;
    e.op = std::move(op);
    e.value = std::move(value);
    if (record_) {
      for (auto in : inputs) e.requires_grad = e.requires_grad || entries_[in].requires_grad;
      e.inputs = std::move(inputs);
      if (e.requires_grad) e.backward = std::move(backward);
      e.forward = std::move(forward);
    }
    entries_.push_back(std::move(e));
    return Var<T>{this, entries_.size() - 1};
  }

  /// For ops whose gradient reads their own output value.
  void set_backward(std::size_t id, Backward fn) {
    if (record_ && entries_[id].requires_grad) entries_[id].backward = std::move(fn);
  }

  void accumulate(std::size_t id, const Tensor<T>& g) {
    if (!entries_[id].requires_grad) return;
    auto& acc = grads_[id];
    if (acc.empty()) {
      acc = g;
    } else {
      if (acc.shape() != g.shape()) {
        throw ShapeError("gradient shape mismatch at node " + std::to_string(id));
      }
      for (std::size_t i = 0; i < acc.numel(); ++i) acc[i] += g[i];
    }
  }

  /// Reverse accumulation from a scalar root.
  void backward(Var<T> root) {
    if (!record_) throw Error("backward on a non-recording graph");
    if (root.value().numel() != 1) {
      throw ShapeError("backward root must be scalar, got " +
                       shape_str(root.shape()));
    }
    grads_.assign(entries_.size(), Tensor<T>());
    grads_[root.id] = Tensor<T>(root.shape(), T(1));
    for (std::size_t id = root.id + 1; id-- > 0;) {
      auto& e = entries_[id];
      if (!e.backward || grads_[id].empty()) continue;
      e.backward(*this, grads_[id]);
    }
  }

  /// Gradient of the last backward root with respect to node `v`; zeros when
  /// the node did not influence the root.
  Tensor<T> grad(Var<T> v) const { return grad(v.id); }
  Tensor<T> grad(std::size_t id) const {
    if (id < grads_.size() && !grads_[id].empty()) return grads_[id];
    return Tensor<T>(entries_.at(id).value.shape(), T(0));
  }

  /// Gradients of every named leaf.
  std::map<std::string, Tensor<T>> gradients() const {
    std::map<std::string, Tensor<T>> out;
    for (const auto& [name, id] : names_) out[name] = grad(id);
    return out;
  }

  /// Re-executes every recorded op from its recorded inputs.
  std::vector<Tensor<T>> replay() const {
    std::vector<Tensor<T>> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.forward ? e.forward(*this) : e.value);
    return out;
  }

 private:
  bool record_;
  bool check_finite_ = true;
  std::vector<Entry> entries_;
  std::vector<Tensor<T>> grads_;
  std::map<std::string, std::size_t> names_;
};

namespace ag {

namespace detail {
template <typename T>
Graph<T>& graph_of(std::initializer_list<Var<T>> vs) {
  Graph<T>* g = vs.begin()->graph;
  for (const auto& v : vs) {
    if (v.graph != g) throw Error("operands live on different graphs");
  }
  return *g;
}
}  // namespace detail

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  auto& g = detail::graph_of({a, b});
  auto fwd = [a = a.id, b = b.id](const Graph<T>& g) {
    return kernels::matmul(g.value(a), g.value(b));
  };
  auto bwd = [a = a.id, b = b.id](Graph<T>& g, const Tensor<T>& dy) {
    if (g.requires_grad(a)) g.accumulate(a, kernels::matmul(dy, kernels::transpose(g.value(b))));
    if (g.requires_grad(b)) g.accumulate(b, kernels::matmul(kernels::transpose(g.value(a)), dy));
  };
  return g.push("matmul", {a.id, b.id}, fwd(g), bwd, fwd);
}

template <typename T>
Var<T> transpose(Var<T> a) {
  auto& g = *a.graph;
  auto fwd = [a = a.id](const Graph<T>& g) { return kernels::transpose(g.value(a)); };
  auto bwd = [a = a.id](Graph<T>& g, const Tensor<T>& dy) {
    g.accumulate(a, kernels::transpose(dy));
  };
  return g.push("transpose", {a.id}, fwd(g), bwd, fwd);
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  auto& g = detail::graph_of({a, b});
  auto fwd = [a = a.id, b = b.id](const Graph<T>& g) {
    return kernels::add(g.value(a), g.value(b));
  };
  auto bwd = [a = a.id, b = b.id](Graph<T>& g, const Tensor<T>& dy) {
    g.accumulate(a, dy);
    g.accumulate(b, dy);
  };
  return g.push("add", {a.id, b.id}, fwd(g), bwd, fwd);
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  auto& g = detail::graph_of({a, b});
  auto fwd = [a = a.id, b = b.id](const Graph<T>& g) {
    return kernels::mul(g.value(a), g.value(b));
  };
  auto bwd = [a = a.id, b = b.id](Graph<T>& g, const Tensor<T>& dy) {
    g.accumulate(a, kernels::mul(dy, g.value(b)));
    g.accumulate(b, kernels::mul(dy, g.value(a)));
  };
  return g.push("mul", {a.id, b.id}, fwd(g), bwd, fwd);
}

template <typename T>
Var<T> scale(Var<T> a, T c) {
  auto& g = *a.graph;
  auto fwd = [a = a.id, c](const Graph<T>& g) { return kernels::scale(g.value(a), c); };
  auto bwd = [a = a.id, c](Graph<T>& g, const Tensor<T>& dy) {
    g.accumulate(a, kernels::scale(dy, c));
  };
  return g.push("scale", {a.id}, fwd(g), bwd, fwd);
}

template <typename T>
Var<T> add_row(Var<T> a, Var<T> bias) {
  auto& g = detail::graph_of({a, bias});
  auto fwd = [a = a.id, b = bias.id](const Graph<T>& g) {
    return kernels::add_row(g.value(a), g.value(b));
  };
  auto bwd = [a = a.id, b = bias.id](Graph<T>& g, const Tensor<T>& dy) {
    g.accumulate(a, dy);
    if (g.requires_grad(b)) {
      Tensor<T> db({dy.cols()});
      for (std::size_t r = 0; r < dy.rows(); ++r)
        for (std::size_t j = 0; j < dy.cols(); ++j) db[j] += dy[r * dy.cols() + j];
      g.accumulate(b, db);
    }
  };
  return g.push("add_row", {a.id, bias.id}, fwd(g), bwd, fwd);
}

/// x W + b for x [n x d_in], W [d_in x d_out], b [d_out].
template <typename T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> b) {
  return add_row(matmul(x, w), b);
}

template <typename T>
Var<T> tanh(Var<T> a) {
  auto& g = *a.graph;
  auto fwd = [a = a.id](const Graph<T>& g) {
    return kernels::map(g.value(a), [](T x) { return std::tanh(x); });
  };
  Var<T> out = g.push("tanh", {a.id}, fwd(g), nullptr, fwd);
  if (g.recording() && g.requires_grad(out.id)) {
    const std::size_t y = out.id;
    g.set_backward(y, [a = a.id, y](Graph<T>& g, const Tensor<T>& dy) {
          g.accumulate(a, kernels::zip(dy, g.value(y), [](T d, T v) { return d * (T(1) - v * v); }));
        });
  }
  return out;
}

template <typename T>
Var<T> relu(Var<T> a) {
  auto& g = *a.graph;
  auto fwd = [a = a.id](const Graph<T>& g) {
    return kernels::map(g.value(a), [](T x) { return x > T(0) ? x : T(0); });
  };
  auto bwd = [a = a.id](Graph<T>& g, const Tensor<T>& dy) {
    g.accumulate(a, kernels::zip(dy, g.value(a), [](T d, T x) { return x > T(0) ? d : T(0); }));
  };
  return g.push("relu", {a.id}, fwd(g), bwd, fwd);
}

template <typename T>
Var<T> gelu(Var<T> a) {
  auto& g = *a.graph;
  auto fwd = [a = a.id](const Graph<T>& g) {
    return kernels::map(g.value(a), [](T x) { return kernels::gelu(x); });
  };
  auto bwd = [a = a.id](Graph<T>& g, const Tensor<T>& dy) {
    g.accumulate(a, kernels::zip(dy, g.value(a), [](T d, T x) { return d * kernels::gelu_grad(x); }));
  };
  return g.push("gelu", {a.id}, fwd(g), bwd, fwd);
}

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias) {
  auto& g = detail::graph_of({x, gain, bias});
  auto fwd = [x = x.id, gn = gain.id, b = bias.id](const Graph<T>& g) {
    return kernels::layer_norm(g.value(x), g.value(gn), g.value(b));
  };
  auto bwd = [x = x.id, gn = gain.id, b = bias.id](Graph<T>& g, const Tensor<T>& dy) {
    const auto& xv = g.value(x);
    const auto& gv = g.value(gn);
    std::vector<T> mean, rstd;
    kernels::layer_norm(xv, gv, g.value(b), &mean, &rstd);
    const std::size_t d = xv.cols();
    Tensor<T> dx(xv.shape()), dg({d}), db({d});
    std::vector<T> xhat(d), dxhat(d);
    for (std::size_t r = 0; r < xv.rows(); ++r) {
      T m1 = 0, m2 = 0;
      for (std::size_t j = 0; j < d; ++j) {
        xhat[j] = (xv[r * d + j] - mean[r]) * rstd[r];
        const T dyv = dy[r * d + j];
        dg[j] += dyv * xhat[j];
        db[j] += dyv;
        dxhat[j] = dyv * gv[j];
        m1 += dxhat[j];
        m2 += dxhat[j] * xhat[j];
      }
      m1 /= T(d);
      m2 /= T(d);
      for (std::size_t j = 0; j < d; ++j)
        dx[r * d + j] = rstd[r] * (dxhat[j] - m1 - xhat[j] * m2);
    }
    g.accumulate(x, dx);
    g.accumulate(gn, dg);
    g.accumulate(b, db);
  };
  return g.push("layer_norm", {x.id, gain.id, bias.id}, fwd(g), bwd, fwd);
}

namespace detail {
template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& y, const Tensor<T>& dy) {
  Tensor<T> dx(y.shape());
  const std::size_t n = y.cols();
  for (std::size_t r = 0; r < y.rows(); ++r) {
    T dot = 0;
    for (std::size_t j = 0; j < n; ++j) dot += y[r * n + j] * dy[r * n + j];
    for (std::size_t j = 0; j < n; ++j)
      dx[r * n + j] = y[r * n + j] * (dy[r * n + j] - dot);
  }
  return dx;
}
}  // namespace detail

template <typename T>
Var<T> masked_softmax(Var<T> scores, BoolMask mask) {
  auto& g = *scores.graph;
  auto fwd = [s = scores.id, mask](const Graph<T>& g) {
    return kernels::masked_softmax(g.value(s), mask);
  };
  Var<T> out = g.push("masked_softmax", {scores.id}, fwd(g), nullptr, fwd);
  if (g.recording() && g.requires_grad(out.id)) {
    const std::size_t y = out.id;
    g.set_backward(y, [s = scores.id, y](Graph<T>& g, const Tensor<T>& dy) {
          g.accumulate(s, detail::softmax_backward(g.value(y), dy));
        });
  }
  return out;
}

template <typename T>
Var<T> softmax(Var<T> scores) {
  auto& g = *scores.graph;
  auto fwd = [s = scores.id](const Graph<T>& g) { return kernels::softmax(g.value(s)); };
  Var<T> out = g.push("softmax", {scores.id}, fwd(g), nullptr, fwd);
  if (g.recording() && g.requires_grad(out.id)) {
    const std::size_t y = out.id;
    g.set_backward(y, [s = scores.id, y](Graph<T>& g, const Tensor<T>& dy) {
          g.accumulate(s, detail::softmax_backward(g.value(y), dy));
        });
  }
  return out;
}

template <typename T>
Var<T> log_softmax(Var<T> x) {
  auto& g = *x.graph;
  auto fwd = [x = x.id](const Graph<T>& g) { return kernels::log_softmax(g.value(x)); };
  Var<T> out = g.push("log_softmax", {x.id}, fwd(g), nullptr, fwd);
  if (g.recording() && g.requires_grad(out.id)) {
    const std::size_t y = out.id;
    g.set_backward(y, [x = x.id, y](Graph<T>& g, const Tensor<T>& dy) {
          const auto& lp = g.value(y);
          const std::size_t n = lp.cols();
          Tensor<T> dx(lp.shape());
          for (std::size_t r = 0; r < lp.rows(); ++r) {
            T s = 0;
            for (std::size_t j = 0; j < n; ++j) s += dy[r * n + j];
            for (std::size_t j = 0; j < n; ++j)
              dx[r * n + j] = dy[r * n + j] - std::exp(lp[r * n + j]) * s;
          }
          g.accumulate(x, dx);
        });
  }
  return out;
}

template <typename T>
Var<T> sum(Var<T> a) {
  auto& g = *a.graph;
  auto fwd = [a = a.id](const Graph<T>& g) { return Tensor<T>::scalar(g.value(a).sum()); };
  auto bwd = [a = a.id](Graph<T>& g, const Tensor<T>& dy) {
    g.accumulate(a, Tensor<T>(g.value(a).shape(), dy[0]));
  };
  return g.push("sum", {a.id}, fwd(g), bwd, fwd);
}

template <typename T>
Var<T> reshape(Var<T> a, Shape s) {
  auto& g = *a.graph;
  auto fwd = [a = a.id, s](const Graph<T>& g) { return g.value(a).reshaped(s); };
  auto bwd = [a = a.id](Graph<T>& g, const Tensor<T>& dy) {
    g.accumulate(a, dy.reshaped(g.value(a).shape()));
  };
  return g.push("reshape", {a.id}, fwd(g), bwd, fwd);
}

template <typename T>
Var<T> slice_cols(Var<T> a, std::size_t begin, std::size_t count) {
  auto& g = *a.graph;
  auto fwd = [a = a.id, begin, count](const Graph<T>& g) {
    return kernels::slice_cols(g.value(a), begin, count);
  };
  auto bwd = [a = a.id, begin, count](Graph<T>& g, const Tensor<T>& dy) {
    const auto& av = g.value(a);
    Tensor<T> da(av.shape());
    const std::size_t n = av.dim(1);
    for (std::size_t i = 0; i < av.dim(0); ++i)
      for (std::size_t j = 0; j < count; ++j) da[i * n + begin + j] = dy[i * count + j];
    g.accumulate(a, da);
  };
  return g.push("slice_cols", {a.id}, fwd(g), bwd, fwd);
}

template <typename T>
Var<T> slice_rows(Var<T> a, std::size_t begin, std::size_t count) {
  auto& g = *a.graph;
  auto fwd = [a = a.id, begin, count](const Graph<T>& g) {
    return kernels::slice_rows(g.value(a), begin, count);
  };
  auto bwd = [a = a.id, begin](Graph<T>& g, const Tensor<T>& dy) {
    const auto& av = g.value(a);
    Tensor<T> da(av.shape());
    std::copy(dy.storage().begin(), dy.storage().end(),
              da.storage().begin() + begin * av.dim(1));
    g.accumulate(a, da);
  };
  return g.push("slice_rows", {a.id}, fwd(g), bwd, fwd);
}

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  auto& g = *parts.at(0).graph;
  std::vector<std::size_t> ids;
  for (const auto& p : parts) ids.push_back(p.id);
  auto fwd = [ids](const Graph<T>& g) {
    std::vector<Tensor<T>> vals;
    for (auto id : ids) vals.push_back(g.value(id));
    return kernels::concat_cols<T>(vals);
  };
  auto bwd = [ids](Graph<T>& g, const Tensor<T>& dy) {
    std::size_t off = 0;
    for (auto id : ids) {
      const std::size_t w = g.value(id).dim(1);
      g.accumulate(id, kernels::slice_cols(dy, off, w));
      off += w;
    }
  };
  return g.push("concat_cols", ids, fwd(g), bwd, fwd);
}

template <typename T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
  auto& g = *parts.at(0).graph;
  std::vector<std::size_t> ids;
  for (const auto& p : parts) ids.push_back(p.id);
  auto fwd = [ids](const Graph<T>& g) {
    std::vector<Tensor<T>> vals;
    for (auto id : ids) vals.push_back(g.value(id));
    return kernels::concat_rows<T>(vals);
  };
  auto bwd = [ids](Graph<T>& g, const Tensor<T>& dy) {
    std::size_t off = 0;
    for (auto id : ids) {
      const std::size_t h = g.value(id).dim(0);
      g.accumulate(id, kernels::slice_rows(dy, off, h));
      off += h;
    }
  };
  return g.push("concat_rows", ids, fwd(g), bwd, fwd);
}

/// Gathers rows of `table` [V x E]; id 0 may be used and is an ordinary row.
template <typename T>
Var<T> embedding(Var<T> table, std::vector<int> ids) {
  auto& g = *table.graph;
  auto fwd = [t = table.id, ids](const Graph<T>& g) {
    const auto& tv = g.value(t);
    const std::size_t e = tv.dim(1);
    Tensor<T> out({ids.size(), e});
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= tv.dim(0))
        throw ShapeError("embedding id out of range: " + std::to_string(ids[i]));
      std::copy_n(&tv[static_cast<std::size_t>(ids[i]) * e], e, &out[i * e]);
    }
    return out;
  };
  auto bwd = [t = table.id, ids](Graph<T>& g, const Tensor<T>& dy) {
    const auto& tv = g.value(t);
    const std::size_t e = tv.dim(1);
    Tensor<T> dt(tv.shape());
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t j = 0; j < e; ++j) dt[static_cast<std::size_t>(ids[i]) * e + j] += dy[i * e + j];
    g.accumulate(t, dt);
  };
  return g.push("embedding", {table.id}, fwd(g), bwd, fwd);
}

template <typename T>
Var<T> conv1d_causal(Var<T> x, Var<T> kernel) {
  auto& g = detail::graph_of({x, kernel});
  auto fwd = [x = x.id, k = kernel.id](const Graph<T>& g) {
    return kernels::conv1d_causal(g.value(x), g.value(k));
  };
  auto bwd = [x = x.id, k = kernel.id](Graph<T>& g, const Tensor<T>& dy) {
    const auto& xv = g.value(x);
    const auto& kv = g.value(k);
    const std::size_t len = xv.dim(0), din = xv.dim(1), taps = kv.dim(0), dout = kv.dim(2);
    Tensor<T> dx(xv.shape()), dk(kv.shape());
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t tap = 0; tap < taps; ++tap) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + tap) -
                                   static_cast<std::ptrdiff_t>(taps - 1);
        if (src < 0) continue;
        const auto s = static_cast<std::size_t>(src);
        for (std::size_t i = 0; i < din; ++i) {
          T acc = 0;
          for (std::size_t j = 0; j < dout; ++j) {
            const T d = dy[t * dout + j];
            acc += d * kv[(tap * din + i) * dout + j];
            dk[(tap * din + i) * dout + j] += xv[s * din + i] * d;
          }
          dx[s * din + i] += acc;
        }
      }
    }
    g.accumulate(x, dx);
    g.accumulate(k, dk);
  };
  return g.push("conv1d", {x.id, kernel.id}, fwd(g), bwd, fwd);
}

template <typename T>
Var<T> pairwise_add(Var<T> a, Var<T> b) {
  auto& g = detail::graph_of({a, b});
  auto fwd = [a = a.id, b = b.id](const Graph<T>& g) {
    return kernels::pairwise_add(g.value(a), g.value(b));
  };
  auto bwd = [a = a.id, b = b.id](Graph<T>& g, const Tensor<T>& dy) {
    const auto& av = g.value(a);
    const auto& bv = g.value(b);
    const std::size_t nt = av.dim(0), nu = bv.dim(0), h = av.dim(1);
    Tensor<T> da(av.shape()), db(bv.shape());
    for (std::size_t t = 0; t < nt; ++t)
      for (std::size_t u = 0; u < nu; ++u)
        for (std::size_t j = 0; j < h; ++j) {
          const T d = dy[(t * nu + u) * h + j];
          da[t * h + j] += d;
          db[u * h + j] += d;
        }
    g.accumulate(a, da);
    g.accumulate(b, db);
  };
  return g.push("pairwise_add", {a.id, b.id}, fwd(g), bwd, fwd);
}

/// Inverted dropout. rate 0 returns the input node itself.
template <typename T, typename Rng>
Var<T> dropout(Var<T> a, double rate, Rng& rng) {
  if (rate <= 0.0) return a;
  auto& g = *a.graph;
  const T keep = T(1.0 - rate);
  std::bernoulli_distribution bern(1.0 - rate);
  Tensor<T> m(a.shape());
  for (auto& v : m.storage()) v = bern(rng) ? T(1) / keep : T(0);
  auto fwd = [a = a.id, m](const Graph<T>& g) { return kernels::mul(g.value(a), m); };
  auto bwd = [a = a.id, m](Graph<T>& g, const Tensor<T>& dy) {
    g.accumulate(a, kernels::mul(dy, m));
  };
  return g.push("dropout", {a.id}, fwd(g), bwd, fwd);
}

/// Mean negative log-likelihood of `targets` under row-wise softmax(logits).
template <typename T>
Var<T> cross_entropy(Var<T> logits, std::vector<int> targets) {
  Var<T> lp = log_softmax(logits);
  auto& g = *logits.graph;
  const std::size_t n = lp.value().rows();
  if (targets.size() != n) throw ShapeError("cross_entropy: one target per row required");
  auto fwd = [lp = lp.id, targets](const Graph<T>& g) {
    const auto& v = g.value(lp);
    T s = 0;
    for (std::size_t r = 0; r < targets.size(); ++r) s -= v[r * v.cols() + targets[r]];
    return Tensor<T>::scalar(s / T(targets.size()));
  };
  auto bwd = [lp = lp.id, targets](Graph<T>& g, const Tensor<T>& dy) {
    const auto& v = g.value(lp);
    Tensor<T> d(v.shape());
    for (std::size_t r = 0; r < targets.size(); ++r)
      d[r * v.cols() + targets[r]] = -dy[0] / T(targets.size());
    g.accumulate(lp, d);
  };
  return g.push("cross_entropy", {lp.id}, fwd(g), bwd, fwd);
}

}  // namespace ag
}  // namespace xtrd
