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
#include <deque>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "xtrd/autograd.hpp"
#include "xtrd/mask.hpp"
#include "xtrd/params.hpp"

namespace xtrd {

struct EncoderConfig {
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t d_model = 32;
  std::size_t d_ffn = 64;
  double dropout = 0.1;  // training only

  void validate() const {
    if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0)
      throw Error("d_model must be a positive multiple of n_heads");
    if (d_ffn == 0) throw Error("d_ffn must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw Error("dropout must be in [0, 1)");
  }
};

inline std::string layer_prefix(std::size_t l) {
  return "encoder.layer" + std::to_string(l) + ".";
}

template <typename T, typename Rng>
void init_encoder(ParameterStore<T>& ps, const EncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t d = cfg.d_model, f = cfg.d_ffn;
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string p = layer_prefix(l);
    ps.add(p + "ln1.gain", Tensor<T>({d}, T(1)));
    ps.add(p + "ln1.bias", Tensor<T>({d}));
    for (const char* m : {"wq", "wk", "wv", "wo"}) {
      ps.add(p + "attn." + m, glorot<T>({d, d}, rng));
      ps.add(p + "attn.b" + std::string(m + 1), Tensor<T>({d}));
    }
    ps.add(p + "ln2.gain", Tensor<T>({d}, T(1)));
    ps.add(p + "ln2.bias", Tensor<T>({d}));
    ps.add(p + "ffn.w1", glorot<T>({d, f}, rng));
    ps.add(p + "ffn.b1", Tensor<T>({f}));
    ps.add(p + "ffn.w2", glorot<T>({f, d}, rng));
    ps.add(p + "ffn.b2", Tensor<T>({d}));
  }
}

/// Sinusoidal encoding of absolute frame positions [start, start + count).
template <typename T>
Tensor<T> positional_encoding(std::size_t start, std::size_t count, std::size_t d) {
  Tensor<T> pe({count, d});
  for (std::size_t r = 0; r < count; ++r) {
    const double pos = double(start + r);
    for (std::size_t i = 0; i < d; i += 2) {
      const double freq = std::exp(-std::log(10000.0) * double(i) / double(d));
      pe[r * d + i] = T(std::sin(pos * freq));
      if (i + 1 < d) pe[r * d + i + 1] = T(std::cos(pos * freq));
    }
  }
  return pe;
}

namespace detail {

/// Key/value rows visible to the current queries, plus the mask over them.
template <typename T>
struct KeySet {
  Var<T> k;
  Var<T> v;
  BoolMask mask;
};

template <typename T>
using KeySource = std::function<KeySet<T>(std::size_t layer, Var<T> k, Var<T> v)>;

template <typename T>
Var<T> multi_head_attention(Var<T> q, const KeySet<T>& keys, std::size_t heads) {
  const std::size_t d = q.shape()[1], dh = d / heads;
  const T inv = T(1) / std::sqrt(T(dh));
  std::vector<Var<T>> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Var<T> qh = ag::slice_cols(q, h * dh, dh);
    Var<T> kh = ag::slice_cols(keys.k, h * dh, dh);
    Var<T> vh = ag::slice_cols(keys.v, h * dh, dh);
    Var<T> scores = ag::scale(ag::matmul(qh, ag::transpose(kh)), inv);
    outs.push_back(ag::matmul(ag::masked_softmax(scores, keys.mask), vh));
  }
  return heads == 1 ? outs[0] : ag::concat_cols(outs);
}

/// Pre-norm block: x + Attn(LN(x)), then x + FFN(LN(x)) with GELU.
template <typename T>
Var<T> encoder_layer(Binder<T>& p, const EncoderConfig& cfg, std::size_t layer, Var<T> x,
                     const KeySource<T>& key_source, std::mt19937_64* dropout_rng) {
  const std::string pre = layer_prefix(layer);
  auto drop = [&](Var<T> v) {
    return dropout_rng ? ag::dropout(v, cfg.dropout, *dropout_rng) : v;
  };
  Var<T> h = ag::layer_norm(x, p(pre + "ln1.gain"), p(pre + "ln1.bias"));
  Var<T> q = ag::linear(h, p(pre + "attn.wq"), p(pre + "attn.bq"));
  Var<T> k = ag::linear(h, p(pre + "attn.wk"), p(pre + "attn.bk"));
  Var<T> v = ag::linear(h, p(pre + "attn.wv"), p(pre + "attn.bv"));
  Var<T> att = multi_head_attention(q, key_source(layer, k, v), cfg.n_heads);
  x = ag::add(x, drop(ag::linear(att, p(pre + "attn.wo"), p(pre + "attn.bo"))));
  Var<T> h2 = ag::layer_norm(x, p(pre + "ln2.gain"), p(pre + "ln2.bias"));
  Var<T> f = ag::linear(ag::gelu(ag::linear(h2, p(pre + "ffn.w1"), p(pre + "ffn.b1"))),
                        p(pre + "ffn.w2"), p(pre + "ffn.b2"));
  return ag::add(x, drop(f));
}

}  // namespace detail

/// Full-utterance forward with the chunk mask of `spec` shared by all layers
/// and heads. `dropout_rng` enables dropout (training); pass null otherwise.
template <typename T>
Var<T> encode_offline(Binder<T>& p, const EncoderConfig& cfg, Var<T> frames, MaskSpec spec,
                      std::mt19937_64* dropout_rng = nullptr) {
  auto& g = p.graph();
  const std::size_t len = frames.shape()[0];
  spec.total_frames = len;
  const BoolMask mask = build_mask(spec);
  Var<T> x = ag::add(frames, g.constant(positional_encoding<T>(0, len, cfg.d_model)));
  detail::KeySource<T> all_keys = [&mask](std::size_t, Var<T> k, Var<T> v) {
    return detail::KeySet<T>{k, v, mask};
  };
  for (std::size_t l = 0; l < cfg.n_layers; ++l)
    x = detail::encoder_layer(p, cfg, l, x, all_keys, dropout_rng);
  return x;
}

template <typename T>
Tensor<T> encode_offline(const ParameterStore<T>& params, const EncoderConfig& cfg,
                         const Tensor<T>& frames, const MaskSpec& spec) {
  Graph<T> g(false);
  Binder<T> p(g, params);
  return encode_offline(p, cfg, g.constant(frames), spec).value();
}

template <typename T>
struct CachedChunk {
  std::size_t start = 0;
  Tensor<T> k;
  Tensor<T> v;
};

template <typename T>
struct LayerCache {
  std::vector<Tensor<T>> sink_k;  // one row per captured sink frame
  std::vector<Tensor<T>> sink_v;
  std::deque<CachedChunk<T>> chunks;

  std::size_t retained_frames() const {
    std::size_t n = 0;
    for (const auto& c : chunks) n += c.k.dim(0);
    return n;
  }
};

/// Incremental encoder state: retained chunk K/V and sink K/V per layer.
template <typename T>
struct StreamState {
  MaskSpec spec;
  EncoderConfig config;
  std::vector<LayerCache<T>> layers;
  std::size_t frames_emitted = 0;
  std::size_t chunks_pushed = 0;
  bool closed = false;

  /// Largest number of distinct frames any layer currently holds.
  std::size_t cached_frames() const {
    std::size_t best = 0;
    for (const auto& l : layers) {
      std::size_t sinks_outside = 0;
      const std::size_t lo = l.chunks.empty() ? frames_emitted : l.chunks.front().start;
      sinks_outside = std::min(l.sink_k.size(), lo);
      best = std::max(best, l.retained_frames() + sinks_outside);
    }
    return best;
  }
};

/// Left context Full keeps every pushed chunk, so the cache grows with the
/// stream; Chunks(L) bounds it to L * chunk_frames frames per layer.
template <typename T>
StreamState<T> encoder_open_stream(const EncoderConfig& cfg, const MaskSpec& spec) {
  cfg.validate();
  spec.validate();
  StreamState<T> s;
  s.spec = spec;
  s.config = cfg;
  s.layers.resize(cfg.n_layers);
  return s;
}

/// Encodes the next chunk. Only the last push of a stream may be shorter than
/// the chunk size; it closes the stream.
template <typename T>
Tensor<T> encoder_push_chunk(StreamState<T>& state, const ParameterStore<T>& params,
                             const Tensor<T>& chunk) {
  if (state.closed) throw Error("push after the stream was finalized");
  const std::size_t c = chunk.dim(0);
  const std::size_t chunk_frames = state.spec.chunk_frames;
  if (c > chunk_frames)
    throw Error("chunk of " + std::to_string(c) + " frames exceeds chunk size " +
                std::to_string(chunk_frames));
  const auto& cfg = state.config;
  if (chunk.rank() != 2 || chunk.dim(1) != cfg.d_model)
    throw ShapeError("chunk must be [c x d_model], got " + shape_str(chunk.shape()));

  const std::size_t start = state.frames_emitted;
  const std::size_t sinks = state.spec.sink_frames;
  Graph<T> g(false);
  Binder<T> p(g, params);

  detail::KeySource<T> cached_keys = [&](std::size_t layer, Var<T> k, Var<T> v) {
    auto& lc = state.layers[layer];
    const std::size_t lo = lc.chunks.empty() ? start : lc.chunks.front().start;
    std::vector<Var<T>> ks, vs;
    for (std::size_t j = 0; j < std::min(lc.sink_k.size(), lo); ++j) {
      ks.push_back(g.constant(lc.sink_k[j]));
      vs.push_back(g.constant(lc.sink_v[j]));
    }
    for (const auto& cc : lc.chunks) {
      ks.push_back(g.constant(cc.k));
      vs.push_back(g.constant(cc.v));
    }
    ks.push_back(k);
    vs.push_back(v);
    Var<T> kall = ks.size() == 1 ? k : ag::concat_rows(ks);
    Var<T> vall = vs.size() == 1 ? v : ag::concat_rows(vs);
    BoolMask mask = BoolMask::all_true(c, kall.shape()[0]);

    // Update this layer's cache with the current chunk.
    const Tensor<T>& kv = k.value();
    const Tensor<T>& vv = v.value();
    for (std::size_t r = 0; r < c && start + r < sinks; ++r) {
      if (lc.sink_k.size() == start + r) {
        lc.sink_k.push_back(kernels::slice_rows(kv, r, 1));
        lc.sink_v.push_back(kernels::slice_rows(vv, r, 1));
      }
    }
    const auto& lctx = state.spec.left_context;
    if (lctx.is_full() || lctx.chunks() > 0) lc.chunks.push_back({start, kv, vv});
    if (!lctx.is_full())
      while (lc.chunks.size() > lctx.chunks()) lc.chunks.pop_front();
    return detail::KeySet<T>{kall, vall, std::move(mask)};
  };

  Var<T> x = ag::add(g.constant(chunk),
                     g.constant(positional_encoding<T>(start, c, cfg.d_model)));
  for (std::size_t l = 0; l < cfg.n_layers; ++l)
    x = detail::encoder_layer<T>(p, cfg, l, x, cached_keys, nullptr);

  state.frames_emitted += c;
  ++state.chunks_pushed;
  if (c < chunk_frames) state.closed = true;
  return x.value();
}

template <typename T>
void encoder_close_stream(StreamState<T>& state) {
  state.closed = true;
}

}  // namespace xtrd
