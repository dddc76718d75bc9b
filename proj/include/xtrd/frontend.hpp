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
#include <span>
#include <string>
#include <vector>

#include "xtrd/autograd.hpp"
#include "xtrd/params.hpp"

namespace xtrd {

/// Window-slicing front-end followed by a two-layer pointwise network.
struct FrontEndConfig {
  std::size_t sample_rate = 16000;
  std::size_t frame_window = 400;  // 25 ms
  std::size_t frame_hop = 320;     // 20 ms
  std::size_t hidden = 64;
  std::size_t d_model = 32;

  std::size_t chunk_samples(std::size_t chunk_frames) const { return chunk_frames * frame_hop; }
};

template <typename T, typename Rng>
void init_frontend(ParameterStore<T>& ps, const FrontEndConfig& cfg, Rng& rng) {
  ps.add("frontend.w1", glorot<T>({cfg.frame_window, cfg.hidden}, rng));
  ps.add("frontend.b1", Tensor<T>({cfg.hidden}));
  ps.add("frontend.w2", glorot<T>({cfg.hidden, cfg.d_model}, rng));
  ps.add("frontend.b2", Tensor<T>({cfg.d_model}));
}

/// Zero-pads to the next hop boundary.
inline std::vector<float> pad_to_hop(std::span<const float> samples, std::size_t hop) {
  std::vector<float> out(samples.begin(), samples.end());
  out.resize((samples.size() + hop - 1) / hop * hop, 0.0f);
  return out;
}

/// One row per hop; each window reads only samples of this chunk and is
/// zero-padded past the chunk end.
template <typename T>
Tensor<T> frame_windows(std::span<const float> chunk, const FrontEndConfig& cfg) {
  if (chunk.empty()) throw Error("front-end received an empty chunk");
  if (chunk.size() % cfg.frame_hop != 0)
    throw Error("chunk length " + std::to_string(chunk.size()) +
                " is not a multiple of the frame hop " + std::to_string(cfg.frame_hop));
  const std::size_t frames = chunk.size() / cfg.frame_hop;
  Tensor<T> w({frames, cfg.frame_window});
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t s0 = f * cfg.frame_hop;
    for (std::size_t i = 0; i < cfg.frame_window && s0 + i < chunk.size(); ++i)
      w[f * cfg.frame_window + i] = T(chunk[s0 + i]);
  }
  return w;
}

template <typename T>
Var<T> frontend_chunk(Binder<T>& p, std::span<const float> chunk, const FrontEndConfig& cfg) {
  Var<T> w = p.graph().constant(frame_windows<T>(chunk, cfg));
  Var<T> h = ag::gelu(ag::linear(w, p("frontend.w1"), p("frontend.b1")));
  return ag::linear(h, p("frontend.w2"), p("frontend.b2"));
}

template <typename T>
Tensor<T> frontend_chunk(const ParameterStore<T>& params, std::span<const float> chunk,
                         const FrontEndConfig& cfg) {
  Graph<T> g(false);
  Binder<T> p(g, params);
  return frontend_chunk(p, chunk, cfg).value();
}

/// Runs the front-end chunk by chunk over a whole utterance and concatenates
/// the frames. The trailing partial chunk is zero-padded to a hop boundary.
template <typename T>
Var<T> frontend_utterance(Binder<T>& p, std::span<const float> samples,
                          std::size_t chunk_frames, const FrontEndConfig& cfg) {
  const std::vector<float> padded = pad_to_hop(samples, cfg.frame_hop);
  if (padded.empty()) throw Error("front-end received an empty utterance");
  const std::size_t step = std::min(padded.size(), cfg.chunk_samples(chunk_frames));
  std::vector<Var<T>> parts;
  for (std::size_t s = 0; s < padded.size(); s += step) {
    const std::size_t n = std::min(step, padded.size() - s);
    parts.push_back(frontend_chunk(p, std::span<const float>(padded).subspan(s, n), cfg));
  }
  return parts.size() == 1 ? parts[0] : ag::concat_rows(parts);
}

}  // namespace xtrd
