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
#include <charconv>
#include <cstddef>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "xtrd/bool_mask.hpp"
#include "xtrd/tensor.hpp"

namespace xtrd {

/// Chunk size that behaves as full (non-streaming) attention for any
/// realistic utterance.
inline constexpr std::size_t kFullAttentionChunk = std::size_t{1} << 30;

/// Number of previous chunks a chunk may attend to, or all of them.
class LeftContext {
 public:
  static LeftContext full() { return LeftContext(true, 0); }
  static LeftContext chunks(std::size_t n) { return LeftContext(false, n); }

  /// Accepts "full" or a non-negative integer.
  static LeftContext parse(std::string_view s) {
    if (s == "full") return full();
    std::size_t n = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw Error("left context must be 'full' or a chunk count, got '" +
                  std::string(s) + "'");
    }
    return chunks(n);
  }

  bool is_full() const { return full_; }
  std::size_t chunks() const { return n_; }
  std::string to_string() const { return full_ ? "full" : std::to_string(n_); }

  friend bool operator==(const LeftContext&, const LeftContext&) = default;

 private:
  LeftContext(bool full, std::size_t n) : full_(full), n_(full ? 0 : n) {}
  bool full_;
  std::size_t n_;
};

/// One attention geometry: chunk size, how many earlier chunks stay visible,
/// and how many initial frames act as attention sinks.
struct MaskSpec {
  std::size_t chunk_frames = kFullAttentionChunk;
  LeftContext left_context = LeftContext::full();
  std::size_t sink_frames = 0;
  std::size_t total_frames = 1;

  static MaskSpec full_attention(std::size_t total) {
    return {kFullAttentionChunk, LeftContext::full(), 0, total};
  }

  void validate() const {
    if (chunk_frames < 1) throw Error("chunk_frames must be >= 1");
    if (total_frames < 1) throw Error("total_frames must be >= 1");
  }

  std::size_t num_chunks() const {
    return (total_frames + chunk_frames - 1) / chunk_frames;
  }

  /// Same geometry applied to an utterance of a different length.
  MaskSpec with_total(std::size_t total) const {
    MaskSpec s = *this;
    s.total_frames = total;
    return s;
  }
};

inline std::size_t chunk_index(std::size_t frame, std::size_t chunk_frames) {
  return frame / chunk_frames;
}

/// Reference membership rule: j is visible from i when both share a chunk,
/// j lies in one of the L chunks before i's chunk, or j is a sink frame.
/// Sink frames are only visible once they have arrived, i.e. from chunks at or
/// after their own; no query ever sees a later chunk.
inline bool allowed(const MaskSpec& spec, std::size_t i, std::size_t j) {
  const std::size_t ci = chunk_index(i, spec.chunk_frames);
  const std::size_t cj = chunk_index(j, spec.chunk_frames);
  if (ci == cj) return true;
  if (cj > ci) return false;
  if (spec.left_context.is_full() || ci - cj <= spec.left_context.chunks()) return true;
  return j < spec.sink_frames;
}

namespace detail {
struct KeyRange {
  std::size_t begin;
  std::size_t end;
};

/// Contiguous chunk-derived key range visible from chunk n (sinks excluded).
inline KeyRange chunk_key_range(const MaskSpec& spec, std::size_t n) {
  const std::size_t c = spec.chunk_frames;
  const std::size_t first_chunk =
      spec.left_context.is_full() ? 0 : n - std::min(n, spec.left_context.chunks());
  return {first_chunk * c, std::min(spec.total_frames, (n + 1) * c)};
}
}  // namespace detail

/// Materializes the T x T allowance matrix block by block.
inline BoolMask build_mask(const MaskSpec& spec) {
  spec.validate();
  const std::size_t len = spec.total_frames;
  const std::size_t sinks = std::min(spec.sink_frames, len);
  BoolMask mask(len, len);
  for (std::size_t n = 0; n < spec.num_chunks(); ++n) {
    const auto keys = detail::chunk_key_range(spec, n);
    const std::size_t q_end = std::min(len, (n + 1) * spec.chunk_frames);
    for (std::size_t i = n * spec.chunk_frames; i < q_end; ++i) {
      for (std::size_t j = 0; j < std::min(sinks, keys.end); ++j) mask.set(i, j, true);
      for (std::size_t j = keys.begin; j < keys.end; ++j) mask.set(i, j, true);
    }
  }
  return mask;
}

/// Size of the key set shared by all queries of chunk n.
inline std::size_t attended_count(const MaskSpec& spec, std::size_t n) {
  const auto keys = detail::chunk_key_range(spec, n);
  const std::size_t sinks = std::min(spec.sink_frames, spec.total_frames);
  return (keys.end - keys.begin) + std::min(sinks, keys.begin);
}

/// Frames that must already be cached when chunk n is processed: sinks and
/// retained earlier chunks, excluding the chunk itself.
inline std::size_t cached_frames_before(const MaskSpec& spec, std::size_t n) {
  const std::size_t own =
      std::min(spec.total_frames, (n + 1) * spec.chunk_frames) - n * spec.chunk_frames;
  return attended_count(spec, n) - own;
}

inline const std::vector<std::size_t>& default_chunk_choices() {
  static const std::vector<std::size_t> choices = {16, 32, 64, 128};
  return choices;
}

/// Uniform draw from `choices`; one draw per training batch.
template <typename Rng>
std::size_t sample_chunk_size(Rng& rng, const std::vector<std::size_t>& choices) {
  if (choices.empty()) throw Error("chunk size choices must be non-empty");
  std::uniform_int_distribution<std::size_t> pick(0, choices.size() - 1);
  return choices[pick(rng)];
}

}  // namespace xtrd
