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
#include <chrono>
#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "xtrd/encoder.hpp"
#include "xtrd/kernels.hpp"
#include "xtrd/model.hpp"

namespace xtrd {

struct Hypothesis {
  std::vector<int> tokens;
  double log_prob = 0.0;
  std::vector<int> context;  // last k tokens, the predictor state
};

struct DecodeConfig {
  std::size_t beam_width = 4;
  std::size_t max_symbols_per_frame = 8;
  MaskSpec mask;

  void validate() const {
    if (beam_width < 1) throw Error("beam_width must be >= 1");
    if (max_symbols_per_frame < 1) throw Error("max_symbols_per_frame must be >= 1");
    mask.validate();
  }
};

/// Joiner evaluation for search with predictor outputs cached per context.
template <typename T>
class JointScorer {
 public:
  explicit JointScorer(const TransducerModel<T>& model) : model_(model) {}

  Tensor<T> project_frame(const Tensor<T>& enc_row) const {
    return joiner_project_encoder(model_.params(), enc_row);
  }

  /// Log-probabilities over the vocabulary after `tokens`.
  std::vector<double> log_probs(const Tensor<T>& enc_proj, const std::vector<int>& tokens) {
    const auto ctx = context_of(tokens, model_.config().context);
    auto it = pred_cache_.find(ctx);
    if (it == pred_cache_.end()) {
      Tensor<T> pred = predictor_step(model_.params(), model_.config().predictor(), ctx);
      it = pred_cache_.emplace(ctx, joiner_project_predictor(model_.params(), pred)).first;
    }
    const Tensor<T> lp = joiner_log_probs(model_.params(), enc_proj, it->second);
    return std::vector<double>(lp.storage().begin(), lp.storage().end());
  }

 private:
  const TransducerModel<T>& model_;
  std::map<std::vector<int>, Tensor<T>> pred_cache_;
};

inline std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

/// Per frame: emit the most likely symbol until it is blank or
/// `max_symbols_per_frame` tokens were emitted, then advance.
template <typename T>
std::vector<int> greedy_decode(const TransducerModel<T>& model, const Tensor<T>& enc,
                               std::size_t max_symbols_per_frame = 8) {
  std::vector<int> tokens;
  if (enc.empty()) return tokens;
  JointScorer<T> scorer(model);
  for (std::size_t t = 0; t < enc.dim(0); ++t) {
    const Tensor<T> ep = scorer.project_frame(kernels::slice_rows(enc, t, 1));
    for (std::size_t s = 0; s < max_symbols_per_frame; ++s) {
      const std::size_t k = argmax(scorer.log_probs(ep, tokens));
      if (k == static_cast<std::size_t>(kBlank)) break;
      tokens.push_back(static_cast<int>(k));
    }
  }
  return tokens;
}

/// Frame-synchronous transducer beam search. Within a frame, hypotheses are
/// expanded up to `max_symbols_per_frame` times; blank expansions finish the
/// frame. At every expansion step the best `beam_width` entries among
/// finished and still-expanding hypotheses survive. Identical token sequences
/// in the same state are merged by log-add.
template <typename T>
class BeamSearch {
 public:
  BeamSearch(const TransducerModel<T>& model, std::size_t beam_width,
             std::size_t max_symbols_per_frame)
      : model_(model), scorer_(model), width_(beam_width), max_symbols_(max_symbols_per_frame) {
    if (width_ < 1) throw Error("beam_width must be >= 1");
    if (max_symbols_ < 1) throw Error("max_symbols_per_frame must be >= 1");
    beam_.push_back(Entry{{}, 0.0, 0.0});
  }

  void advance(const Tensor<T>& enc) {
    for (std::size_t t = 0; t < enc.dim(0); ++t) advance_frame(kernels::slice_rows(enc, t, 1));
  }

  void advance_frame(const Tensor<T>& enc_row) {
    const Tensor<T> ep = scorer_.project_frame(enc_row);
    std::vector<Entry> active = beam_;
    std::vector<Entry> done;
    for (std::size_t step = 0; step < max_symbols_ && !active.empty(); ++step) {
      std::vector<Entry> emitted;
      for (const auto& h : active) {
        const auto lp = scorer_.log_probs(ep, h.tokens);
        merge_into(done, Entry{h.tokens, h.score + lp[kBlank], lp[kBlank]});
        for (std::size_t k = 1; k < lp.size(); ++k) {
          Entry e{h.tokens, h.score + lp[k], lp[k]};
          e.tokens.push_back(static_cast<int>(k));
          merge_into(emitted, std::move(e));
        }
      }
      // Joint pruning over finished and expanding entries.
      std::vector<std::pair<Entry, bool>> pool;
      for (auto& e : done) pool.emplace_back(std::move(e), true);
      for (auto& e : emitted) pool.emplace_back(std::move(e), false);
      std::stable_sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) {
        return better(a.first, b.first);
      });
      if (pool.size() > width_) pool.resize(width_);
      done.clear();
      active.clear();
      for (auto& [e, finished] : pool) (finished ? done : active).push_back(std::move(e));
    }
    // Hypotheses that hit the symbol cap advance without a blank.
    for (auto& e : active) merge_into(done, std::move(e));
    std::stable_sort(done.begin(), done.end(), better);
    if (done.size() > width_) done.resize(width_);
    beam_ = std::move(done);
    ++frames_;
  }

  std::vector<Hypothesis> nbest() const {
    std::vector<Hypothesis> out;
    for (const auto& e : beam_)
      out.push_back({e.tokens, e.score, context_of(e.tokens, model_.config().context)});
    return out;
  }

  Hypothesis best() const { return nbest().front(); }
  std::size_t frames() const { return frames_; }

 private:
  struct Entry {
    std::vector<int> tokens;
    double score = 0.0;
    double local = 0.0;  // log-prob of the last expansion; breaks score ties
  };

  static bool better(const Entry& a, const Entry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.local > b.local;
  }

  static void merge_into(std::vector<Entry>& set, Entry e) {
    for (auto& x : set) {
      if (x.tokens == e.tokens) {
        x.score = kernels::log_add_exp(x.score, e.score);
        x.local = std::max(x.local, e.local);
        return;
      }
    }
    set.push_back(std::move(e));
  }

  const TransducerModel<T>& model_;
  JointScorer<T> scorer_;
  std::size_t width_;
  std::size_t max_symbols_;
  std::vector<Entry> beam_;
  std::size_t frames_ = 0;
};

/// n-best list, best first. An empty encoder output yields the empty hypothesis.
template <typename T>
std::vector<Hypothesis> beam_search(const TransducerModel<T>& model, const Tensor<T>& enc,
                                    const DecodeConfig& cfg) {
  cfg.validate();
  BeamSearch<T> search(model, cfg.beam_width, cfg.max_symbols_per_frame);
  if (!enc.empty()) search.advance(enc);
  return search.nbest();
}

/// Encode the whole utterance under the decode mask, then search.
template <typename T>
std::vector<Hypothesis> decode_offline(const TransducerModel<T>& model, const Utterance& u,
                                       const DecodeConfig& cfg) {
  return beam_search(model, model.encode(u, cfg.mask.with_total(model.num_frames(u))), cfg);
}

struct ChunkReport {
  std::size_t index = 0;
  std::size_t frames = 0;
  std::size_t attended_keys = 0;  // distinct key frames visible to this chunk
  std::size_t cached_frames = 0;  // frames held in the cache before this chunk
  double elapsed_ms = 0.0;
};

struct StreamResult {
  Hypothesis best;
  std::vector<Hypothesis> nbest;
  std::vector<ChunkReport> chunks;
  std::size_t frames = 0;
};

/// A live decoding stream: audio (or feature frames) in, partial hypotheses
/// out. Input is buffered until a whole chunk is available, so the way the
/// caller slices its pushes never changes the result. Under beam search the
/// returned partial may change between pushes.
template <typename T>
class StreamSession {
 public:
  StreamSession(const TransducerModel<T>& model, DecodeConfig cfg)
      : model_(model),
        cfg_(std::move(cfg)),
        state_(encoder_open_stream<T>(model.config().encoder, cfg_.mask)),
        search_(model, cfg_.beam_width, cfg_.max_symbols_per_frame) {
    cfg_.validate();
  }

  std::size_t frames_emitted() const { return state_.frames_emitted; }
  bool finalized() const { return finalized_; }
  const StreamState<T>& encoder_state() const { return state_; }

  Hypothesis push_samples(std::span<const float> samples) {
    require_open();
    if (model_.config().input != InputKind::kAudio) throw Error("feature model cannot take audio");
    pending_samples_.insert(pending_samples_.end(), samples.begin(), samples.end());
    const std::size_t need = model_.config().frontend().chunk_samples(cfg_.mask.chunk_frames);
    std::size_t off = 0;
    while (pending_samples_.size() - off >= need) {
      std::span<const float> chunk(pending_samples_.data() + off, need);
      process(frontend_chunk(model_.params(), chunk, model_.config().frontend()));
      off += need;
    }
    pending_samples_.erase(pending_samples_.begin(), pending_samples_.begin() + static_cast<std::ptrdiff_t>(off));
    return search_.best();
  }

  Hypothesis push_features(const Tensor<float>& frames) {
    require_open();
    if (model_.config().input != InputKind::kFeatures) throw Error("audio model cannot take features");
    if (frames.rank() != 2 || frames.dim(1) != model_.config().feature_dim)
      throw ShapeError("feature push must be [n x feature_dim]");
    for (std::size_t r = 0; r < frames.dim(0); ++r) pending_rows_.push_back(kernels::slice_rows(frames, r, 1));
    const std::size_t c = cfg_.mask.chunk_frames;
    while (pending_rows_.size() >= c) {
      flush_rows(c);
    }
    return search_.best();
  }

  /// Encodes any trailing partial chunk and closes the session.
  StreamResult finalize() {
    if (finalized_) throw Error("session already finalized");
    if (!pending_samples_.empty()) {
      const auto padded = pad_to_hop(pending_samples_, model_.config().frontend().frame_hop);
      process(frontend_chunk(model_.params(), std::span<const float>(padded), model_.config().frontend()));
      pending_samples_.clear();
    }
    if (!pending_rows_.empty()) flush_rows(pending_rows_.size());
    encoder_close_stream(state_);
    finalized_ = true;
    StreamResult r;
    r.nbest = search_.nbest();
    r.best = r.nbest.front();
    r.chunks = reports_;
    r.frames = state_.frames_emitted;
    return r;
  }

 private:
  void require_open() const {
    if (finalized_) throw Error("push after finalize");
  }

  void flush_rows(std::size_t n) {
    std::vector<Tensor<float>> rows(pending_rows_.begin(), pending_rows_.begin() + static_cast<std::ptrdiff_t>(n));
    pending_rows_.erase(pending_rows_.begin(), pending_rows_.begin() + static_cast<std::ptrdiff_t>(n));
    process(model_.project_features(kernels::concat_rows<float>(rows)));
  }

  void process(const Tensor<T>& frames) {
    const auto t0 = std::chrono::steady_clock::now();
    ChunkReport rep;
    rep.index = state_.chunks_pushed;
    rep.frames = frames.dim(0);
    rep.cached_frames = state_.cached_frames();
    rep.attended_keys = rep.cached_frames + rep.frames;
    const Tensor<T> enc = encoder_push_chunk(state_, model_.params(), frames);
    search_.advance(enc);
    rep.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    reports_.push_back(rep);
  }

  const TransducerModel<T>& model_;
  DecodeConfig cfg_;
  StreamState<T> state_;
  BeamSearch<T> search_;
  std::vector<float> pending_samples_;
  std::vector<Tensor<float>> pending_rows_;
  std::vector<ChunkReport> reports_;
  bool finalized_ = false;
};

template <typename T>
StreamSession<T> stream_open(const TransducerModel<T>& model, const DecodeConfig& cfg) {
  return StreamSession<T>(model, cfg);
}

}  // namespace xtrd
