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
#include <cstdint>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "xtrd/mask.hpp"
#include "xtrd/model.hpp"
#include "xtrd/optim.hpp"

namespace xtrd {

enum class TrainingMode { kNonStreaming, kFixedChunk, kMultiChunk };

inline const char* training_mode_name(TrainingMode m) {
  switch (m) {
    case TrainingMode::kNonStreaming: return "non_streaming";
    case TrainingMode::kFixedChunk: return "fixed_chunk";
    case TrainingMode::kMultiChunk: return "multi_chunk";
  }
  return "?";
}

inline TrainingMode parse_training_mode(const std::string& s) {
  if (s == "non_streaming") return TrainingMode::kNonStreaming;
  if (s == "fixed_chunk") return TrainingMode::kFixedChunk;
  if (s == "multi_chunk") return TrainingMode::kMultiChunk;
  throw Error("unknown training_mode '" + s + "'");
}

struct TrainConfig {
  double learning_rate = 1.25e-3;
  std::size_t warmup_steps = 500;
  double epoch_decay = 0.9;
  std::size_t epochs = 10;
  std::size_t batch_size = 8;
  std::vector<std::size_t> chunk_choices = default_chunk_choices();
  TrainingMode training_mode = TrainingMode::kNonStreaming;
  std::size_t fixed_chunk_frames = 16;
  LeftContext left_context = LeftContext::full();
  double grad_clip = 5.0;
  // Exact (unpruned) transducer loss and plain Adam; recorded in every config.
  std::string loss = "rnnt_exact";
  std::string optimizer = "adam";

  ScheduleConfig schedule() const { return {learning_rate, warmup_steps, epoch_decay}; }

  void validate() const {
    if (warmup_steps < 1) throw Error("warmup_steps must be >= 1");
    if (batch_size < 1) throw Error("batch_size must be >= 1");
    if (training_mode == TrainingMode::kMultiChunk && chunk_choices.empty())
      throw Error("multi_chunk training needs chunk_choices");
    if (training_mode == TrainingMode::kFixedChunk && fixed_chunk_frames < 1)
      throw Error("fixed_chunk_frames must be >= 1");
  }
};

/// Independent random streams derived from one root seed.
inline std::mt19937_64 sub_stream(std::uint64_t root, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(root), static_cast<std::uint32_t>(root >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

enum Stream : std::uint64_t { kStreamData = 1, kStreamInit = 2, kStreamSampler = 3, kStreamDropout = 4 };

inline std::string rng_to_string(const std::mt19937_64& r) {
  std::ostringstream oss;
  oss << r;
  return oss.str();
}

inline std::mt19937_64 rng_from_string(const std::string& s) {
  std::istringstream iss(s);
  std::mt19937_64 r;
  iss >> r;
  if (iss.fail()) throw Error("corrupt random-generator state");
  return r;
}

/// Everything besides parameters needed to continue training exactly.
template <typename T>
struct TrainerState {
  std::size_t step = 0;   // optimizer steps attempted so far
  std::size_t epoch = 0;
  std::size_t cursor = 0;  // position within the current epoch's order
  std::vector<std::size_t> order;
  std::mt19937_64 data_rng;
  std::mt19937_64 sampler_rng;
  std::mt19937_64 dropout_rng;
  OptimState<T> optim;
};

struct StepMetrics {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double mean_nll = 0.0;
  double lr = 0.0;
  double grad_norm = 0.0;
  std::size_t chunk_frames = 0;  // kFullAttentionChunk for non-streaming
  bool skipped = false;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double mean_nll = 0.0;
  std::size_t steps = 0;
  std::vector<double> lr_trace;
  std::vector<std::size_t> chunk_sizes_used;
  std::size_t skipped_steps = 0;
};

/// Full-utterance masked training: each batch draws a chunk size (or uses the
/// fixed one / full attention), encodes with that mask and full left context,
/// and takes one Adam step on the mean transducer loss.
template <typename T>
class Trainer {
 public:
  Trainer(TransducerModel<T>& model, TrainConfig cfg, std::uint64_t seed)
      : model_(model), cfg_(std::move(cfg)) {
    cfg_.validate();
    state_.data_rng = sub_stream(seed, kStreamData);
    state_.sampler_rng = sub_stream(seed, kStreamSampler);
    state_.dropout_rng = sub_stream(seed, kStreamDropout);
  }

  const TrainConfig& config() const { return cfg_; }
  TrainerState<T>& state() { return state_; }
  const TrainerState<T>& state() const { return state_; }

  std::size_t choose_chunk() {
    switch (cfg_.training_mode) {
      case TrainingMode::kNonStreaming: return kFullAttentionChunk;
      case TrainingMode::kFixedChunk: return cfg_.fixed_chunk_frames;
      case TrainingMode::kMultiChunk: return sample_chunk_size(state_.sampler_rng, cfg_.chunk_choices);
    }
    return kFullAttentionChunk;
  }

  StepMetrics step(const std::vector<Utterance>& data) {
    if (data.empty()) throw Error("training dataset is empty");
    if (state_.order.size() != data.size()) {
      state_.order.resize(data.size());
      std::iota(state_.order.begin(), state_.order.end(), std::size_t{0});
      std::shuffle(state_.order.begin(), state_.order.end(), state_.data_rng);
      state_.cursor = 0;
    }
    const std::size_t end = std::min(data.size(), state_.cursor + cfg_.batch_size);
    std::vector<const Utterance*> batch;
    for (std::size_t i = state_.cursor; i < end; ++i) batch.push_back(&data[state_.order[i]]);
    if (batch.empty()) throw Error("empty batch");

    StepMetrics m;
    m.epoch = state_.epoch;
    m.chunk_frames = choose_chunk();
    const MaskSpec spec{m.chunk_frames, cfg_.left_context, 0, 1};

    Graph<T> g;
    Binder<T> p(g, model_.params());
    std::mt19937_64* drop = model_.config().encoder.dropout > 0.0 ? &state_.dropout_rng : nullptr;
    std::vector<Var<T>> losses;
    try {
      for (const Utterance* u : batch) losses.push_back(model_.loss(p, *u, spec, drop));
    } catch (const NumericError& e) {
      std::string ids;
      for (const Utterance* u : batch) ids += (ids.empty() ? "" : ",") + u->id;
      throw NumericError("non-finite loss at step " + std::to_string(state_.step + 1) +
                         " (epoch " + std::to_string(state_.epoch) + ", batch " + ids + "): " + e.what());
    }
    Var<T> total = losses.size() == 1 ? losses[0] : ag::sum(ag::concat_rows(reshape_all(losses)));
    Var<T> mean = ag::scale(total, T(1) / T(batch.size()));
    g.backward(mean);

    GradMap<T> grads = g.gradients();
    for (const auto& [name, t] : model_.params().all())
      if (!grads.count(name)) grads.emplace(name, Tensor<T>(t.shape()));
    m.grad_norm = clip_grad_norm(grads, cfg_.grad_clip);

    ++state_.step;
    m.step = state_.step;
    m.lr = lr_at(state_.step, state_.epoch, cfg_.schedule());
    m.mean_nll = double(mean.value()[0]);
    m.skipped = !adam_step(model_.params(), grads, state_.optim, m.lr);

    state_.cursor = end;
    if (state_.cursor >= data.size()) {
      ++state_.epoch;
      state_.cursor = 0;
      state_.order.clear();
    }
    return m;
  }

  /// Runs steps until the current epoch is exhausted.
  EpochMetrics train_epoch(const std::vector<Utterance>& data) {
    EpochMetrics em;
    em.epoch = state_.epoch;
    const std::size_t start_epoch = state_.epoch;
    double weighted = 0.0;
    std::size_t seen = 0;
    while (state_.epoch == start_epoch) {
      const std::size_t before = state_.cursor;
      StepMetrics m = step(data);
      const std::size_t n = (state_.epoch != start_epoch ? data.size() : state_.cursor) - before;
      weighted += m.mean_nll * double(n);
      seen += n;
      ++em.steps;
      em.lr_trace.push_back(m.lr);
      em.chunk_sizes_used.push_back(m.chunk_frames);
      em.skipped_steps += m.skipped ? 1 : 0;
    }
    em.mean_nll = weighted / double(seen);
    return em;
  }

 private:
  static std::vector<Var<T>> reshape_all(const std::vector<Var<T>>& vs) {
    std::vector<Var<T>> out;
    for (const auto& v : vs) out.push_back(ag::reshape(v, {1, 1}));
    return out;
  }

  TransducerModel<T>& model_;
  TrainConfig cfg_;
  TrainerState<T> state_;
};

/// Mean per-utterance transducer loss under a fixed mask geometry.
template <typename T>
double mean_nll(const TransducerModel<T>& model, const std::vector<Utterance>& data, const MaskSpec& spec) {
  double s = 0.0;
  for (const auto& u : data) s += double(model.nll(u, spec));
  return data.empty() ? 0.0 : s / double(data.size());
}

}  // namespace xtrd
