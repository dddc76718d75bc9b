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

#include <cstdint>
#include <random>
#include <string>

#include "xtrd/encoder.hpp"
#include "xtrd/frontend.hpp"
#include "xtrd/mask.hpp"
#include "xtrd/transducer.hpp"
#include "xtrd/utterance.hpp"

namespace xtrd {

enum class InputKind { kFeatures, kAudio };

inline const char* input_kind_name(InputKind k) {
  return k == InputKind::kFeatures ? "features" : "audio";
}

struct ModelConfig {
  InputKind input = InputKind::kFeatures;
  std::size_t feature_dim = 16;
  std::size_t frontend_hidden = 64;
  EncoderConfig encoder;
  std::size_t embed_dim = 32;
  std::size_t context = 2;
  std::size_t joiner_dim = 32;
  std::size_t vocab_size = 17;  // including blank

  FrontEndConfig frontend() const {
    FrontEndConfig f;
    f.hidden = frontend_hidden;
    f.d_model = encoder.d_model;
    return f;
  }
  PredictorConfig predictor() const { return {vocab_size, embed_dim, context}; }
  JoinerConfig joiner() const { return {encoder.d_model, embed_dim, joiner_dim, vocab_size}; }

  void validate() const {
    encoder.validate();
    predictor().validate();
    if (input == InputKind::kFeatures && feature_dim == 0) throw Error("feature_dim must be positive");
  }
};

/// Encoder, stateless predictor and joiner sharing one parameter store.
template <typename T>
class TransducerModel {
 public:
  TransducerModel() = default;
  explicit TransducerModel(ModelConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  static TransducerModel create(const ModelConfig& cfg, std::uint64_t seed) {
    TransducerModel m(cfg);
    std::mt19937_64 rng(seed);
    if (cfg.input == InputKind::kFeatures) {
      m.params_.add("input.w", glorot<T>({cfg.feature_dim, cfg.encoder.d_model}, rng));
      m.params_.add("input.b", Tensor<T>({cfg.encoder.d_model}));
    } else {
      init_frontend(m.params_, cfg.frontend(), rng);
    }
    init_encoder(m.params_, cfg.encoder, rng);
    init_predictor(m.params_, cfg.predictor(), rng);
    init_joiner(m.params_, cfg.joiner(), rng);
    return m;
  }

  const ModelConfig& config() const { return cfg_; }
  const ParameterStore<T>& params() const { return params_; }
  ParameterStore<T>& params() { return params_; }
  Vocab vocab() const { return Vocab::synthetic(cfg_.vocab_size - 1); }

  std::size_t num_frames(const Utterance& u) const {
    if (cfg_.input == InputKind::kAudio) {
      if (!u.is_audio()) throw Error("audio model given a feature utterance '" + u.id + "'");
      const std::size_t hop = cfg_.frontend().frame_hop;
      return (u.samples.size() + hop - 1) / hop;
    }
    if (u.features.empty()) throw Error("feature model given an utterance without features '" + u.id + "'");
    return u.features.dim(0);
  }

  /// Projected feature rows; row-wise, so any split into chunks gives the same rows.
  Var<T> project_features(Binder<T>& p, const Tensor<float>& feats) const {
    if (feats.rank() != 2 || feats.dim(1) != cfg_.feature_dim)
      throw ShapeError("features must be [frames x " + std::to_string(cfg_.feature_dim) + "], got " +
                       shape_str(feats.shape()));
    Var<T> x = p.graph().constant(feats.template cast<T>());
    return ag::linear(x, p("input.w"), p("input.b"));
  }

  Tensor<T> project_features(const Tensor<float>& feats) const {
    Graph<T> g(false);
    Binder<T> p(g, params_);
    return project_features(p, feats).value();
  }

  /// Encoder input frames [T x d_model]. Audio is run through the front-end
  /// one chunk of `chunk_frames` at a time.
  Var<T> input_frames(Binder<T>& p, const Utterance& u, std::size_t chunk_frames) const {
    if (cfg_.input == InputKind::kAudio) {
      if (!u.is_audio()) throw Error("audio model given a feature utterance '" + u.id + "'");
      return frontend_utterance(p, u.samples, chunk_frames, cfg_.frontend());
    }
    return project_features(p, u.features);
  }

  Var<T> encode(Binder<T>& p, const Utterance& u, const MaskSpec& spec,
                std::mt19937_64* dropout_rng = nullptr) const {
    return encode_offline(p, cfg_.encoder, input_frames(p, u, spec.chunk_frames), spec, dropout_rng);
  }

  Tensor<T> encode(const Utterance& u, const MaskSpec& spec) const {
    Graph<T> g(false);
    Binder<T> p(g, params_);
    return encode(p, u, spec).value();
  }

  /// Transducer negative log-likelihood of the utterance's tokens.
  Var<T> loss(Binder<T>& p, const Utterance& u, const MaskSpec& spec,
              std::mt19937_64* dropout_rng = nullptr) const {
    Var<T> enc = encode(p, u, spec, dropout_rng);
    Var<T> pred = predictor_forward(p, cfg_.predictor(), u.tokens);
    return ag::rnnt_loss(joiner(p, enc, pred), u.tokens);
  }

  T nll(const Utterance& u, const MaskSpec& spec) const {
    Graph<T> g(false);
    Binder<T> p(g, params_);
    return loss(p, u, spec).value()[0];
  }

 private:
  ModelConfig cfg_;
  ParameterStore<T> params_;
};

}  // namespace xtrd
