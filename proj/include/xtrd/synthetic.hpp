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
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "xtrd/tensor.hpp"
#include "xtrd/utterance.hpp"

namespace xtrd {

/// A learnable stand-in ASR task: token k has a fixed template vector and an
/// utterance is each token's template repeated frames_per_token times plus
/// Gaussian noise.
struct SyntheticTaskConfig {
  std::size_t vocab_size = 16;  // K real tokens, ids 1..K
  std::size_t frames_per_token = 4;
  std::size_t feature_dim = 16;
  double noise_std = 0.1;
  std::size_t min_tokens = 3;
  std::size_t max_tokens = 10;
  bool allow_repeats = false;  // adjacent identical tokens
  std::uint64_t task_seed = 7;  // fixes the templates

  void validate() const {
    if (vocab_size < 2) throw Error("synthetic vocab_size must be >= 2");
    if (frames_per_token < 1) throw Error("frames_per_token must be >= 1");
    if (noise_std < 0.0) throw Error("noise_std must be >= 0");
    if (feature_dim < 1) throw Error("feature_dim must be >= 1");
    if (min_tokens < 1 || min_tokens > max_tokens) throw Error("need 1 <= min_tokens <= max_tokens");
  }
};

/// Row k holds the template of token k; row 0 (blank) is unused.
inline Tensor<float> synthetic_templates(const SyntheticTaskConfig& cfg) {
  std::mt19937_64 rng(cfg.task_seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Tensor<float> t({cfg.vocab_size + 1, cfg.feature_dim});
  for (std::size_t k = 1; k <= cfg.vocab_size; ++k)
    for (std::size_t d = 0; d < cfg.feature_dim; ++d) t.at(k, d) = float(dist(rng));
  return t;
}

/// Feature frames for a token sequence.
template <typename Rng>
Tensor<float> render_features(const SyntheticTaskConfig& cfg, const Tensor<float>& templates,
                              const std::vector<int>& tokens, Rng& rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  const std::size_t r = cfg.frames_per_token, d = cfg.feature_dim;
  Tensor<float> f({tokens.size() * r, d});
  for (std::size_t i = 0; i < tokens.size(); ++i)
    for (std::size_t j = 0; j < r; ++j)
      for (std::size_t c = 0; c < d; ++c)
        f.at(i * r + j, c) = templates.at(static_cast<std::size_t>(tokens[i]), c) +
                             float(cfg.noise_std * noise(rng));
  return f;
}

/// Frequency of the tone that stands for token k in rendered audio.
inline double token_tone_hz(int k) { return 250.0 + 180.0 * double(k - 1); }

/// Audio rendering: each token is a pure tone lasting frames_per_token hops
/// of 320 samples, plus noise.
template <typename Rng>
std::vector<float> render_audio(const SyntheticTaskConfig& cfg, const std::vector<int>& tokens, Rng& rng,
                                std::size_t hop = 320, double sample_rate = 16000.0) {
  std::normal_distribution<double> noise(0.0, 1.0);
  const std::size_t per_token = cfg.frames_per_token * hop;
  std::vector<float> s(tokens.size() * per_token);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const double f = token_tone_hz(tokens[i]);
    for (std::size_t n = 0; n < per_token; ++n) {
      const double t = double(i * per_token + n) / sample_rate;
      s[i * per_token + n] =
          float(0.5 * std::sin(2.0 * std::numbers::pi * f * t) + 0.1 * cfg.noise_std * noise(rng));
    }
  }
  return s;
}

/// `n_utts` utterances drawn with `seed`; templates come from cfg.task_seed so
/// sets generated with different seeds share one task.
inline std::vector<Utterance> gen_synthetic(const SyntheticTaskConfig& cfg, std::size_t n_utts,
                                            std::uint64_t seed, bool audio = false) {
  cfg.validate();
  const Tensor<float> templates = synthetic_templates(cfg);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> len(cfg.min_tokens, cfg.max_tokens);
  std::uniform_int_distribution<int> tok(1, static_cast<int>(cfg.vocab_size));
  std::vector<Utterance> out;
  out.reserve(n_utts);
  for (std::size_t i = 0; i < n_utts; ++i) {
    Utterance u;
    char id[64];
    std::snprintf(id, sizeof id, "synth-%llu-%05zu", static_cast<unsigned long long>(seed), i);
    u.id = id;
    const std::size_t n = len(rng);
    while (u.tokens.size() < n) {
      const int y = tok(rng);
      if (!cfg.allow_repeats && !u.tokens.empty() && u.tokens.back() == y) continue;
      u.tokens.push_back(y);
    }
    if (audio) {
      u.samples = render_audio(cfg, u.tokens, rng);
    } else {
      u.features = render_features(cfg, templates, u.tokens, rng);
    }
    out.push_back(std::move(u));
  }
  return out;
}

}  // namespace xtrd
