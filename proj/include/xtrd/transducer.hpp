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
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "xtrd/autograd.hpp"
#include "xtrd/params.hpp"
#include "xtrd/rnnt_loss.hpp"

namespace xtrd {

/// Token inventory; id 0 is always blank.
class Vocab {
 public:
  Vocab() : tokens_{"<blk>"} { index(); }
  explicit Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    if (tokens_.empty() || tokens_[0] != "<blk>")
      throw Error("vocabulary must start with the blank token <blk>");
    index();
  }

  /// Blank plus tokens "w1" .. "wK".
  static Vocab synthetic(std::size_t k) {
    std::vector<std::string> t{"<blk>"};
    for (std::size_t i = 1; i <= k; ++i) t.push_back("w" + std::to_string(i));
    return Vocab(std::move(t));
  }

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }

  int id(const std::string& word) const {
    auto it = ids_.find(word);
    if (it == ids_.end() || it->second == kBlank)
      throw Error("word '" + word + "' is not in the vocabulary");
    return it->second;
  }

  /// Whitespace tokenization into ids; blank never appears.
  std::vector<int> encode(const std::string& text) const {
    std::istringstream iss(text);
    std::vector<int> out;
    for (std::string w; iss >> w;) out.push_back(id(w));
    return out;
  }

  std::string decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
      if (!out.empty()) out += ' ';
      out += token(id);
    }
    return out;
  }

 private:
  void index() {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (!ids_.emplace(tokens_[i], static_cast<int>(i)).second)
        throw Error("duplicate vocabulary entry '" + tokens_[i] + "'");
    }
  }
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

/// Stateless label predictor: token embedding followed by one causal 1-D
/// convolution over the last `context` tokens.
struct PredictorConfig {
  std::size_t vocab_size = 17;
  std::size_t embed_dim = 32;
  std::size_t context = 2;

  void validate() const {
    if (context < 1) throw Error("predictor context must be >= 1");
    if (vocab_size < 2) throw Error("vocabulary needs blank plus at least one token");
  }
};

/// Joiner: tanh(enc_proj(enc) + pred_proj(pred)) followed by one linear layer.
struct JoinerConfig {
  std::size_t d_model = 32;
  std::size_t embed_dim = 32;
  std::size_t hidden = 32;
  std::size_t vocab_size = 17;
};

template <typename T, typename Rng>
void init_predictor(ParameterStore<T>& ps, const PredictorConfig& cfg, Rng& rng) {
  cfg.validate();
  ps.add("predictor.embed", normal<T>({cfg.vocab_size, cfg.embed_dim}, 1.0, rng));
  ps.add("predictor.conv", glorot<T>({cfg.context, cfg.embed_dim, cfg.embed_dim}, rng));
  ps.add("predictor.conv_b", Tensor<T>({cfg.embed_dim}));
}

template <typename T, typename Rng>
void init_joiner(ParameterStore<T>& ps, const JoinerConfig& cfg, Rng& rng) {
  ps.add("joiner.enc_w", glorot<T>({cfg.d_model, cfg.hidden}, rng));
  ps.add("joiner.enc_b", Tensor<T>({cfg.hidden}));
  ps.add("joiner.pred_w", glorot<T>({cfg.embed_dim, cfg.hidden}, rng));
  ps.add("joiner.out_w", glorot<T>({cfg.hidden, cfg.vocab_size}, rng));
  ps.add("joiner.out_b", Tensor<T>({cfg.vocab_size}));
}

/// Rows 0..U; row u sees tokens[u-k .. u-1]. Row 0 is the start state with an
/// all-zero context.
template <typename T>
Var<T> predictor_forward(Binder<T>& p, const PredictorConfig& cfg, const std::vector<int>& tokens) {
  for (int y : tokens) {
    if (y == kBlank) throw Error("predictor input contains the blank token");
  }
  auto& g = p.graph();
  Var<T> start = g.constant(Tensor<T>({1, cfg.embed_dim}));
  Var<T> seq = tokens.empty()
                   ? start
                   : ag::concat_rows<T>({start, ag::embedding(p("predictor.embed"), tokens)});
  Var<T> conv = ag::conv1d_causal(seq, p("predictor.conv"));
  return ag::relu(ag::add_row(conv, p("predictor.conv_b")));
}

/// Predictor output for a decoding state given its last (up to k) tokens.
template <typename T>
Tensor<T> predictor_step(const ParameterStore<T>& params, const PredictorConfig& cfg,
                         const std::vector<int>& context) {
  Graph<T> g(false);
  Binder<T> p(g, params);
  const Tensor<T> rows = predictor_forward(p, cfg, context).value();
  return kernels::slice_rows(rows, rows.dim(0) - 1, 1);
}

/// Last `k` tokens of a prefix.
inline std::vector<int> context_of(const std::vector<int>& tokens, std::size_t k) {
  const std::size_t n = std::min(k, tokens.size());
  return std::vector<int>(tokens.end() - static_cast<std::ptrdiff_t>(n), tokens.end());
}

/// Full lattice of logits [T x (U+1) x V].
template <typename T>
Var<T> joiner(Binder<T>& p, Var<T> enc, Var<T> pred) {
  const std::size_t nt = enc.shape()[0], nu = pred.shape()[0];
  Var<T> e = ag::linear(enc, p("joiner.enc_w"), p("joiner.enc_b"));
  Var<T> q = ag::matmul(pred, p("joiner.pred_w"));
  Var<T> h = ag::tanh(ag::pairwise_add(e, q));
  Var<T> logits = ag::linear(h, p("joiner.out_w"), p("joiner.out_b"));
  const std::size_t nv = logits.shape()[1];
  return ag::reshape(logits, {nt, nu, nv});
}

template <typename T>
Tensor<T> joiner(const ParameterStore<T>& params, const Tensor<T>& enc, const Tensor<T>& pred) {
  Graph<T> g(false);
  Binder<T> p(g, params);
  return joiner(p, g.constant(enc), g.constant(pred)).value();
}

/// Pointwise joiner pieces for search: projections are computed once per frame
/// and once per predictor state.
template <typename T>
Tensor<T> joiner_project_encoder(const ParameterStore<T>& params, const Tensor<T>& enc) {
  return kernels::add_row(kernels::matmul(enc, params.get("joiner.enc_w")),
                          params.get("joiner.enc_b"));
}

template <typename T>
Tensor<T> joiner_project_predictor(const ParameterStore<T>& params, const Tensor<T>& pred) {
  return kernels::matmul(pred, params.get("joiner.pred_w"));
}

/// Log-probabilities over the vocabulary for one (frame, state) pair; both
/// inputs are single projected rows [1 x hidden].
template <typename T>
Tensor<T> joiner_log_probs(const ParameterStore<T>& params, const Tensor<T>& enc_proj,
                           const Tensor<T>& pred_proj) {
  Tensor<T> h = kernels::map(kernels::add(enc_proj, pred_proj), [](T x) { return std::tanh(x); });
  Tensor<T> logits = kernels::add_row(kernels::matmul(h, params.get("joiner.out_w")),
                                      params.get("joiner.out_b"));
  return kernels::log_softmax(logits);
}

}  // namespace xtrd
