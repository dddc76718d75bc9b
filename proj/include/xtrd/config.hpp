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
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <set>
#include <string>

#include "json.hpp"
#include "xtrd/model.hpp"
#include "xtrd/search.hpp"
#include "xtrd/synthetic.hpp"
#include "xtrd/trainer.hpp"

// Run configuration as one JSON document with sections model/train/decode/data
// plus a mandatory root seed. Unknown keys are rejected by dotted path.
namespace xtrd {

/// Invalid or unknown configuration; the CLI maps this to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct RunConfig {
  std::uint64_t seed = 0;
  ModelConfig model;
  TrainConfig train;
  DecodeConfig decode;
  SyntheticTaskConfig data;

  void validate() const {
    try {
      model.validate();
      train.validate();
      decode.validate();
      data.validate();
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    if (model.input == InputKind::kFeatures && model.feature_dim != data.feature_dim)
      throw ConfigError("model.feature_dim (" + std::to_string(model.feature_dim) +
                        ") differs from data.feature_dim (" + std::to_string(data.feature_dim) + ")");
    if (model.vocab_size != data.vocab_size + 1)
      throw ConfigError("model.vocab_size must be data.vocab_size + 1 (blank)");
  }
};

namespace detail {

using nlohmann::json;

class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config section '" + path_ + "' must be an object");
  }

  void allow(std::initializer_list<const char*> keys) {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, _] : j_.items())
      if (!ok.count(k)) throw ConfigError("unknown config key '" + key(k) + "'");
  }

  bool has(const std::string& k) const { return j_.contains(k); }

  Section sub(const std::string& k) const { return Section(j_.at(k), key(k)); }

  template <typename V>
  void get(const std::string& k, V& out) const {
    if (!j_.contains(k)) return;
    try {
      out = j_.at(k).get<V>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + key(k) + "' has the wrong type");
    }
  }

  void get_size(const std::string& k, std::size_t& out) const {
    if (!j_.contains(k)) return;
    const json& v = j_.at(k);
    if (!v.is_number_unsigned()) throw ConfigError("config key '" + key(k) + "' must be a non-negative integer");
    out = v.get<std::size_t>();
  }

  /// "full" or a non-negative integer.
  void get_chunk(const std::string& k, std::size_t& out) const {
    if (!j_.contains(k)) return;
    const json& v = j_.at(k);
    if (v.is_string() && v.get<std::string>() == "full") {
      out = kFullAttentionChunk;
    } else if (v.is_number_unsigned()) {
      out = v.get<std::size_t>();
    } else {
      throw ConfigError("config key '" + key(k) + "' must be \"full\" or a frame count");
    }
  }

  void get_left(const std::string& k, LeftContext& out) const {
    if (!j_.contains(k)) return;
    const json& v = j_.at(k);
    if (v.is_string() && v.get<std::string>() == "full") {
      out = LeftContext::full();
    } else if (v.is_number_unsigned()) {
      out = LeftContext::chunks(v.get<std::size_t>());
    } else {
      throw ConfigError("config key '" + key(k) + "' must be \"full\" or a chunk count");
    }
  }

  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

 private:
  const json& j_;
  std::string path_;
};

inline json chunk_json(std::size_t c) { return c == kFullAttentionChunk ? json("full") : json(c); }

inline json left_json(const LeftContext& l) { return l.is_full() ? json("full") : json(l.chunks()); }

}  // namespace detail

inline nlohmann::json to_json(const RunConfig& c) {
  using nlohmann::json;
  json j;
  j["seed"] = c.seed;
  j["model"] = {
      {"input", input_kind_name(c.model.input)},
      {"feature_dim", c.model.feature_dim},
      {"frontend_hidden", c.model.frontend_hidden},
      {"encoder",
       {{"n_layers", c.model.encoder.n_layers},
        {"n_heads", c.model.encoder.n_heads},
        {"d_model", c.model.encoder.d_model},
        {"d_ffn", c.model.encoder.d_ffn},
        {"dropout", c.model.encoder.dropout}}},
      {"embed_dim", c.model.embed_dim},
      {"context", c.model.context},
      {"joiner_dim", c.model.joiner_dim},
      {"vocab_size", c.model.vocab_size},
  };
  j["train"] = {
      {"learning_rate", c.train.learning_rate},
      {"warmup_steps", c.train.warmup_steps},
      {"epoch_decay", c.train.epoch_decay},
      {"epochs", c.train.epochs},
      {"batch_size", c.train.batch_size},
      {"chunk_choices", c.train.chunk_choices},
      {"training_mode", training_mode_name(c.train.training_mode)},
      {"fixed_chunk_frames", c.train.fixed_chunk_frames},
      {"left_context", detail::left_json(c.train.left_context)},
      {"grad_clip", c.train.grad_clip},
      {"loss", c.train.loss},
      {"optimizer", c.train.optimizer},
  };
  j["decode"] = {
      {"beam_width", c.decode.beam_width},
      {"max_symbols_per_frame", c.decode.max_symbols_per_frame},
      {"chunk_frames", detail::chunk_json(c.decode.mask.chunk_frames)},
      {"left_context", detail::left_json(c.decode.mask.left_context)},
      {"sink_frames", c.decode.mask.sink_frames},
  };
  j["data"] = {
      {"vocab_size", c.data.vocab_size},
      {"frames_per_token", c.data.frames_per_token},
      {"feature_dim", c.data.feature_dim},
      {"noise_std", c.data.noise_std},
      {"min_tokens", c.data.min_tokens},
      {"max_tokens", c.data.max_tokens},
      {"allow_repeats", c.data.allow_repeats},
      {"task_seed", c.data.task_seed},
  };
  return j;
}

/// Missing keys keep their defaults, except the root seed.
inline RunConfig run_config_from_json(const nlohmann::json& j) {
  using detail::Section;
  RunConfig c;
  Section root(j, "");
  root.allow({"seed", "model", "train", "decode", "data"});
  if (!root.has("seed")) throw ConfigError("config key 'seed' is mandatory");
  if (!j.at("seed").is_number_unsigned()) throw ConfigError("config key 'seed' must be a non-negative integer");
  c.seed = j.at("seed").get<std::uint64_t>();

  if (root.has("model")) {
    Section m = root.sub("model");
    m.allow({"input", "feature_dim", "frontend_hidden", "encoder", "embed_dim", "context", "joiner_dim",
             "vocab_size"});
    std::string input = input_kind_name(c.model.input);
    m.get("input", input);
    if (input == "features") c.model.input = InputKind::kFeatures;
    else if (input == "audio") c.model.input = InputKind::kAudio;
    else throw ConfigError("config key 'model.input' must be \"features\" or \"audio\"");
    m.get_size("feature_dim", c.model.feature_dim);
    m.get_size("frontend_hidden", c.model.frontend_hidden);
    m.get_size("embed_dim", c.model.embed_dim);
    m.get_size("context", c.model.context);
    m.get_size("joiner_dim", c.model.joiner_dim);
    m.get_size("vocab_size", c.model.vocab_size);
    if (m.has("encoder")) {
      Section e = m.sub("encoder");
      e.allow({"n_layers", "n_heads", "d_model", "d_ffn", "dropout"});
      e.get_size("n_layers", c.model.encoder.n_layers);
      e.get_size("n_heads", c.model.encoder.n_heads);
      e.get_size("d_model", c.model.encoder.d_model);
      e.get_size("d_ffn", c.model.encoder.d_ffn);
      e.get("dropout", c.model.encoder.dropout);
    }
  }

  if (root.has("train")) {
    Section t = root.sub("train");
    t.allow({"learning_rate", "warmup_steps", "epoch_decay", "epochs", "batch_size", "chunk_choices",
             "training_mode", "fixed_chunk_frames", "left_context", "grad_clip", "loss", "optimizer"});
    t.get("learning_rate", c.train.learning_rate);
    t.get_size("warmup_steps", c.train.warmup_steps);
    t.get("epoch_decay", c.train.epoch_decay);
    t.get_size("epochs", c.train.epochs);
    t.get_size("batch_size", c.train.batch_size);
    t.get("chunk_choices", c.train.chunk_choices);
    std::string mode = training_mode_name(c.train.training_mode);
    t.get("training_mode", mode);
    try {
      c.train.training_mode = parse_training_mode(mode);
    } catch (const Error& e) {
      throw ConfigError(std::string("config key 'train.training_mode': ") + e.what());
    }
    t.get_size("fixed_chunk_frames", c.train.fixed_chunk_frames);
    t.get_left("left_context", c.train.left_context);
    t.get("grad_clip", c.train.grad_clip);
    t.get("loss", c.train.loss);
    t.get("optimizer", c.train.optimizer);
    if (c.train.loss != "rnnt_exact") throw ConfigError("config key 'train.loss' supports only \"rnnt_exact\"");
    if (c.train.optimizer != "adam") throw ConfigError("config key 'train.optimizer' supports only \"adam\"");
  }

  if (root.has("decode")) {
    Section d = root.sub("decode");
    d.allow({"beam_width", "max_symbols_per_frame", "chunk_frames", "left_context", "sink_frames"});
    d.get_size("beam_width", c.decode.beam_width);
    d.get_size("max_symbols_per_frame", c.decode.max_symbols_per_frame);
    d.get_chunk("chunk_frames", c.decode.mask.chunk_frames);
    d.get_left("left_context", c.decode.mask.left_context);
    d.get_size("sink_frames", c.decode.mask.sink_frames);
  }

  if (root.has("data")) {
    Section d = root.sub("data");
    d.allow({"vocab_size", "frames_per_token", "feature_dim", "noise_std", "min_tokens", "max_tokens",
             "allow_repeats", "task_seed"});
    d.get_size("vocab_size", c.data.vocab_size);
    d.get_size("frames_per_token", c.data.frames_per_token);
    d.get_size("feature_dim", c.data.feature_dim);
    d.get("noise_std", c.data.noise_std);
    d.get_size("min_tokens", c.data.min_tokens);
    d.get_size("max_tokens", c.data.max_tokens);
    d.get("allow_repeats", c.data.allow_repeats);
    d.get("task_seed", c.data.task_seed);
  }

  c.validate();
  return c;
}

inline RunConfig parse_run_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return run_config_from_json(j);
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_run_config(text);
}

/// Canonical text: sorted keys, two-space indent.
inline std::string serialize_run_config(const RunConfig& c) { return to_json(c).dump(2); }

}  // namespace xtrd
