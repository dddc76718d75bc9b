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

#include <filesystem>
#include <string>

#include "json.hpp"
#include "xtrd/config.hpp"
#include "xtrd/model.hpp"
#include "xtrd/tensor_file.hpp"
#include "xtrd/trainer.hpp"

namespace xtrd {

/// Model parameters plus everything needed to resume training bit-exactly.
/// Parameters keep their hierarchical names; Adam moments are stored as
/// "optim.m.<name>" and "optim.v.<name>".
template <typename T>
struct Checkpoint {
  RunConfig config;
  ParameterStore<T> params;
  TrainerState<T> trainer;
  nlohmann::json extra = nlohmann::json::object();
};

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<T>& ck) {
  TensorFile f;
  const auto& s = ck.trainer;
  f.meta["kind"] = "checkpoint";
  f.meta["dtype"] = dtype_name(dtype_of<T>());
  f.meta["config"] = to_json(ck.config);
  f.meta["trainer"] = {
      {"step", s.step},
      {"epoch", s.epoch},
      {"cursor", s.cursor},
      {"order", s.order},
      {"data_rng", rng_to_string(s.data_rng)},
      {"sampler_rng", rng_to_string(s.sampler_rng)},
      {"dropout_rng", rng_to_string(s.dropout_rng)},
      {"optim_step", s.optim.step},
  };
  f.meta["extra"] = ck.extra;
  for (const auto& [name, t] : ck.params.all()) f.put(name, t);
  for (const auto& [name, t] : s.optim.m) f.put("optim.m." + name, t);
  for (const auto& [name, t] : s.optim.v) f.put("optim.v." + name, t);
  save_tensor_file(path, f);
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const TransducerModel<T>& model,
                     const TrainerState<T>& trainer, const RunConfig& cfg,
                     nlohmann::json extra = nlohmann::json::object()) {
  save_checkpoint(path, Checkpoint<T>{cfg, model.params(), trainer, std::move(extra)});
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  TensorFile f = load_tensor_file(path);
  if (f.meta.value("kind", "") != "checkpoint") throw Error(path.string() + " is not a checkpoint");
  if (f.meta.value("dtype", "") != dtype_name(dtype_of<T>()))
    throw Error("checkpoint " + path.string() + " holds " + f.meta.value("dtype", std::string("?")) +
                " tensors, expected " + dtype_name(dtype_of<T>()));
  Checkpoint<T> ck;
  try {
    ck.config = run_config_from_json(f.meta.at("config"));
    const auto& tr = f.meta.at("trainer");
    ck.trainer.step = tr.at("step").get<std::size_t>();
    ck.trainer.epoch = tr.at("epoch").get<std::size_t>();
    ck.trainer.cursor = tr.at("cursor").get<std::size_t>();
    ck.trainer.order = tr.at("order").get<std::vector<std::size_t>>();
    ck.trainer.data_rng = rng_from_string(tr.at("data_rng").get<std::string>());
    ck.trainer.sampler_rng = rng_from_string(tr.at("sampler_rng").get<std::string>());
    ck.trainer.dropout_rng = rng_from_string(tr.at("dropout_rng").get<std::string>());
    ck.trainer.optim.step = tr.at("optim_step").get<std::uint64_t>();
    ck.extra = f.meta.value("extra", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw Error("checkpoint metadata in " + path.string() + " is incomplete: " + e.what());
  }
  const std::string pm = "optim.m.", pv = "optim.v.";
  for (const auto& [name, any] : f.tensors) {
    const auto* t = std::get_if<Tensor<T>>(&any);
    if (!t) throw Error("tensor '" + name + "' has the wrong dtype");
    if (name.rfind(pm, 0) == 0) {
      ck.trainer.optim.m.emplace(name.substr(pm.size()), *t);
    } else if (name.rfind(pv, 0) == 0) {
      ck.trainer.optim.v.emplace(name.substr(pv.size()), *t);
    } else {
      ck.params.add(name, *t);
    }
  }
  return ck;
}

/// Copies checkpoint parameters into `model`. Both sides must have exactly the
/// same names and shapes.
template <typename T>
void load_params_into(TransducerModel<T>& model, const ParameterStore<T>& loaded) {
  auto& dst = model.params().all();
  for (const auto& [name, t] : loaded.all()) {
    auto it = dst.find(name);
    if (it == dst.end()) throw Error("checkpoint tensor '" + name + "' is unknown to this model");
    if (it->second.shape() != t.shape())
      throw ShapeError("checkpoint tensor '" + name + "' has shape " + shape_str(t.shape()) +
                       ", model expects " + shape_str(it->second.shape()));
  }
  for (const auto& [name, _] : dst)
    if (!loaded.contains(name)) throw Error("checkpoint lacks parameter '" + name + "'");
  for (auto& [name, t] : dst) t = loaded.get(name);
}

/// Rebuilds the model described by the checkpoint's config and fills its weights.
template <typename T>
TransducerModel<T> model_from_checkpoint(const Checkpoint<T>& ck) {
  TransducerModel<T> m = TransducerModel<T>::create(ck.config.model, 0);
  load_params_into(m, ck.params);
  return m;
}

}  // namespace xtrd
