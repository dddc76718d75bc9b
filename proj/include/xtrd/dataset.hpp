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
#include <vector>

#include "xtrd/manifest.hpp"
#include "xtrd/tensor_file.hpp"
#include "xtrd/transducer.hpp"
#include "xtrd/utterance.hpp"
#include "xtrd/wav.hpp"

namespace xtrd {

/// Reads the audio or feature file behind each manifest entry. Transcripts are
/// mapped to token ids when present.
inline std::vector<Utterance> load_dataset(const std::filesystem::path& manifest, const Vocab& vocab,
                                           bool require_text = false) {
  std::vector<Utterance> out;
  for (const auto& e : read_manifest(manifest, require_text)) {
    Utterance u;
    u.id = e.utterance_id;
    if (e.features_path) {
      u.features = load_features(*e.features_path);
    } else {
      u.samples = read_wav(*e.audio_path).samples;
      if (u.samples.empty()) throw Error("utterance '" + u.id + "' has no audio");
    }
    try {
      u.tokens = vocab.encode(e.text);
    } catch (const Error& err) {
      throw Error("utterance '" + u.id + "': " + err.what());
    }
    out.push_back(std::move(u));
  }
  return out;
}

/// Writes one feature (".xtrd") or WAV file per utterance into `dir` plus
/// `dir/manifest.jsonl` with relative paths. Returns the manifest path.
inline std::filesystem::path write_dataset(const std::filesystem::path& dir, const std::vector<Utterance>& data,
                                           const Vocab& vocab) {
  std::filesystem::create_directories(dir);
  std::vector<ManifestEntry> entries;
  for (const auto& u : data) {
    ManifestEntry e;
    e.utterance_id = u.id;
    e.text = vocab.decode(u.tokens);
    if (u.is_audio()) {
      const std::string name = u.id + ".wav";
      write_wav(dir / name, u.samples);
      e.audio_path = name;
    } else {
      const std::string name = u.id + ".xtrd";
      save_features(dir / name, u.features);
      e.features_path = name;
    }
    entries.push_back(std::move(e));
  }
  const auto manifest = dir / "manifest.jsonl";
  write_manifest(manifest, entries);
  return manifest;
}

}  // namespace xtrd
