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
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "xtrd/tensor.hpp"

namespace xtrd {

struct ManifestEntry {
  std::string utterance_id;
  std::optional<std::string> audio_path;
  std::optional<std::string> features_path;
  std::string text;
};

/// One JSON object per line; blank lines are skipped. Relative paths are
/// resolved against the manifest's directory. With `require_text`, every entry
/// must carry a non-empty transcript.
inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path, bool require_text = false) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path.string());
  const auto base = path.parent_path();
  std::vector<ManifestEntry> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error("malformed manifest line " + where + ": " + e.what());
    }
    if (!j.is_object()) throw Error("manifest line " + where + " is not a JSON object");
    ManifestEntry e;
    auto str = [&](const char* key) -> std::optional<std::string> {
      if (!j.contains(key) || j[key].is_null()) return std::nullopt;
      if (!j[key].is_string()) throw Error("manifest line " + where + ": field '" + key + "' must be a string");
      return j[key].get<std::string>();
    };
    auto id = str("utterance_id");
    if (!id || id->empty()) throw Error("manifest line " + where + ": missing utterance_id");
    e.utterance_id = *id;
    e.audio_path = str("audio_path");
    e.features_path = str("features_path");
    if (e.audio_path.has_value() == e.features_path.has_value())
      throw Error("manifest line " + where + ": exactly one of audio_path/features_path is required");
    auto resolve = [&](std::optional<std::string>& p) {
      if (p && std::filesystem::path(*p).is_relative()) p = (base / *p).string();
    };
    resolve(e.audio_path);
    resolve(e.features_path);
    e.text = str("text").value_or("");
    if (require_text && e.text.empty()) throw Error("manifest line " + where + ": missing text");
    out.push_back(std::move(e));
  }
  return out;
}

inline nlohmann::json manifest_json(const ManifestEntry& e) {
  nlohmann::json j;
  j["utterance_id"] = e.utterance_id;
  if (e.audio_path) j["audio_path"] = *e.audio_path;
  if (e.features_path) j["features_path"] = *e.features_path;
  j["text"] = e.text;
  return j;
}

inline void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write manifest " + path.string());
  for (const auto& e : entries) out << manifest_json(e).dump() << "\n";
}

}  // namespace xtrd
