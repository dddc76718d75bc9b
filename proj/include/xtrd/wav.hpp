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
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "xtrd/tensor.hpp"

namespace xtrd {

struct Audio {
  std::vector<float> samples;  // in [-1, 1]
  std::uint32_t sample_rate = 16000;
};

inline constexpr std::uint32_t kSampleRate = 16000;

namespace detail {
inline std::uint32_t le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}
inline std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}
inline void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}
}  // namespace detail

/// RIFF/WAVE, PCM16, mono, 16 kHz. Sample i = int16 / 32768.
inline Audio read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open WAV file " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = " in " + path.string();
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 || std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw Error("not a RIFF/WAVE file" + where);

  bool have_fmt = false;
  Audio audio;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const std::string id(reinterpret_cast<const char*>(buf.data() + pos), 4);
    const std::uint32_t size = detail::le32(buf.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > buf.size()) throw Error("truncated WAV chunk '" + id + "'" + where);
    if (id == "fmt ") {
      if (size < 16) throw Error("WAV fmt chunk too short" + where);
      const auto format = detail::le16(buf.data() + body);
      const auto channels = detail::le16(buf.data() + body + 2);
      const auto rate = detail::le32(buf.data() + body + 4);
      const auto bits = detail::le16(buf.data() + body + 14);
      if (format != 1) throw Error("unsupported WAV audio_format=" + std::to_string(format) + " (need PCM=1)" + where);
      if (channels != 1) throw Error("unsupported WAV channels=" + std::to_string(channels) + " (need mono)" + where);
      if (rate != kSampleRate)
        throw Error("unsupported WAV sample_rate=" + std::to_string(rate) + " (need 16000)" + where);
      if (bits != 16) throw Error("unsupported WAV bits_per_sample=" + std::to_string(bits) + " (need 16)" + where);
      audio.sample_rate = rate;
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw Error("WAV data chunk before fmt chunk" + where);
      const std::size_t n = size / 2;
      audio.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto raw = static_cast<std::int16_t>(detail::le16(buf.data() + body + 2 * i));
        audio.samples[i] = float(raw) / 32768.0f;
      }
      return audio;
    }
    pos = body + size + (size & 1);
  }
  throw Error("WAV file has no data chunk" + where);
}

/// Writes PCM16 mono; samples are clamped to [-1, 1).
inline void write_wav(const std::filesystem::path& path, const std::vector<float>& samples,
                      std::uint32_t sample_rate = kSampleRate) {
  std::string out;
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out += "RIFF";
  detail::put32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  detail::put32(out, 16);
  detail::put16(out, 1);
  detail::put16(out, 1);
  detail::put32(out, sample_rate);
  detail::put32(out, sample_rate * 2);
  detail::put16(out, 2);
  detail::put16(out, 16);
  out += "data";
  detail::put32(out, data_bytes);
  for (float s : samples) {
    const long v = std::lround(double(s) * 32768.0);
    detail::put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp(v, -32768L, 32767L))));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write WAV file " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace xtrd
