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

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"
#include "xtrd/tensor.hpp"

// Named-tensor container shared by checkpoints and feature files.
//
// Layout, all integers little-endian:
//   "XTRD" | u32 version | u64 meta_len | meta (UTF-8 JSON) | u32 count |
//   count x ( u32 name_len | name | u8 dtype | u32 rank | u64 dims[rank] |
//             payload, numel scalars in IEEE-754 little-endian )
namespace xtrd {

static_assert(std::endian::native == std::endian::little,
              "tensor files are written with native little-endian stores");

inline constexpr char kMagic[4] = {'X', 'T', 'R', 'D'};
inline constexpr std::uint32_t kFormatVersion = 1;

using AnyTensor = std::variant<Tensor<float>, Tensor<double>>;

struct TensorFile {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, AnyTensor>> tensors;

  template <typename T>
  void put(const std::string& name, Tensor<T> t) {
    tensors.emplace_back(name, AnyTensor(std::move(t)));
  }

  const AnyTensor* find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return &t;
    return nullptr;
  }

  /// Tensor by name, converted to T if stored in the other precision.
  template <typename T>
  Tensor<T> get(const std::string& name) const {
    const AnyTensor* t = find(name);
    if (!t) throw Error("tensor '" + name + "' not found in file");
    return std::visit([](const auto& x) { return x.template cast<T>(); }, *t);
  }
};

namespace detail {

class Writer {
 public:
  template <typename V>
  void pod(V v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof v);
  }
  void bytes(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  void str(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    buf_ += s;
  }
  const std::string& buffer() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> data) : data_(std::move(data)) {}
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw Error("truncated payload");
  }
  template <typename V>
  V pod() {
    need(sizeof(V));
    V v;
    std::memcpy(&v, data_.data() + pos_, sizeof v);
    pos_ += sizeof v;
    return v;
  }
  void bytes(void* out, std::size_t n) {
    need(n);
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(data_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::vector<char> data_;
  std::size_t pos_ = 0;
};

template <typename T>
void write_tensor(Writer& w, const std::string& name, const Tensor<T>& t) {
  w.str(name);
  w.pod(static_cast<std::uint8_t>(dtype_of<T>()));
  w.pod(static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) w.pod(static_cast<std::uint64_t>(d));
  w.bytes(t.storage().data(), t.numel() * sizeof(T));
}

template <typename T>
Tensor<T> read_payload(Reader& r, Shape shape) {
  std::vector<T> data(shape_numel(shape));
  r.bytes(data.data(), data.size() * sizeof(T));
  return Tensor<T>(std::move(shape), std::move(data));
}

}  // namespace detail

/// Writes to a temporary sibling, then renames over `path`.
inline void save_tensor_file(const std::filesystem::path& path, const TensorFile& file) {
  detail::Writer w;
  w.bytes(kMagic, 4);
  w.pod(kFormatVersion);
  const std::string meta = file.meta.dump();
  w.pod(static_cast<std::uint64_t>(meta.size()));
  w.bytes(meta.data(), meta.size());
  w.pod(static_cast<std::uint32_t>(file.tensors.size()));
  for (const auto& [name, t] : file.tensors)
    std::visit([&](const auto& x) { detail::write_tensor(w, name, x); }, t);

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline TensorFile load_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  detail::Reader r(std::vector<char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()));
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw Error("bad magic in " + path.string());
  const auto version = r.pod<std::uint32_t>();
  if (version != kFormatVersion)
    throw Error("unsupported format version " + std::to_string(version) + " in " + path.string());
  TensorFile f;
  const auto meta_len = r.pod<std::uint64_t>();
  const std::string meta = r.str(meta_len);
  try {
    f.meta = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw Error("corrupt metadata in " + path.string() + ": " + e.what());
  }
  const auto count = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str(r.pod<std::uint32_t>());
    const auto dtype = static_cast<DType>(r.pod<std::uint8_t>());
    const auto rank = r.pod<std::uint32_t>();
    Shape shape;
    for (std::uint32_t k = 0; k < rank; ++k) shape.push_back(static_cast<std::size_t>(r.pod<std::uint64_t>()));
    if (dtype == DType::kFloat32) {
      f.tensors.emplace_back(name, detail::read_payload<float>(r, std::move(shape)));
    } else if (dtype == DType::kFloat64) {
      f.tensors.emplace_back(name, detail::read_payload<double>(r, std::move(shape)));
    } else {
      throw Error("unknown dtype code for tensor '" + name + "'");
    }
  }
  if (!r.done()) throw Error("trailing bytes after last tensor in " + path.string());
  return f;
}

/// Feature files hold a single tensor named "frames".
inline void save_features(const std::filesystem::path& path, const Tensor<float>& frames) {
  TensorFile f;
  f.meta["kind"] = "features";
  f.put("frames", frames);
  save_tensor_file(path, f);
}

inline Tensor<float> load_features(const std::filesystem::path& path) {
  return load_tensor_file(path).get<float>("frames");
}

}  // namespace xtrd
