// Copyright 2026 The DGR Lab Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dgr/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>

namespace dgr {
namespace {

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw CheckpointError("checkpoint " + path + " is truncated");
  }
  return v;
}

}  // namespace

void save_tensors(const std::string& path, const NamedParams<float>& tensors) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + path);
    out.write(kCheckpointMagic, sizeof kCheckpointMagic);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
      put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      put<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
      for (Index d : t.shape()) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
      out.write(reinterpret_cast<const char*>(t.data().data()),
                static_cast<std::streamsize>(t.size() * sizeof(float)));
    }
    if (!out) throw IoError("failed writing checkpoint " + path);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into " + path + ": " + ec.message());
}

NamedParams<float> read_tensors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  char magic[sizeof kCheckpointMagic];
  if (!in.read(magic, sizeof magic)) throw CheckpointError("checkpoint " + path + " is truncated");
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw CheckpointError("checkpoint " + path + " has bad magic (expected DGRCKPT1)");
  }
  const auto count = get<std::uint32_t>(in, path);
  NamedParams<float> out;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = get<std::uint16_t>(in, path);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw CheckpointError("checkpoint " + path + " is truncated");
    const auto rank = get<std::uint8_t>(in, path);
    Shape shape;
    for (int d = 0; d < rank; ++d) shape.push_back(static_cast<Index>(get<std::uint32_t>(in, path)));
    Buffer<float> data(numel(shape));
    if (!in.read(reinterpret_cast<char*>(data.data()),
                 static_cast<std::streamsize>(data.size() * sizeof(float)))) {
      throw CheckpointError("checkpoint " + path + " is truncated in tensor '" + name + "'");
    }
    out.emplace_back(std::move(name), Tensor<float>(std::move(shape), std::move(data)));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw CheckpointError("checkpoint " + path + " has trailing bytes");
  }
  return out;
}

void assign_tensors(const NamedParams<float>& stored, const NamedParams<float>& targets) {
  std::map<std::string, const Tensor<float>*> by_name;
  for (const auto& [name, t] : stored) by_name[name] = &t;
  for (const auto& [name, t] : targets) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw CheckpointError("checkpoint lacks tensor '" + name + "'");
    if (it->second->shape() != t.shape()) {
      throw CheckpointError("checkpoint tensor '" + name + "' has shape " +
                            shape_str(it->second->shape()) + ", expected " + shape_str(t.shape()));
    }
  }
  for (const auto& [name, t] : targets) {
    Tensor<float> dst = t;
    dst.mutable_data() = by_name.at(name)->data();
  }
}

}  // namespace dgr
