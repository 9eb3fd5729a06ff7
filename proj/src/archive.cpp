// Copyright 2026 The Demiguise Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "demiguise/archive.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "demiguise/errors.hpp"

namespace demiguise::nn {
namespace {

constexpr const char* kMagic = "demiguise-archive";
constexpr int kFormatVersion = 1;

template <typename T>
T to_little_endian(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    std::memcpy(&v, bytes, sizeof(T));
  }
  return v;
}

std::string join_shape(const std::vector<int>& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(shape[i]);
  }
  return s;
}

std::vector<int> parse_shape(const std::string& text, const std::filesystem::path& where) {
  std::vector<int> shape;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      shape.push_back(std::stoi(part));
    } catch (const std::exception&) {
      throw IoError("bad shape '" + text + "' in " + where.string());
    }
    if (shape.back() <= 0) throw IoError("non-positive dimension in " + where.string());
  }
  if (shape.empty()) throw IoError("empty shape in " + where.string());
  return shape;
}

std::size_t element_size(const std::string& dtype, const std::filesystem::path& where) {
  if (dtype == "f32") return 4;
  if (dtype == "f64") return 8;
  throw IoError("unsupported element type '" + dtype + "' in " + where.string());
}

}  // namespace

void save_archive(const std::filesystem::path& manifest, std::span<const Parameter* const> params,
                  ElementType type) {
  const std::filesystem::path data_path = manifest.parent_path() / (manifest.stem().string() + ".bin");
  std::ofstream data(data_path, std::ios::binary);
  std::ofstream text(manifest);
  if (!data || !text) throw IoError("cannot write archive " + manifest.string());
  const std::string dtype = type == ElementType::f32 ? "f32" : "f64";
  text << kMagic << ' ' << kFormatVersion << '\n';
  text << "data " << data_path.filename().string() << '\n';
  std::uint64_t offset = 0;
  for (const Parameter* p : params) {
    text << p->name << ' ' << dtype << ' ' << join_shape(p->shape) << ' ' << offset << '\n';
    for (double v : p->values) {
      if (type == ElementType::f32) {
        const float f = to_little_endian(static_cast<float>(v));
        data.write(reinterpret_cast<const char*>(&f), sizeof f);
        offset += sizeof f;
      } else {
        const double d = to_little_endian(v);
        data.write(reinterpret_cast<const char*>(&d), sizeof d);
        offset += sizeof d;
      }
    }
  }
  if (!data || !text) throw IoError("failed writing archive " + manifest.string());
}

std::vector<ArchiveTensor> load_archive(const std::filesystem::path& manifest) {
  std::ifstream text(manifest);
  if (!text) throw IoError("cannot open weight manifest " + manifest.string());
  std::string magic;
  int version = 0;
  text >> magic >> version;
  if (magic != kMagic || version != kFormatVersion) {
    throw IoError("not a version-1 weight manifest: " + manifest.string());
  }
  std::string key, data_name;
  text >> key >> data_name;
  if (key != "data") throw IoError("manifest missing data line: " + manifest.string());
  const std::filesystem::path data_path = manifest.parent_path() / data_name;
  std::ifstream data(data_path, std::ios::binary);
  if (!data) throw IoError("missing weight data file " + data_path.string());
  const std::vector<char> blob((std::istreambuf_iterator<char>(data)), std::istreambuf_iterator<char>());

  std::vector<ArchiveTensor> out;
  std::string name, dtype, shape_text;
  std::uint64_t offset = 0;
  while (text >> name >> dtype >> shape_text >> offset) {
    ArchiveTensor t{name, dtype, parse_shape(shape_text, manifest), {}};
    const std::size_t esize = element_size(dtype, manifest);
    std::size_t count = 1;
    for (int d : t.shape) count *= static_cast<std::size_t>(d);
    if (offset + count * esize > blob.size()) {
      throw IoError("tensor " + name + " runs past the end of " + data_path.string());
    }
    t.values.resize(count);
    const char* src = blob.data() + offset;
    for (std::size_t i = 0; i < count; ++i) {
      if (esize == 4) {
        float f;
        std::memcpy(&f, src + i * 4, 4);
        t.values[i] = static_cast<double>(to_little_endian(f));
      } else {
        double d;
        std::memcpy(&d, src + i * 8, 8);
        t.values[i] = to_little_endian(d);
      }
    }
    out.push_back(std::move(t));
  }
  if (!text.eof()) throw IoError("malformed tensor line in " + manifest.string());
  return out;
}

void load_parameters(Network& net, const std::filesystem::path& manifest) {
  std::map<std::string, ArchiveTensor> by_name;
  for (auto& t : load_archive(manifest)) by_name.emplace(t.name, std::move(t));
  for (Parameter* p : net.parameters()) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) throw IoError("archive " + manifest.string() + " lacks tensor " + p->name);
    if (it->second.shape != p->shape) {
      throw ShapeError("tensor " + p->name + " has shape " + join_shape(it->second.shape) + " in " +
                       manifest.string() + ", network expects " + join_shape(p->shape));
    }
    p->values = it->second.values;
  }
}

}  // namespace demiguise::nn
