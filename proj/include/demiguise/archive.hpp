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

#pragma once

// Weight archives: a flat little-endian binary blob plus a plain-text
// manifest, one tensor per line:
//
//   demiguise-archive 1
//   data vgg_small.bin
//   <name> <dtype:f32|f64> <d0,d1,...> <byte offset>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "demiguise/nn.hpp"

namespace demiguise::nn {

struct ArchiveTensor {
  std::string name;
  std::string dtype;
  std::vector<int> shape;
  std::vector<double> values;
};

enum class ElementType { f32, f64 };

// Writes `<manifest>` and a sibling data file named `<manifest stem>.bin`.
void save_archive(const std::filesystem::path& manifest, std::span<const Parameter* const> params,
                  ElementType type = ElementType::f32);

std::vector<ArchiveTensor> load_archive(const std::filesystem::path& manifest);

// Copies archive tensors into the network's parameters by name. Every
// parameter must be present with a matching shape.
void load_parameters(Network& net, const std::filesystem::path& manifest);

}  // namespace demiguise::nn
