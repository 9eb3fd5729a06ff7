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

#include <cstddef>
#include <string>
#include <vector>

#include "demiguise/nn.hpp"

namespace demiguise {

inline constexpr int kDeskImageSide = 32;

// A network together with the layer indices whose outputs are feature taps.
struct Architecture {
  std::string tag;
  nn::Network network;
  std::vector<std::size_t> taps;
};

// Known tags: "percept_vgg" (five tapped conv blocks plus a training head),
// "vgg_small", "resnet_small", "mobile_small". Throws ConfigError otherwise.
Architecture build_architecture(const std::string& tag, int num_classes = 10, int side = kDeskImageSide);

std::vector<std::string> architecture_tags();

}  // namespace demiguise
