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

#include <string>
#include <vector>

#include "demiguise/imaging.hpp"

namespace demiguise::defenses {

using imaging::ImageTensor;

enum class DefenseKind { none, jpeg, bit_depth };

struct DefenseSpec {
  DefenseKind kind = DefenseKind::none;
  int quality = 0;  // jpeg only, 1..100
  int bits = 0;     // bit_depth only, 1..8

  static DefenseSpec none() { return {}; }
  static DefenseSpec jpeg(int quality) { return {DefenseKind::jpeg, quality, 0}; }
  static DefenseSpec bit_depth(int bits) { return {DefenseKind::bit_depth, 0, bits}; }

  // Throws ConfigError unless exactly the parameter the kind needs is set.
  void validate() const;
  // "none", "jpeg:75", "bit_depth:4"; parse() accepts the same form.
  std::string label() const;
  static DefenseSpec parse(const std::string& text);

  bool operator==(const DefenseSpec&) const = default;
};

const char* defense_kind_name(DefenseKind kind);

ImageTensor apply_defense(const DefenseSpec& spec, const ImageTensor& x);

// JPEG qualities 100..10 step 15, then bit depths 7..1.
std::vector<DefenseSpec> defense_sweep_specs();

}  // namespace demiguise::defenses
