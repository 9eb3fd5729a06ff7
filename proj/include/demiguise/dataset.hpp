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

// Procedurally rendered 10-class desk dataset. Every sample is a pure
// function of (seed, split, index), so the whole set can be regenerated
// instead of shipped. Images are rendered at 40x40, quantised to 8 bits, and
// go through the same resize/crop path as files loaded from disk.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "demiguise/imaging.hpp"

namespace demiguise::dataset {

inline constexpr int kNumClasses = 10;
inline constexpr int kRawSide = 40;
inline constexpr int kDeskResize = 36;
inline constexpr int kDeskCrop = 32;
inline constexpr std::uint64_t kDefaultSeed = 20210819;

const std::array<std::string_view, kNumClasses>& class_names();

std::uint64_t mix_seed(std::uint64_t seed, std::string_view salt, std::uint64_t index);

// Raw 3 x 40 x 40 rendering, values on the 1/255 grid.
imaging::ImageTensor render_raw(std::uint64_t seed, std::string_view split, int index, int label);

// Labels cycle through the classes: label = index % kNumClasses.
std::vector<imaging::LabeledImage> generate_split(std::uint64_t seed, std::string_view split, int count,
                                                  int resize_to = kDeskResize, int crop_to = kDeskCrop);

// Writes <dir>/<split>/<sample_id>.png and <dir>/<split>/labels.csv.
void write_split(const std::filesystem::path& dir, std::uint64_t seed, std::string_view split, int count);

// Reads a split written by write_split (or any directory with the same
// labels.csv layout), preprocessing each image.
std::vector<imaging::LabeledImage> load_split(const std::filesystem::path& dir, std::string_view split,
                                              int resize_to = kDeskResize, int crop_to = kDeskCrop);

}  // namespace demiguise::dataset
