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

#include "demiguise/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "demiguise/errors.hpp"

namespace demiguise::dataset {
namespace {

constexpr int kSupersample = 3;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct Rgb {
  double r, g, b;
};

double color_distance(const Rgb& a, const Rgb& b) {
  return std::sqrt((a.r - b.r) * (a.r - b.r) + (a.g - b.g) * (a.g - b.g) + (a.b - b.b) * (a.b - b.b));
}

// Shape membership in normalised object coordinates (u, v), roughly [-1, 1].
bool inside(int label, double u, double v) {
  const double au = std::abs(u), av = std::abs(v);
  const double r = std::sqrt(u * u + v * v);
  const bool in_box = au < 0.8 && av < 0.8;
  switch (label) {
    case 0:  // disk
      return r < 0.8;
    case 1:  // square
      return au < 0.68 && av < 0.68;
    case 2: {  // triangle, apex up
      if (v > 0.6 || v < -0.8) return false;
      const double half_width = 0.75 * (v + 0.8) / 1.4;
      return au < half_width;
    }
    case 3:  // ring
      return r < 0.82 && r > 0.48;
    case 4:  // plus
      return (au < 0.22 && av < 0.85) || (av < 0.22 && au < 0.85);
    case 5:  // horizontal bars
      return in_box && static_cast<int>(std::floor((v + 0.8) / 0.32)) % 2 == 0;
    case 6:  // vertical bars
      return in_box && static_cast<int>(std::floor((u + 0.8) / 0.32)) % 2 == 0;
    case 7:  // checkerboard
      return in_box && (static_cast<int>(std::floor((u + 0.8) / 0.4)) +
                        static_cast<int>(std::floor((v + 0.8) / 0.4))) % 2 == 0;
    case 8: {  // diagonal cross
      const double p = (u + v) * std::numbers::sqrt2 / 2, q = (u - v) * std::numbers::sqrt2 / 2;
      return (std::abs(p) < 0.2 && std::abs(q) < 0.9) || (std::abs(q) < 0.2 && std::abs(p) < 0.9);
    }
    case 9: {  // pair of dots
      const double d1 = std::hypot(u - 0.45, v), d2 = std::hypot(u + 0.45, v);
      return d1 < 0.32 || d2 < 0.32;
    }
    default:
      throw PreconditionError("label out of range for desk dataset");
  }
}

Rgb random_color(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return {u(rng), u(rng), u(rng)};
}

}  // namespace

const std::array<std::string_view, kNumClasses>& class_names() {
  static const std::array<std::string_view, kNumClasses> names = {
      "disk", "square", "triangle", "ring", "plus", "hbars", "vbars", "checker", "cross", "dots"};
  return names;
}

std::uint64_t mix_seed(std::uint64_t seed, std::string_view salt, std::uint64_t index) {
  std::uint64_t h = splitmix64(seed);
  for (char ch : salt) h = splitmix64(h ^ static_cast<unsigned char>(ch));
  return splitmix64(h ^ splitmix64(index));
}

imaging::ImageTensor render_raw(std::uint64_t seed, std::string_view split, int index, int label) {
  if (label < 0 || label >= kNumClasses) throw PreconditionError("label out of range for desk dataset");
  std::mt19937_64 rng(mix_seed(seed, split, static_cast<std::uint64_t>(index)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.03);

  const Rgb background = random_color(rng);
  Rgb foreground = random_color(rng);
  for (int tries = 0; tries < 64 && color_distance(background, foreground) < 0.4; ++tries) {
    foreground = random_color(rng);
  }
  const Rgb clutter = random_color(rng);
  const double cx = kRawSide / 2.0 + (unit(rng) - 0.5) * 8.0;
  const double cy = kRawSide / 2.0 + (unit(rng) - 0.5) * 8.0;
  const double radius = 9.0 + unit(rng) * 5.0;
  const double angle = (unit(rng) - 0.5) * (40.0 * std::numbers::pi / 180.0);
  const double grad_amp = unit(rng) * 0.15;
  const double grad_dir = unit(rng) * 2.0 * std::numbers::pi;
  const double shade = (unit(rng) - 0.5) * 0.2;
  const bool has_clutter = unit(rng) < 0.5;
  const double line_off = (unit(rng) - 0.5) * kRawSide * 0.8;
  const double line_dir = unit(rng) * std::numbers::pi;
  const double ca = std::cos(angle), sa = std::sin(angle);

  Tensor3 img(Shape3{3, kRawSide, kRawSide});
  for (int y = 0; y < kRawSide; ++y) {
    for (int x = 0; x < kRawSide; ++x) {
      double cover = 0.0, line_cover = 0.0;
      for (int sy = 0; sy < kSupersample; ++sy) {
        for (int sx = 0; sx < kSupersample; ++sx) {
          const double px = x + (sx + 0.5) / kSupersample;
          const double py = y + (sy + 0.5) / kSupersample;
          const double dx = (px - cx) / radius, dy = (py - cy) / radius;
          const double u = ca * dx + sa * dy;
          const double v = -sa * dx + ca * dy;
          if (inside(label, u, v)) cover += 1.0;
          if (has_clutter) {
            const double dist = (px - kRawSide / 2.0) * std::cos(line_dir) +
                                (py - kRawSide / 2.0) * std::sin(line_dir) - line_off;
            if (std::abs(dist) < 0.7) line_cover += 1.0;
          }
        }
      }
      cover /= kSupersample * kSupersample;
      line_cover /= kSupersample * kSupersample;
      const double gx = (x - kRawSide / 2.0) / (kRawSide / 2.0);
      const double gy = (y - kRawSide / 2.0) / (kRawSide / 2.0);
      const double ramp = grad_amp * (gx * std::cos(grad_dir) + gy * std::sin(grad_dir));
      const double fshade = 1.0 + shade * gy;
      const double bg[3] = {background.r + ramp, background.g + ramp, background.b + ramp};
      const double fg[3] = {foreground.r * fshade, foreground.g * fshade, foreground.b * fshade};
      const double cl[3] = {clutter.r, clutter.g, clutter.b};
      for (int c = 0; c < 3; ++c) {
        double value = bg[c] * (1.0 - cover) + fg[c] * cover;
        value = value * (1.0 - line_cover) + cl[c] * line_cover;
        value += noise(rng);
        img.at(c, y, x) = std::round(std::clamp(value, 0.0, 1.0) * 255.0) / 255.0;
      }
    }
  }
  return imaging::ImageTensor::from_tensor(std::move(img));
}

namespace {

std::string sample_id(std::string_view split, int index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*s_%05d", static_cast<int>(split.size()), split.data(), index);
  return buf;
}

}  // namespace

std::vector<imaging::LabeledImage> generate_split(std::uint64_t seed, std::string_view split, int count,
                                                  int resize_to, int crop_to) {
  std::vector<imaging::LabeledImage> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const int label = i % kNumClasses;
    out.push_back({imaging::preprocess(render_raw(seed, split, i, label), resize_to, crop_to), label,
                   sample_id(split, i)});
  }
  return out;
}

void write_split(const std::filesystem::path& dir, std::uint64_t seed, std::string_view split, int count) {
  const auto split_dir = dir / std::string(split);
  std::filesystem::create_directories(split_dir);
  std::ofstream labels(split_dir / "labels.csv");
  if (!labels) throw IoError("cannot write " + (split_dir / "labels.csv").string());
  labels << "sample_id,label,file\n";
  for (int i = 0; i < count; ++i) {
    const int label = i % kNumClasses;
    const std::string id = sample_id(split, i);
    imaging::save_image(render_raw(seed, split, i, label), split_dir / (id + ".png"));
    labels << id << ',' << label << ',' << id << ".png\n";
  }
}

std::vector<imaging::LabeledImage> load_split(const std::filesystem::path& dir, std::string_view split,
                                              int resize_to, int crop_to) {
  const auto split_dir = dir / std::string(split);
  std::ifstream labels(split_dir / "labels.csv");
  if (!labels) throw IoError("dataset split not found: " + (split_dir / "labels.csv").string());
  std::string line;
  std::getline(labels, line);
  std::vector<imaging::LabeledImage> out;
  while (std::getline(labels, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string id, label_text, file;
    if (!std::getline(ss, id, ',') || !std::getline(ss, label_text, ',') || !std::getline(ss, file)) {
      throw IoError("malformed labels.csv line: " + line);
    }
    out.push_back({imaging::load_and_preprocess(split_dir / file, resize_to, crop_to), std::stoi(label_text), id});
  }
  return out;
}

}  // namespace demiguise::dataset
