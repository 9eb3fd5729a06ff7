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

#include <filesystem>
#include <string>

#include "demiguise/tensor.hpp"

namespace demiguise::imaging {

// Pixel-space image: every value finite and in [0, 1].
class ImageTensor {
 public:
  ImageTensor() = default;

  // Validates the range invariant; throws PreconditionError on violation.
  static ImageTensor from_tensor(Tensor3 values);
  // Clamps into [0, 1]; non-finite values are rejected.
  static ImageTensor clamped(Tensor3 values);
  static ImageTensor constant(Shape3 shape, double value);

  const Tensor3& tensor() const { return values_; }
  const Shape3& shape() const { return values_.shape(); }
  int channels() const { return values_.channels(); }
  int height() const { return values_.height(); }
  int width() const { return values_.width(); }
  std::size_t size() const { return values_.size(); }
  double at(int c, int h, int w) const { return values_.at(c, h, w); }
  double operator[](std::size_t i) const { return values_[i]; }

  bool operator==(const ImageTensor&) const = default;

 private:
  explicit ImageTensor(Tensor3 values) : values_(std::move(values)) {}
  Tensor3 values_;
};

struct LabeledImage {
  ImageTensor image;
  int label = 0;
  std::string sample_id;
};

// Returned by psnr() for identical inputs.
inline constexpr double kIdenticalPsnr = 300.0;

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

// Decodes an 8- or 16-bit PNG (gray, RGB, palette; alpha is dropped) into a
// 3-channel tensor without resampling.
ImageTensor load_png(const std::filesystem::path& path);

// 16 bits per channel; 1- and 3-channel images are supported.
void save_image(const ImageTensor& img, const std::filesystem::path& path);

// Bilinear resampling with half-pixel centres (corner alignment off).
Tensor3 resize_bilinear(const Tensor3& src, int out_height, int out_width);

// Scales the shorter side to `resize_to`, then takes the centred
// crop_to x crop_to window. The source must be at least crop_to on both
// sides and resize_to >= crop_to.
ImageTensor preprocess(const ImageTensor& raw, int resize_to, int crop_to);
ImageTensor load_and_preprocess(const std::filesystem::path& path, int resize_to, int crop_to);

double mse(const ImageTensor& a, const ImageTensor& b);
double psnr(const ImageTensor& a, const ImageTensor& b);

// Mean SSIM over all valid 11x11 Gaussian windows, averaged over channels.
double ssim(const ImageTensor& a, const ImageTensor& b);

// d ssim(a, b) / d b.
Tensor3 ssim_gradient(const ImageTensor& a, const ImageTensor& b);

// Affine min-max rescale of an arbitrary tensor into [0, 1]; a constant
// tensor maps to all 0.5.
ImageTensor minmax_rescale(const Tensor3& values);

}  // namespace demiguise::imaging
