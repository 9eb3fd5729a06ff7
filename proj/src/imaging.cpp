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

#include "demiguise/imaging.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

#include "demiguise/errors.hpp"

namespace demiguise::imaging {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::array<double, kSsimWindow> gaussian_window() {
  std::array<double, kSsimWindow> g{};
  double sum = 0.0;
  const int half = kSsimWindow / 2;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - half;
    g[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += g[i];
  }
  for (double& v : g) v /= sum;
  return g;
}

// Valid-mode separable Gaussian filter of one h x w plane.
std::vector<double> filter_valid(const double* src, int h, int w) {
  static const auto g = gaussian_window();
  const int oh = h - kSsimWindow + 1;
  const int ow = w - kSsimWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) s += g[k] * src[y * w + x + k];
      tmp[y * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow, 0.0);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) s += g[k] * tmp[(y + k) * ow + x];
      out[y * ow + x] = s;
    }
  }
  return out;
}

// Adjoint of filter_valid: scatters an (h-10) x (w-10) map back onto h x w.
std::vector<double> filter_valid_adjoint(const std::vector<double>& grad, int h, int w) {
  static const auto g = gaussian_window();
  const int oh = h - kSsimWindow + 1;
  const int ow = w - kSsimWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow, 0.0);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      const double v = grad[y * ow + x];
      for (int k = 0; k < kSsimWindow; ++k) tmp[(y + k) * ow + x] += g[k] * v;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(h) * w, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      const double v = tmp[y * ow + x];
      for (int k = 0; k < kSsimWindow; ++k) out[y * w + x + k] += g[k] * v;
    }
  }
  return out;
}

struct SsimPlaneStats {
  std::vector<double> mu_a, mu_b, e_aa, e_bb, e_ab;
};

SsimPlaneStats plane_stats(const double* a, const double* b, int h, int w) {
  const std::size_t n = static_cast<std::size_t>(h) * w;
  std::vector<double> aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  return {filter_valid(a, h, w), filter_valid(b, h, w), filter_valid(aa.data(), h, w),
          filter_valid(bb.data(), h, w), filter_valid(ab.data(), h, w)};
}

void check_ssim_shapes(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a.shape(), b.shape(), "ssim");
  if (a.height() < kSsimWindow || a.width() < kSsimWindow) {
    throw ShapeError("ssim needs images of at least 11x11, got " + a.shape().str());
  }
}

}  // namespace

// ------------------------------------------------------------ ImageTensor

ImageTensor ImageTensor::from_tensor(Tensor3 values) {
  for (double v : values.values()) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw PreconditionError("image values must be finite and within [0, 1]");
    }
  }
  return ImageTensor(std::move(values));
}

ImageTensor ImageTensor::clamped(Tensor3 values) {
  for (double& v : values.storage()) {
    if (!std::isfinite(v)) throw PreconditionError("image values must be finite");
    v = std::clamp(v, 0.0, 1.0);
  }
  return ImageTensor(std::move(values));
}

ImageTensor ImageTensor::constant(Shape3 shape, double value) {
  return from_tensor(Tensor3(shape, value));
}

// ------------------------------------------------------------ PNG I/O

ImageTensor load_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open image " + path.string());
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError("not a PNG file: " + path.string());
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng initialisation failed");
  }
  std::vector<std::uint8_t> pixels;
  png_uint_32 width = 0, height = 0;
  int bit_depth = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("corrupt PNG: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  int color_type = 0;
  png_get_IHDR(png, info, &width, &height, &bit_depth, &color_type, nullptr, nullptr, nullptr);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  if (bit_depth == 16) png_set_swap(png);
  png_read_update_info(png, info);
  bit_depth = png_get_bit_depth(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  pixels.resize(row_bytes * height);
  std::vector<png_bytep> rows(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + y * row_bytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Tensor3 t(Shape3{3, static_cast<int>(height), static_cast<int>(width)});
  for (png_uint_32 y = 0; y < height; ++y) {
    for (png_uint_32 x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) {
        double v;
        if (bit_depth == 16) {
          std::uint16_t s;
          std::memcpy(&s, rows[y] + (x * 3 + c) * 2, 2);
          v = s / 65535.0;
        } else {
          v = rows[y][x * 3 + c] / 255.0;
        }
        t.at(c, static_cast<int>(y), static_cast<int>(x)) = v;
      }
    }
  }
  return ImageTensor::from_tensor(std::move(t));
}

void save_image(const ImageTensor& img, const std::filesystem::path& path) {
  if (img.channels() != 1 && img.channels() != 3) {
    throw ShapeError("save_image supports 1 or 3 channels, got " + img.shape().str());
  }
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot write image " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialisation failed");
  }
  const int channels = img.channels();
  const int width = img.width();
  const int height = img.height();
  std::vector<std::uint8_t> buffer(static_cast<std::size_t>(width) * height * channels * 2);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        const auto s = static_cast<std::uint16_t>(std::lround(img.at(c, y, x) * 65535.0));
        std::uint8_t* dst = buffer.data() + ((static_cast<std::size_t>(y) * width + x) * channels + c) * 2;
        dst[0] = static_cast<std::uint8_t>(s >> 8);
        dst[1] = static_cast<std::uint8_t>(s & 0xff);
      }
    }
  }
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = buffer.data() + static_cast<std::size_t>(y) * width * channels * 2;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, 16, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(file.get()) != 0) throw IoError("failed flushing " + path.string());
}

// ------------------------------------------------------------ preprocessing

Tensor3 resize_bilinear(const Tensor3& src, int out_height, int out_width) {
  if (out_height <= 0 || out_width <= 0) throw ShapeError("resize target must be positive");
  Tensor3 out(Shape3{src.channels(), out_height, out_width});
  const double sy = static_cast<double>(src.height()) / out_height;
  const double sx = static_cast<double>(src.width()) / out_width;
  for (int y = 0; y < out_height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height() - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width() - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const double wx = fx - x0;
      for (int c = 0; c < src.channels(); ++c) {
        const double top = src.at(c, y0, x0) * (1.0 - wx) + src.at(c, y0, x1) * wx;
        const double bottom = src.at(c, y1, x0) * (1.0 - wx) + src.at(c, y1, x1) * wx;
        out.at(c, y, x) = top * (1.0 - wy) + bottom * wy;
      }
    }
  }
  return out;
}

ImageTensor preprocess(const ImageTensor& raw, int resize_to, int crop_to) {
  if (crop_to <= 0 || resize_to < crop_to) {
    throw PreconditionError("need resize_to >= crop_to > 0, got resize " + std::to_string(resize_to) + " crop " +
                            std::to_string(crop_to));
  }
  if (raw.height() < crop_to || raw.width() < crop_to) {
    throw PreconditionError("image " + raw.shape().str() + " is smaller than the " + std::to_string(crop_to) +
                            " crop");
  }
  const int shorter = std::min(raw.height(), raw.width());
  int new_h = resize_to;
  int new_w = resize_to;
  if (raw.height() > raw.width()) {
    new_h = static_cast<int>(std::lround(static_cast<double>(raw.height()) * resize_to / shorter));
  } else if (raw.width() > raw.height()) {
    new_w = static_cast<int>(std::lround(static_cast<double>(raw.width()) * resize_to / shorter));
  }
  const Tensor3 resized = (new_h == raw.height() && new_w == raw.width())
                              ? raw.tensor()
                              : resize_bilinear(raw.tensor(), new_h, new_w);
  const int top = (new_h - crop_to) / 2;
  const int left = (new_w - crop_to) / 2;
  Tensor3 out(Shape3{raw.channels(), crop_to, crop_to});
  for (int c = 0; c < raw.channels(); ++c) {
    for (int y = 0; y < crop_to; ++y) {
      for (int x = 0; x < crop_to; ++x) out.at(c, y, x) = resized.at(c, top + y, left + x);
    }
  }
  return ImageTensor::clamped(std::move(out));
}

ImageTensor load_and_preprocess(const std::filesystem::path& path, int resize_to, int crop_to) {
  return preprocess(load_png(path), resize_to, crop_to);
}

// ------------------------------------------------------------ metrics

double mse(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a.shape(), b.shape(), "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

double psnr(const ImageTensor& a, const ImageTensor& b) {
  const double m = mse(a, b);
  if (m == 0.0) return kIdenticalPsnr;
  return 10.0 * std::log10(1.0 / m);
}

double ssim(const ImageTensor& a, const ImageTensor& b) {
  check_ssim_shapes(a, b);
  const int h = a.height();
  const int w = a.width();
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  double total = 0.0;
  for (int c = 0; c < a.channels(); ++c) {
    const auto s = plane_stats(a.tensor().data() + c * plane, b.tensor().data() + c * plane, h, w);
    double channel_sum = 0.0;
    for (std::size_t p = 0; p < s.mu_a.size(); ++p) {
      const double ma = s.mu_a[p], mb = s.mu_b[p];
      const double va = s.e_aa[p] - ma * ma;
      const double vb = s.e_bb[p] - mb * mb;
      const double cov = s.e_ab[p] - ma * mb;
      channel_sum += ((2 * ma * mb + kSsimC1) * (2 * cov + kSsimC2)) /
                     ((ma * ma + mb * mb + kSsimC1) * (va + vb + kSsimC2));
    }
    total += channel_sum / static_cast<double>(s.mu_a.size());
  }
  return total / a.channels();
}

Tensor3 ssim_gradient(const ImageTensor& a, const ImageTensor& b) {
  check_ssim_shapes(a, b);
  const int h = a.height();
  const int w = a.width();
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor3 grad(b.shape());
  for (int c = 0; c < a.channels(); ++c) {
    const double* pa = a.tensor().data() + c * plane;
    const double* pb = b.tensor().data() + c * plane;
    const auto s = plane_stats(pa, pb, h, w);
    const std::size_t m = s.mu_a.size();
    const double scale = 1.0 / (static_cast<double>(m) * a.channels());
    std::vector<double> d_mu(m), d_ebb(m), d_eab(m);
    for (std::size_t p = 0; p < m; ++p) {
      const double ma = s.mu_a[p], mb = s.mu_b[p];
      const double va = s.e_aa[p] - ma * ma;
      const double vb = s.e_bb[p] - mb * mb;
      const double cov = s.e_ab[p] - ma * mb;
      const double a1 = 2 * ma * mb + kSsimC1;
      const double a2 = 2 * cov + kSsimC2;
      const double b1 = ma * ma + mb * mb + kSsimC1;
      const double b2 = va + vb + kSsimC2;
      const double value = (a1 * a2) / (b1 * b2);
      d_mu[p] = scale * value * (2 * ma / a1 - 2 * ma / a2 - 2 * mb / b1 + 2 * mb / b2);
      d_ebb[p] = -scale * value / b2;
      d_eab[p] = scale * 2 * value / a2;
    }
    const auto g_mu = filter_valid_adjoint(d_mu, h, w);
    const auto g_bb = filter_valid_adjoint(d_ebb, h, w);
    const auto g_ab = filter_valid_adjoint(d_eab, h, w);
    double* out = grad.data() + c * plane;
    for (std::size_t q = 0; q < plane; ++q) out[q] = g_mu[q] + 2 * pb[q] * g_bb[q] + pa[q] * g_ab[q];
  }
  return grad;
}

ImageTensor minmax_rescale(const Tensor3& values) {
  double lo = values[0], hi = values[0];
  for (double v : values.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  Tensor3 out(values.shape(), 0.5);
  if (hi > lo) {
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - lo) / (hi - lo);
  }
  return ImageTensor::clamped(std::move(out));
}

}  // namespace demiguise::imaging
