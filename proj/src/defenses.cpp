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

#include "demiguise/defenses.hpp"

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <jpeglib.h>

#include "demiguise/errors.hpp"

namespace demiguise::defenses {
namespace {

struct JpegError {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void on_jpeg_error(j_common_ptr info) {
  auto* err = reinterpret_cast<JpegError*>(info->err);
  (*info->err->format_message)(info, err->message);
  std::longjmp(err->jump, 1);
}

std::vector<unsigned char> to_bytes(const ImageTensor& x) {
  const int c = x.channels(), h = x.height(), w = x.width();
  std::vector<unsigned char> out(static_cast<std::size_t>(c) * h * w);
  for (int y = 0; y < h; ++y) {
    for (int i = 0; i < w; ++i) {
      for (int k = 0; k < c; ++k) {
        out[(static_cast<std::size_t>(y) * w + i) * c + k] =
            static_cast<unsigned char>(std::lround(x.at(k, y, i) * 255.0));
      }
    }
  }
  return out;
}

std::vector<unsigned char> encode(const std::vector<unsigned char>& pixels, const Shape3& s, int quality) {
  jpeg_compress_struct info{};
  JpegError err{};
  info.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = on_jpeg_error;
  unsigned char* buffer = nullptr;
  unsigned long size = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&info);
    std::free(buffer);
    throw IoError(std::string("jpeg encode failed: ") + err.message);
  }
  jpeg_create_compress(&info);
  jpeg_mem_dest(&info, &buffer, &size);
  info.image_width = static_cast<JDIMENSION>(s.width);
  info.image_height = static_cast<JDIMENSION>(s.height);
  info.input_components = s.channels;
  info.in_color_space = s.channels == 3 ? JCS_RGB : JCS_GRAYSCALE;
  jpeg_set_defaults(&info);
  jpeg_set_quality(&info, quality, TRUE);
  // Full-resolution chroma.
  for (int i = 0; i < info.num_components; ++i) {
    info.comp_info[i].h_samp_factor = 1;
    info.comp_info[i].v_samp_factor = 1;
  }
  jpeg_start_compress(&info, TRUE);
  const int stride = s.width * s.channels;
  while (info.next_scanline < info.image_height) {
    JSAMPROW row = const_cast<unsigned char*>(pixels.data()) + static_cast<std::size_t>(info.next_scanline) * stride;
    jpeg_write_scanlines(&info, &row, 1);
  }
  jpeg_finish_compress(&info);
  jpeg_destroy_compress(&info);
  std::vector<unsigned char> out(buffer, buffer + size);
  std::free(buffer);
  return out;
}

std::vector<unsigned char> decode(const std::vector<unsigned char>& bytes, const Shape3& s) {
  jpeg_decompress_struct info{};
  JpegError err{};
  info.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = on_jpeg_error;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&info);
    throw IoError(std::string("jpeg decode failed: ") + err.message);
  }
  jpeg_create_decompress(&info);
  jpeg_mem_src(&info, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&info, TRUE);
  info.out_color_space = s.channels == 3 ? JCS_RGB : JCS_GRAYSCALE;
  jpeg_start_decompress(&info);
  const int stride = s.width * s.channels;
  std::vector<unsigned char> out(static_cast<std::size_t>(stride) * s.height);
  while (info.output_scanline < info.output_height) {
    JSAMPROW row = out.data() + static_cast<std::size_t>(info.output_scanline) * stride;
    jpeg_read_scanlines(&info, &row, 1);
  }
  jpeg_finish_decompress(&info);
  jpeg_destroy_decompress(&info);
  return out;
}

ImageTensor jpeg_round_trip(const ImageTensor& x, int quality) {
  const Shape3 s = x.shape();
  if (s.channels != 1 && s.channels != 3) throw ShapeError("jpeg defense needs 1 or 3 channels, got " + s.str());
  const std::vector<unsigned char> pixels = decode(encode(to_bytes(x), s, quality), s);
  Tensor3 out(s);
  for (int y = 0; y < s.height; ++y) {
    for (int i = 0; i < s.width; ++i) {
      for (int k = 0; k < s.channels; ++k) {
        out.at(k, y, i) = pixels[(static_cast<std::size_t>(y) * s.width + i) * s.channels + k] / 255.0;
      }
    }
  }
  return ImageTensor::from_tensor(std::move(out));
}

}  // namespace

const char* defense_kind_name(DefenseKind kind) {
  switch (kind) {
    case DefenseKind::none:
      return "none";
    case DefenseKind::jpeg:
      return "jpeg";
    case DefenseKind::bit_depth:
      return "bit_depth";
  }
  return "unknown";
}

void DefenseSpec::validate() const {
  switch (kind) {
    case DefenseKind::none:
      if (quality != 0 || bits != 0) throw ConfigError("defense 'none' takes no parameter");
      return;
    case DefenseKind::jpeg:
      if (bits != 0) throw ConfigError("jpeg defense takes a quality, not bits");
      if (quality < 1 || quality > 100) throw ConfigError("jpeg quality must be in [1, 100]");
      return;
    case DefenseKind::bit_depth:
      if (quality != 0) throw ConfigError("bit_depth defense takes bits, not a quality");
      if (bits < 1 || bits > 8) throw ConfigError("bit depth must be in [1, 8]");
      return;
  }
  throw ConfigError("unknown defense kind");
}

std::string DefenseSpec::label() const {
  switch (kind) {
    case DefenseKind::none:
      return "none";
    case DefenseKind::jpeg:
      return "jpeg:" + std::to_string(quality);
    case DefenseKind::bit_depth:
      return "bit_depth:" + std::to_string(bits);
  }
  return "unknown";
}

DefenseSpec DefenseSpec::parse(const std::string& text) {
  DefenseSpec spec;
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  int value = 0;
  if (colon != std::string::npos) {
    try {
      std::size_t used = 0;
      value = std::stoi(text.substr(colon + 1), &used);
      if (used != text.size() - colon - 1) throw std::invalid_argument(text);
    } catch (const std::logic_error&) {
      throw ConfigError("bad defense parameter in '" + text + "'");
    }
  }
  if (kind == "none" && colon == std::string::npos) {
    spec = none();
  } else if (kind == "jpeg" && colon != std::string::npos) {
    spec = jpeg(value);
  } else if (kind == "bit_depth" && colon != std::string::npos) {
    spec = bit_depth(value);
  } else {
    throw ConfigError("unknown defense '" + text + "' (expected none, jpeg:Q or bit_depth:B)");
  }
  spec.validate();
  return spec;
}

ImageTensor apply_defense(const DefenseSpec& spec, const ImageTensor& x) {
  spec.validate();
  switch (spec.kind) {
    case DefenseKind::none:
      return x;
    case DefenseKind::jpeg:
      return jpeg_round_trip(x, spec.quality);
    case DefenseKind::bit_depth: {
      const double levels = std::ldexp(1.0, spec.bits) - 1.0;
      Tensor3 out = x.tensor();
      for (double& v : out.storage()) v = std::round(v * levels) / levels;
      return ImageTensor::from_tensor(std::move(out));
    }
  }
  throw ConfigError("unknown defense kind");
}

std::vector<DefenseSpec> defense_sweep_specs() {
  std::vector<DefenseSpec> specs;
  for (int q = 100; q >= 10; q -= 15) specs.push_back(DefenseSpec::jpeg(q));
  for (int b = 7; b >= 1; --b) specs.push_back(DefenseSpec::bit_depth(b));
  return specs;
}

}  // namespace demiguise::defenses
