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


// Scalar metric references, written directly from the textbook formulas and
// shared by the unit and acceptance suites.
#pragma once

#include <cmath>

#include "demiguise/imaging.hpp"

namespace testing {

using demiguise::imaging::ImageTensor;

inline double psnr_reference(const ImageTensor& a, const ImageTensor& b) {
  double s = 0.0;
  for (int c = 0; c < a.channels(); ++c) {
    for (int h = 0; h < a.height(); ++h) {
      for (int w = 0; w < a.width(); ++w) {
        const double d = a.at(c, h, w) - b.at(c, h, w);
        s += d * d;
      }
    }
  }
  const double mse = s / static_cast<double>(a.size());
  return 10.0 * std::log10(1.0 / mse);
}


// Per-pixel SSIM: full 2-D Gaussian window evaluated at each valid position.
inline double ssim_reference(const ImageTensor& a, const ImageTensor& b) {
  const int k = 11;
  const double sigma = 1.5;
  double win[11][11];
  double norm = 0.0;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      win[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * sigma * sigma));
      norm += win[i][j];
    }
  }
  const double c1 = 0.0001, c2 = 0.0009;
  double total = 0.0;
  for (int c = 0; c < a.channels(); ++c) {
    double sum = 0.0;
    int count = 0;
    for (int y = 0; y + k <= a.height(); ++y) {
      for (int x = 0; x + k <= a.width(); ++x) {
        double ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
        for (int i = 0; i < k; ++i) {
          for (int j = 0; j < k; ++j) {
            const double w = win[i][j] / norm;
            const double va = a.at(c, y + i, x + j), vb = b.at(c, y + i, x + j);
            ma += w * va;
            mb += w * vb;
            aa += w * va * va;
            bb += w * vb * vb;
            ab += w * va * vb;
          }
        }
        const double sa = aa - ma * ma, sb = bb - mb * mb, sab = ab - ma * mb;
        sum += (2 * ma * mb + c1) * (2 * sab + c2) / ((ma * ma + mb * mb + c1) * (sa + sb + c2));
        ++count;
      }
    }
    total += sum / count;
  }
  return total / a.channels();
}

}  // namespace testing
