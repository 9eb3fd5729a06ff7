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
#include <span>
#include <string>
#include <vector>

namespace demiguise {

struct Shape3 {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
  bool operator==(const Shape3&) const = default;
  std::string str() const;
};

// Dense C x H x W tensor of doubles, row-major with channel outermost.
// Used for activations, gradients and (wrapped by ImageTensor) images.
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(Shape3 shape, double fill = 0.0);
  Tensor3(Shape3 shape, std::vector<double> values);

  const Shape3& shape() const { return shape_; }
  int channels() const { return shape_.channels; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int c, int h, int w) {
    return data_[(static_cast<std::size_t>(c) * shape_.height + h) * shape_.width + w];
  }
  double at(int c, int h, int w) const {
    return data_[(static_cast<std::size_t>(c) * shape_.height + h) * shape_.width + w];
  }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  void fill(double v);
  // this += scale * other
  void add_scaled(const Tensor3& other, double scale = 1.0);
  void scale(double s);

  double sum() const;
  double l1_norm() const;
  double l2_norm() const;
  double linf_norm() const;

  bool operator==(const Tensor3& other) const = default;

 private:
  Shape3 shape_;
  std::vector<double> data_;
};

Tensor3 operator-(const Tensor3& a, const Tensor3& b);
Tensor3 operator+(const Tensor3& a, const Tensor3& b);

// Throws ShapeError naming `what` when the two shapes differ.
void require_same_shape(const Shape3& a, const Shape3& b, const char* what);

}  // namespace demiguise
