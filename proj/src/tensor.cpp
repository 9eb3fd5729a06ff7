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

#include "demiguise/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "demiguise/errors.hpp"

namespace demiguise {

std::string Shape3::str() const {
  return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
}

Tensor3::Tensor3(Shape3 shape, double fill) : shape_(shape), data_(shape.size(), fill) {
  if (shape.channels <= 0 || shape.height <= 0 || shape.width <= 0) {
    throw ShapeError("tensor dimensions must be positive, got " + shape.str());
  }
}

Tensor3::Tensor3(Shape3 shape, std::vector<double> values) : shape_(shape), data_(std::move(values)) {
  if (shape.channels <= 0 || shape.height <= 0 || shape.width <= 0) {
    throw ShapeError("tensor dimensions must be positive, got " + shape.str());
  }
  if (data_.size() != shape.size()) {
    throw ShapeError("tensor of shape " + shape.str() + " needs " + std::to_string(shape.size()) +
                     " values, got " + std::to_string(data_.size()));
  }
}

void Tensor3::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor3::add_scaled(const Tensor3& other, double scale) {
  require_same_shape(shape_, other.shape_, "add_scaled");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += scale * other.data_[i];
}

void Tensor3::scale(double s) {
  for (double& v : data_) v *= s;
}

double Tensor3::sum() const {
  double s = 0.0;
  for (double v : data_) s += v;
  return s;
}

double Tensor3::l1_norm() const {
  double s = 0.0;
  for (double v : data_) s += std::abs(v);
  return s;
}

double Tensor3::l2_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

double Tensor3::linf_norm() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

Tensor3 operator-(const Tensor3& a, const Tensor3& b) {
  require_same_shape(a.shape(), b.shape(), "subtract");
  Tensor3 out = a;
  out.add_scaled(b, -1.0);
  return out;
}

Tensor3 operator+(const Tensor3& a, const Tensor3& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor3 out = a;
  out.add_scaled(b, 1.0);
  return out;
}

void require_same_shape(const Shape3& a, const Shape3& b, const char* what) {
  if (!(a == b)) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.str() + " vs " + b.str());
  }
}

}  // namespace demiguise
