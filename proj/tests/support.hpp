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

// Shared fixtures: seeded random tensors, a linear classifier core that counts
// its calls, and a tiny random feature network.

#include <atomic>
#include <random>

#include "demiguise/classifiers.hpp"
#include "demiguise/nn.hpp"
#include "demiguise/perceptual.hpp"
#include "demiguise/training.hpp"

namespace testing {

using namespace demiguise;

inline Tensor3 random_tensor(Shape3 s, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor3 t(s);
  for (double& v : t.storage()) v = u(rng);
  return t;
}

inline imaging::ImageTensor random_image(Shape3 s, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  return imaging::ImageTensor::from_tensor(random_tensor(s, rng, lo, hi));
}

// z = W x + b on the flattened (already normalised) input.
class LinearBackend final : public classifiers::Backend {
 public:
  LinearBackend(Shape3 input, int classes, std::uint64_t seed) : input_(input), classes_(classes) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    w_.resize(static_cast<std::size_t>(classes) * input.size());
    for (double& v : w_) v = n(rng) / std::sqrt(static_cast<double>(input.size()));
    b_.resize(classes);
    for (double& v : b_) v = 0.1 * n(rng);
  }

  int num_classes() const override { return classes_; }
  Shape3 input_shape() const override { return input_; }

  classifiers::Logits logits(const Tensor3& x) const override {
    ++logits_calls;
    return eval(x);
  }

  std::pair<classifiers::Logits, Tensor3> logits_and_gradient(
      const Tensor3& x, const std::function<std::vector<double>(const classifiers::Logits&)>& upstream_of)
      const override {
    ++gradient_calls;
    classifiers::Logits z = eval(x);
    const std::vector<double> up = upstream_of(z);
    Tensor3 g(input_);
    for (int k = 0; k < classes_; ++k) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += up[k] * w_[k * input_.size() + i];
    }
    return {std::move(z), std::move(g)};
  }

  void set_bias(int k, double v) { b_[k] = v; }
  double weight(int k, std::size_t i) const { return w_[k * input_.size() + i]; }
  double bias(int k) const { return b_[k]; }

  mutable std::atomic<int> logits_calls{0};
  mutable std::atomic<int> gradient_calls{0};

 private:
  classifiers::Logits eval(const Tensor3& x) const {
    classifiers::Logits z(b_);
    for (int k = 0; k < classes_; ++k) {
      for (std::size_t i = 0; i < x.size(); ++i) z[k] += w_[k * input_.size() + i] * x[i];
    }
    return z;
  }

  Shape3 input_;
  int classes_;
  std::vector<double> w_, b_;
};

inline Shape3 small_shape() { return {3, 12, 12}; }

// conv-relu-avgpool-conv-relu with taps after both ReLUs.
inline perceptual::PerceptualNet tiny_perceptual(std::uint64_t seed, Shape3 input = small_shape()) {
  nn::Network net(input);
  net.emplace<nn::Conv2d>("c1", input.channels, 4, 3, 1, 1);
  net.emplace<nn::ReLU>();
  net.emplace<nn::AvgPool2>();
  net.emplace<nn::Conv2d>("c2", 4, 6, 3, 1, 1);
  net.emplace<nn::ReLU>();
  training::initialize(net, seed);
  // Small positive biases keep most units active so features are rarely zero.
  for (nn::Parameter* p : net.parameters()) {
    if (p->name.find("bias") != std::string::npos) {
      for (double& v : p->values) v = 0.05;
    }
  }
  return perceptual::PerceptualNet(net, {1, 4}, {0.5, 0.5, 0.5}, {0.25, 0.25, 0.25});
}

}  // namespace testing
