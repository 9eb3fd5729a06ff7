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

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "demiguise/errors.hpp"
#include "demiguise/perceptual.hpp"
#include "support.hpp"

using namespace demiguise;
using imaging::ImageTensor;
using perceptual::ChannelWeights;

namespace {

// Relative error of two vectors, measured in the 2-norm.
double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    ref += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(ref), 1e-300);
}

// Two-channel 1x1 identity features, so images are their own feature vectors.
perceptual::PerceptualNet identity_net() {
  nn::Network net(Shape3{2, 1, 1});
  net.emplace<nn::ReLU>();
  return perceptual::PerceptualNet(net, {0}, {0.0, 0.0}, {1.0, 1.0});
}

}  // namespace

TEST_CASE("orthogonal unit features are at distance 2") {
  const auto net = identity_net();
  const auto w = ChannelWeights::ones(net);
  const auto e1 = ImageTensor::from_tensor(Tensor3(Shape3{2, 1, 1}, std::vector<double>{1.0, 0.0}));
  const auto e2 = ImageTensor::from_tensor(Tensor3(Shape3{2, 1, 1}, std::vector<double>{0.0, 1.0}));
  CHECK(perceptual::perceptual_distance(net, w, e1, e2) == doctest::Approx(2.0).epsilon(1e-12));
  // Normalisation makes the scale of a feature vector irrelevant.
  const auto half = ImageTensor::from_tensor(Tensor3(Shape3{2, 1, 1}, std::vector<double>{0.5, 0.0}));
  CHECK(perceptual::perceptual_distance(net, w, e1, half) == 0.0);
  // A zero feature vector normalises to zero and sits at distance 1 from a unit one.
  const auto zero = ImageTensor::constant(Shape3{2, 1, 1}, 0.0);
  CHECK(perceptual::perceptual_distance(net, w, e1, zero) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("unit normalisation") {
  std::mt19937_64 rng(20);
  perceptual::FeatureStack s;
  s.layers.push_back(testing::random_tensor({5, 3, 4}, rng, -2, 2));
  s.layers.back().at(0, 0, 0) = 0;
  for (int c = 0; c < 5; ++c) s.layers.back().at(c, 1, 1) = 1e-12;
  const auto n = perceptual::unit_normalize(s);
  for (int h = 0; h < 3; ++h) {
    for (int w = 0; w < 4; ++w) {
      double norm = 0.0;
      for (int c = 0; c < 5; ++c) norm += n.layers[0].at(c, h, w) * n.layers[0].at(c, h, w);
      if (h == 1 && w == 1) {
        CHECK(norm == 0.0);
      } else {
        CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("distance identities on a random network") {
  const auto net = testing::tiny_perceptual(21);
  const auto w = ChannelWeights::ones(net);
  std::mt19937_64 rng(22);
  for (int t = 0; t < 5; ++t) {
    const ImageTensor a = testing::random_image(net.input_shape(), rng);
    const ImageTensor b = testing::random_image(net.input_shape(), rng);
    CHECK(perceptual::perceptual_distance(net, w, a, a) == 0.0);
    const double ab = perceptual::perceptual_distance(net, w, a, b);
    CHECK(ab > 0.0);
    CHECK(std::abs(ab - perceptual::perceptual_distance(net, w, b, a)) < 1e-9);
    // Uniform weights c scale the distance by c^2.
    CHECK(perceptual::perceptual_distance(net, ChannelWeights::uniform(net, 3.0), a, b) ==
          doctest::Approx(9.0 * ab).epsilon(1e-12));
    // Each layer contributes at most 4 * max weight^2.
    CHECK(ab <= 4.0 * net.num_layers());
    const perceptual::ReferenceDistance ref(net, w, a);
    CHECK(ref.value(b) == ab);
    CHECK(ref.value_and_gradient(b).value == ab);
  }
}

TEST_CASE("distance gradient matches central differences") {
  const auto net = testing::tiny_perceptual(23);
  std::mt19937_64 rng(24);
  const auto w = ChannelWeights::from_vectors({{0.5, 1.0, 1.5, 2.0}, {1, 1, 0.2, 0.4, 0.8, 1.6}});
  for (int pair = 0; pair < 3; ++pair) {
    const ImageTensor a = testing::random_image(net.input_shape(), rng);
    const ImageTensor b = testing::random_image(net.input_shape(), rng, 0.05, 0.95);
    const Tensor3 g = perceptual::perceptual_gradient(net, w, a, b);
    std::uniform_int_distribution<std::size_t> pick(0, b.size() - 1);
    std::vector<double> analytic, numeric;
    for (int k = 0; k < 10; ++k) {
      const std::size_t i = pick(rng);
      const double h = 1e-6;
      Tensor3 p = b.tensor(), m = b.tensor();
      p[i] += h;
      m[i] -= h;
      numeric.push_back((perceptual::perceptual_distance(net, w, a, ImageTensor::from_tensor(p)) -
                         perceptual::perceptual_distance(net, w, a, ImageTensor::from_tensor(m))) /
                        (2 * h));
      analytic.push_back(g[i]);
    }
    CHECK(relative_error(analytic, numeric) < 1e-3);
  }
}

TEST_CASE("channel weights validation and loading") {
  const auto net = testing::tiny_perceptual(25);
  CHECK_THROWS_AS(ChannelWeights::from_vectors({{1, 1, 1, 1}}).check_compatible(net), ShapeError);
  CHECK_THROWS_AS(ChannelWeights::from_vectors({{1, -1, 1, 1}, {1, 1, 1, 1, 1, 1}}), PreconditionError);
  const auto path = std::filesystem::temp_directory_path() / "demiguise_weights.txt";
  std::ofstream(path) << "1 2 3 4\n0.5 0.5 0.5 0.5 0.5 0.5\n";
  const auto w = ChannelWeights::load(path, net);
  CHECK(w.layer(0)[3] == 4.0);
  CHECK(w.layer(1)[0] == 0.5);
  std::ofstream(path) << "1 2 3\n0.5 0.5 0.5 0.5 0.5 0.5\n";
  CHECK_THROWS(ChannelWeights::load(path, net));
  std::filesystem::remove(path);
}

TEST_CASE("feature shapes follow the taps") {
  const auto net = testing::tiny_perceptual(26);
  CHECK(net.num_layers() == 2);
  CHECK(net.layer_shape(0) == Shape3{4, 12, 12});
  CHECK(net.layer_shape(1) == Shape3{6, 6, 6});
  std::mt19937_64 rng(27);
  const auto f = perceptual::extract_features(net, testing::random_image(net.input_shape(), rng));
  REQUIRE(f.layers.size() == 2);
  CHECK(f.layers[1].shape() == Shape3{6, 6, 6});
  CHECK_THROWS_AS(perceptual::extract_features(net, ImageTensor::constant({3, 8, 8}, 0.5)), ShapeError);
}
