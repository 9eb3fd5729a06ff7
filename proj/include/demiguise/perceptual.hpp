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

// Deep-feature perceptual distance: unit-normalise the channel vector at every
// spatial location of every tapped layer, weight the residual channel-wise,
// square, average over space and sum over layers.

#include <cstddef>
#include <filesystem>
#include <memory>
#include <vector>

#include "demiguise/imaging.hpp"
#include "demiguise/nn.hpp"

namespace demiguise::perceptual {

using imaging::ImageTensor;

inline constexpr double kNormEpsilon = 1e-10;

// Feature extractor with L >= 1 tap points. Input normalisation is folded in,
// so callers pass pixel-space images. Immutable once constructed.
class PerceptualNet {
 public:
  // `taps` index layers of `features` and must be strictly increasing.
  PerceptualNet(const nn::Network& features, std::vector<std::size_t> taps, std::vector<double> mean,
                std::vector<double> stddev);

  // Builds the percept_vgg architecture and loads its weights.
  static PerceptualNet load(const std::filesystem::path& archive_manifest, std::vector<double> mean,
                            std::vector<double> stddev);

  const Shape3& input_shape() const { return net_->input_shape(); }
  std::size_t num_layers() const { return taps_.size(); }
  Shape3 layer_shape(std::size_t l) const { return net_->layer_output_shape(taps_.at(l)); }
  const nn::Network& network() const { return *net_; }
  const std::vector<std::size_t>& taps() const { return taps_; }

 private:
  std::shared_ptr<const nn::Network> net_;
  std::vector<std::size_t> taps_;
};

// Per-layer activation grids, stored C_l x H_l x W_l.
struct FeatureStack {
  std::vector<Tensor3> layers;
};

// Non-negative per-channel weights, one vector per tapped layer.
class ChannelWeights {
 public:
  static ChannelWeights ones(const PerceptualNet& net);
  static ChannelWeights uniform(const PerceptualNet& net, double value);
  // Plain text, one line per layer with C_l whitespace-separated values.
  static ChannelWeights load(const std::filesystem::path& path, const PerceptualNet& net);
  static ChannelWeights from_vectors(std::vector<std::vector<double>> per_layer);

  const std::vector<double>& layer(std::size_t l) const { return per_layer_.at(l); }
  std::size_t num_layers() const { return per_layer_.size(); }
  ChannelWeights scaled(double factor) const;
  void check_compatible(const PerceptualNet& net) const;

 private:
  explicit ChannelWeights(std::vector<std::vector<double>> per_layer);
  std::vector<std::vector<double>> per_layer_;
};

FeatureStack extract_features(const PerceptualNet& net, const ImageTensor& x);

// Each spatial channel vector is divided by its norm; vectors with norm at or
// below kNormEpsilon become zero.
FeatureStack unit_normalize(const FeatureStack& stack);

double perceptual_distance(const PerceptualNet& net, const ChannelWeights& w, const ImageTensor& x,
                           const ImageTensor& x2);

// dD(x_ref, x_var) / d x_var.
Tensor3 perceptual_gradient(const PerceptualNet& net, const ChannelWeights& w, const ImageTensor& x_ref,
                            const ImageTensor& x_var);

struct DistanceWithGradient {
  double value = 0.0;
  Tensor3 gradient;
};

// Distance to a fixed reference image, with the reference features computed
// once. Attacks evaluate thousands of candidates against the same clean image.
class ReferenceDistance {
 public:
  ReferenceDistance(const PerceptualNet& net, const ChannelWeights& w, const ImageTensor& reference);

  double value(const ImageTensor& x) const;
  DistanceWithGradient value_and_gradient(const ImageTensor& x) const;

 private:
  const PerceptualNet* net_;
  const ChannelWeights* weights_;
  FeatureStack reference_;
};

}  // namespace demiguise::perceptual
