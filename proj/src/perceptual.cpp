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

#include "demiguise/perceptual.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "demiguise/architectures.hpp"
#include "demiguise/archive.hpp"
#include "demiguise/errors.hpp"

namespace demiguise::perceptual {
namespace {

// Location (h, w) of layer `t` as a strided channel vector.
double location_norm(const Tensor3& t, std::size_t loc, std::size_t plane) {
  double s = 0.0;
  for (int c = 0; c < t.channels(); ++c) {
    const double v = t[c * plane + loc];
    s += v * v;
  }
  return std::sqrt(s);
}

Tensor3 normalize_layer(const Tensor3& t) {
  Tensor3 out(t.shape());
  const std::size_t plane = static_cast<std::size_t>(t.height()) * t.width();
  for (std::size_t loc = 0; loc < plane; ++loc) {
    const double n = location_norm(t, loc, plane);
    if (n <= kNormEpsilon) continue;
    for (int c = 0; c < t.channels(); ++c) out[c * plane + loc] = t[c * plane + loc] / n;
  }
  return out;
}

// Distance contribution of one layer; writes dD/d(raw features) when asked.
double layer_distance(const Tensor3& raw, const Tensor3& ref_normalized, const std::vector<double>& w,
                      Tensor3* grad_raw) {
  const std::size_t plane = static_cast<std::size_t>(raw.height()) * raw.width();
  const int channels = raw.channels();
  const double inv_area = 1.0 / static_cast<double>(plane);
  double total = 0.0;
  std::vector<double> g(channels);
  if (grad_raw != nullptr) *grad_raw = Tensor3(raw.shape());
  for (std::size_t loc = 0; loc < plane; ++loc) {
    const double n = location_norm(raw, loc, plane);
    const bool live = n > kNormEpsilon;
    double vg = 0.0;
    for (int c = 0; c < channels; ++c) {
      const double v = live ? raw[c * plane + loc] / n : 0.0;
      const double diff = v - ref_normalized[c * plane + loc];
      const double wd = w[c] * diff;
      total += wd * wd * inv_area;
      g[c] = 2.0 * inv_area * w[c] * wd;
      vg += v * g[c];
    }
    if (grad_raw != nullptr && live) {
      // d(v/|v|)/dv = (I - v_hat v_hat^T) / |v|
      for (int c = 0; c < channels; ++c) {
        const double vhat = raw[c * plane + loc] / n;
        (*grad_raw)[c * plane + loc] = (g[c] - vhat * vg) / n;
      }
    }
  }
  return total;
}

void check_input(const PerceptualNet& net, const ImageTensor& x) {
  require_same_shape(x.shape(), net.input_shape(), "perceptual net input");
}

}  // namespace

// ------------------------------------------------------------ PerceptualNet

PerceptualNet::PerceptualNet(const nn::Network& features, std::vector<std::size_t> taps, std::vector<double> mean,
                             std::vector<double> stddev)
    : taps_(std::move(taps)) {
  if (taps_.empty()) throw PreconditionError("perceptual net needs at least one tap layer");
  for (std::size_t i = 0; i < taps_.size(); ++i) {
    if (taps_[i] >= features.num_layers() || (i > 0 && taps_[i] <= taps_[i - 1])) {
      throw PreconditionError("perceptual taps must be strictly increasing layer indices");
    }
  }
  nn::Network net(features.input_shape());
  net.add(std::make_unique<nn::ChannelAffine>(std::move(mean), std::move(stddev)));
  for (std::size_t i = 0; i <= taps_.back(); ++i) net.add(features.layer(i).clone());
  for (auto& t : taps_) t += 1;
  net_ = std::make_shared<const nn::Network>(std::move(net));
}

PerceptualNet PerceptualNet::load(const std::filesystem::path& archive_manifest, std::vector<double> mean,
                                  std::vector<double> stddev) {
  Architecture arch = build_architecture("percept_vgg");
  nn::load_parameters(arch.network, archive_manifest);
  return PerceptualNet(arch.network, arch.taps, std::move(mean), std::move(stddev));
}

// ------------------------------------------------------------ ChannelWeights

ChannelWeights::ChannelWeights(std::vector<std::vector<double>> per_layer) : per_layer_(std::move(per_layer)) {
  for (const auto& layer : per_layer_) {
    for (double v : layer) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw PreconditionError("channel weights must be finite and >= 0");
    }
  }
}

ChannelWeights ChannelWeights::ones(const PerceptualNet& net) { return uniform(net, 1.0); }

ChannelWeights ChannelWeights::uniform(const PerceptualNet& net, double value) {
  std::vector<std::vector<double>> w;
  for (std::size_t l = 0; l < net.num_layers(); ++l) w.emplace_back(net.layer_shape(l).channels, value);
  return ChannelWeights(std::move(w));
}

ChannelWeights ChannelWeights::from_vectors(std::vector<std::vector<double>> per_layer) {
  return ChannelWeights(std::move(per_layer));
}

ChannelWeights ChannelWeights::load(const std::filesystem::path& path, const PerceptualNet& net) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open channel weights " + path.string());
  std::vector<std::vector<double>> w;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::vector<double> row;
    double v;
    while (ss >> v) row.push_back(v);
    if (!ss.eof()) throw IoError("non-numeric channel weight in " + path.string());
    w.push_back(std::move(row));
  }
  ChannelWeights out(std::move(w));
  out.check_compatible(net);
  return out;
}

ChannelWeights ChannelWeights::scaled(double factor) const {
  auto w = per_layer_;
  for (auto& layer : w) {
    for (double& v : layer) v *= factor;
  }
  return ChannelWeights(std::move(w));
}

void ChannelWeights::check_compatible(const PerceptualNet& net) const {
  if (per_layer_.size() != net.num_layers()) {
    throw ShapeError("channel weights cover " + std::to_string(per_layer_.size()) + " layers, net has " +
                     std::to_string(net.num_layers()));
  }
  for (std::size_t l = 0; l < per_layer_.size(); ++l) {
    if (static_cast<int>(per_layer_[l].size()) != net.layer_shape(l).channels) {
      throw ShapeError("channel weights for layer " + std::to_string(l) + " have wrong length");
    }
  }
}

// ------------------------------------------------------------ operations

FeatureStack extract_features(const PerceptualNet& net, const ImageTensor& x) {
  check_input(net, x);
  nn::Trace trace;
  net.network().forward(x.tensor(), trace);
  FeatureStack out;
  for (std::size_t tap : net.taps()) out.layers.push_back(std::move(trace.outputs[tap]));
  return out;
}

FeatureStack unit_normalize(const FeatureStack& stack) {
  FeatureStack out;
  for (const Tensor3& t : stack.layers) out.layers.push_back(normalize_layer(t));
  return out;
}

double perceptual_distance(const PerceptualNet& net, const ChannelWeights& w, const ImageTensor& x,
                           const ImageTensor& x2) {
  require_same_shape(x.shape(), x2.shape(), "perceptual_distance");
  return ReferenceDistance(net, w, x).value(x2);
}

Tensor3 perceptual_gradient(const PerceptualNet& net, const ChannelWeights& w, const ImageTensor& x_ref,
                            const ImageTensor& x_var) {
  require_same_shape(x_ref.shape(), x_var.shape(), "perceptual_gradient");
  return ReferenceDistance(net, w, x_ref).value_and_gradient(x_var).gradient;
}

ReferenceDistance::ReferenceDistance(const PerceptualNet& net, const ChannelWeights& w, const ImageTensor& reference)
    : net_(&net), weights_(&w), reference_(unit_normalize(extract_features(net, reference))) {
  w.check_compatible(net);
}

double ReferenceDistance::value(const ImageTensor& x) const {
  const FeatureStack raw = extract_features(*net_, x);
  double total = 0.0;
  for (std::size_t l = 0; l < raw.layers.size(); ++l) {
    total += layer_distance(raw.layers[l], reference_.layers[l], weights_->layer(l), nullptr);
  }
  return total;
}

DistanceWithGradient ReferenceDistance::value_and_gradient(const ImageTensor& x) const {
  check_input(*net_, x);
  nn::Trace trace;
  net_->network().forward(x.tensor(), trace);
  std::vector<Tensor3> grads(net_->num_layers());
  std::vector<const Tensor3*> slots(net_->network().num_layers(), nullptr);
  DistanceWithGradient out;
  for (std::size_t l = 0; l < net_->num_layers(); ++l) {
    const std::size_t tap = net_->taps()[l];
    out.value += layer_distance(trace.outputs[tap], reference_.layers[l], weights_->layer(l), &grads[l]);
    slots[tap] = &grads[l];
  }
  out.gradient = net_->network().backward(trace, slots);
  return out;
}

}  // namespace demiguise::perceptual
