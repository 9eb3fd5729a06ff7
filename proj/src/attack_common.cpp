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

#include <algorithm>
#include <cmath>
#include <limits>

#include "demiguise/attacks.hpp"
#include "demiguise/errors.hpp"

namespace demiguise::attacks {

const char* distance_kind_name(DistanceKind kind) {
  switch (kind) {
    case DistanceKind::perceptual:
      return "perceptual";
    case DistanceKind::l2:
      return "l2";
    case DistanceKind::neg_psnr:
      return "neg_psnr";
    case DistanceKind::one_minus_ssim:
      return "one_minus_ssim";
  }
  return "unknown";
}

DistanceKind parse_distance_kind(const std::string& name) {
  for (DistanceKind k :
       {DistanceKind::perceptual, DistanceKind::l2, DistanceKind::neg_psnr, DistanceKind::one_minus_ssim}) {
    if (name == distance_kind_name(k)) return k;
  }
  throw ConfigError("unknown distance kind '" + name + "'");
}

void AttackConfig::validate(int original_label, int num_classes) const {
  if (!(lambda >= 0.0)) throw PreconditionError("lambda must be >= 0");
  if (!(epsilon >= 0.0)) throw PreconditionError("epsilon must be >= 0");
  if (max_iters < 0) throw PreconditionError("max_iters must be >= 0");
  if (query_budget < 0) throw PreconditionError("query_budget must be >= 0");
  if (!(di_probability >= 0.0 && di_probability <= 1.0)) throw PreconditionError("di_probability must be in [0, 1]");
  if (!(learning_rate > 0.0)) throw PreconditionError("learning_rate must be > 0");
  if (early_stop.patience < 1) throw PreconditionError("early-stop patience must be >= 1");
  if (targeted) {
    if (!target) throw PreconditionError("targeted attack needs a target class");
    if (*target == original_label) throw PreconditionError("target must differ from the original label");
    if (*target < 0 || *target >= num_classes) throw PreconditionError("target class out of range");
  }
}

PerceptualMetric PerceptualMetric::unit_weights(const perceptual::PerceptualNet& net) {
  return {&net, perceptual::ChannelWeights::ones(net)};
}

double f_margin(std::span<const double> z, int label, bool targeted, double confidence) {
  if (label < 0 || static_cast<std::size_t>(label) >= z.size()) throw PreconditionError("label out of range");
  double other = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (static_cast<int>(i) != label) other = std::max(other, z[i]);
  }
  const double gap = targeted ? other - z[label] : z[label] - other;
  return std::max(gap + confidence, 0.0);
}

Tensor3 tanh_encode(const ImageTensor& x) {
  Tensor3 u = x.tensor();
  for (double& v : u.storage()) {
    const double clamped = std::clamp(v, kTanhClamp, 1.0 - kTanhClamp);
    v = std::atanh(2.0 * clamped - 1.0);
  }
  return u;
}

ImageTensor tanh_decode(const Tensor3& u) {
  Tensor3 x = u;
  for (double& v : x.storage()) v = (std::tanh(v) + 1.0) / 2.0;
  return ImageTensor::clamped(std::move(x));
}

double distance_value(DistanceKind kind, const ImageTensor& clean, const ImageTensor& candidate,
                      const PerceptualMetric* metric) {
  require_same_shape(clean.shape(), candidate.shape(), "distance_value");
  switch (kind) {
    case DistanceKind::perceptual:
      if (metric == nullptr || metric->net == nullptr) {
        throw PreconditionError("perceptual distance needs a perceptual network");
      }
      return perceptual::perceptual_distance(*metric->net, metric->weights, clean, candidate);
    case DistanceKind::l2: {
      const Tensor3 d = candidate.tensor() - clean.tensor();
      const double n = d.l2_norm();
      return n * n;
    }
    case DistanceKind::neg_psnr:
      return 10.0 * std::log10(imaging::mse(clean, candidate) + kPsnrMseFloor) - 10.0 * std::log10(kPsnrMseFloor);
    case DistanceKind::one_minus_ssim:
      return 1.0 - imaging::ssim(clean, candidate);
  }
  throw PreconditionError("unknown distance kind");
}

void measure(AttackResult& r, const ImageTensor& clean, const PerceptualMetric* metric) {
  const Tensor3 d = r.adversarial.tensor() - clean.tensor();
  r.final_l2 = d.l2_norm();
  r.final_linf = d.linf_norm();
  r.final_distance_perceptual =
      (metric != nullptr && metric->net != nullptr)
          ? perceptual::perceptual_distance(*metric->net, metric->weights, clean, r.adversarial)
          : std::numeric_limits<double>::quiet_NaN();
  r.final_distance = (r.distance_kind == DistanceKind::perceptual && metric == nullptr)
                         ? std::numeric_limits<double>::quiet_NaN()
                         : distance_value(r.distance_kind, clean, r.adversarial, metric);
}

}  // namespace demiguise::attacks
