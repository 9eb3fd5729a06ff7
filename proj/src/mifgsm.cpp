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

#include "demiguise/attacks.hpp"
#include "demiguise/errors.hpp"

namespace demiguise::attacks {
namespace {

// Bilinear taps (half-pixel centres) from `from` samples down to `to`.
struct Taps {
  std::vector<int> lo, hi;
  std::vector<double> w;
};

Taps make_taps(int from, int to) {
  Taps t;
  const double scale = static_cast<double>(from) / to;
  for (int o = 0; o < to; ++o) {
    const double src = std::clamp((o + 0.5) * scale - 0.5, 0.0, static_cast<double>(from - 1));
    const int i0 = static_cast<int>(std::floor(src));
    t.lo.push_back(i0);
    t.hi.push_back(std::min(i0 + 1, from - 1));
    t.w.push_back(src - i0);
  }
  return t;
}

void check_side(const DiversityTransform& t, const Shape3& s) {
  if (s.height != t.side_h || s.width != t.side_w) {
    throw ShapeError("diversity transform built for " + std::to_string(t.side_h) + "x" + std::to_string(t.side_w) +
                     ", got " + s.str());
  }
}

double l1_normalize(Tensor3& g) {
  const double n = g.l1_norm();
  if (n > 0.0 && std::isfinite(n)) g.scale(1.0 / n);
  return n;
}

}  // namespace

Tensor3 DiversityTransform::apply(const Tensor3& x) const {
  if (identity()) return x;
  check_side(*this, x.shape());
  const Taps ty = make_taps(side_h, resized), tx = make_taps(side_w, resized);
  Tensor3 out(x.shape());
  for (int c = 0; c < x.shape().channels; ++c) {
    for (int oy = 0; oy < resized; ++oy) {
      for (int ox = 0; ox < resized; ++ox) {
        const double wy = ty.w[oy], wx = tx.w[ox];
        const double v = (1 - wy) * ((1 - wx) * x.at(c, ty.lo[oy], tx.lo[ox]) + wx * x.at(c, ty.lo[oy], tx.hi[ox])) +
                         wy * ((1 - wx) * x.at(c, ty.hi[oy], tx.lo[ox]) + wx * x.at(c, ty.hi[oy], tx.hi[ox]));
        out.at(c, top + oy, left + ox) = v;
      }
    }
  }
  return out;
}

Tensor3 DiversityTransform::adjoint(const Tensor3& grad) const {
  if (identity()) return grad;
  check_side(*this, grad.shape());
  const Taps ty = make_taps(side_h, resized), tx = make_taps(side_w, resized);
  Tensor3 out(grad.shape());
  for (int c = 0; c < grad.shape().channels; ++c) {
    for (int oy = 0; oy < resized; ++oy) {
      for (int ox = 0; ox < resized; ++ox) {
        const double g = grad.at(c, top + oy, left + ox);
        const double wy = ty.w[oy], wx = tx.w[ox];
        out.at(c, ty.lo[oy], tx.lo[ox]) += (1 - wy) * (1 - wx) * g;
        out.at(c, ty.lo[oy], tx.hi[ox]) += (1 - wy) * wx * g;
        out.at(c, ty.hi[oy], tx.lo[ox]) += wy * (1 - wx) * g;
        out.at(c, ty.hi[oy], tx.hi[ox]) += wy * wx * g;
      }
    }
  }
  return out;
}

DiversityTransform sample_diversity(const Shape3& shape, double p, std::mt19937_64& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw PreconditionError("diversity probability must be in [0, 1]");
  DiversityTransform t;
  t.side_h = shape.height;
  t.side_w = shape.width;
  if (p == 0.0) return t;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) >= p) return t;
  const int side = std::min(shape.height, shape.width);
  const int smallest = static_cast<int>(std::ceil(0.9 * side));
  t.resized = std::uniform_int_distribution<int>(smallest, side)(rng);
  t.top = std::uniform_int_distribution<int>(0, shape.height - t.resized)(rng);
  t.left = std::uniform_int_distribution<int>(0, shape.width - t.resized)(rng);
  return t;
}

ImageTensor input_diversity(const ImageTensor& x, double p, std::mt19937_64& rng) {
  const DiversityTransform t = sample_diversity(x.shape(), p, rng);
  if (t.identity()) return x;
  return ImageTensor::clamped(t.apply(x.tensor()));
}

AttackResult mifgsm_attack(const Classifier& c, const PerceptualMetric* metric, const LabeledImage& x,
                           const AttackConfig& cfg) {
  if (c.tier() != classifiers::AccessTier::white_box) {
    throw TierViolation("mifgsm_attack needs a white_box handle, got " + std::string(tier_name(c.tier())));
  }
  cfg.validate(x.label, c.num_classes());
  const bool use_distance = cfg.lambda > 0.0;
  if (use_distance && (metric == nullptr || metric->net == nullptr)) {
    throw PreconditionError("lambda > 0 needs a perceptual network");
  }
  const std::uint64_t q0 = c.queries();
  if (c.predict(x.image) != x.label) {
    throw PreconditionError("sample " + x.sample_id + " is already misclassified");
  }

  AttackResult r;
  r.original_label = x.label;
  r.distance_kind = DistanceKind::perceptual;
  const int n = cfg.max_iters;
  const double alpha = n > 0 ? cfg.epsilon / n : 0.0;
  const int j_label = cfg.targeted ? *cfg.target : x.label;
  const double direction = cfg.targeted ? -1.0 : 1.0;

  std::optional<perceptual::ReferenceDistance> reference;
  if (use_distance) reference.emplace(*metric->net, metric->weights, x.image);

  Tensor3 lo = x.image.tensor(), hi = x.image.tensor();
  for (std::size_t i = 0; i < lo.size(); ++i) {
    lo[i] = std::max(lo[i] - cfg.epsilon, 0.0);
    hi[i] = std::min(hi[i] + cfg.epsilon, 1.0);
  }

  std::mt19937_64 rng(cfg.seed);
  Tensor3 adv = x.image.tensor();
  Tensor3 momentum(adv.shape());
  for (int it = 0; it < n; ++it) {
    const ImageTensor current = ImageTensor::from_tensor(adv);
    const DiversityTransform t = sample_diversity(adv.shape(), cfg.di_probability, rng);
    const ImageTensor seen = t.identity() ? current : ImageTensor::clamped(t.apply(adv));
    auto [z, grad_j] = c.logits_and_gradient(seen, [&](const classifiers::Logits& logits) {
      std::vector<double> g = classifiers::softmax(logits);
      g[j_label] -= 1.0;
      return g;
    });
    if (!t.identity()) grad_j = t.adjoint(grad_j);
    l1_normalize(grad_j);
    Tensor3 combined = std::move(grad_j);
    if (direction < 0) combined.scale(-1.0);
    double d_value = 0.0;
    if (use_distance) {
      auto d = reference->value_and_gradient(current);
      d_value = d.value;
      if (l1_normalize(d.gradient) > 0.0) combined.add_scaled(d.gradient, cfg.lambda);
    }
    r.progress.push_back(use_distance ? d_value : classifiers::cross_entropy(z, j_label));

    for (std::size_t i = 0; i < adv.size(); ++i) {
      momentum[i] = cfg.decay * momentum[i] + combined[i];
      const double s = momentum[i] > 0.0 ? 1.0 : (momentum[i] < 0.0 ? -1.0 : 0.0);
      adv[i] = std::clamp(adv[i] + alpha * s, lo[i], hi[i]);
    }
    r.iterations_used = it + 1;
  }

  r.adversarial = ImageTensor::from_tensor(adv);
  r.adversarial_label = c.predict(r.adversarial);
  r.success = cfg.targeted ? r.adversarial_label == *cfg.target : r.adversarial_label != x.label;
  r.queries_used = c.queries() - q0;
  measure(r, x.image, use_distance ? metric : nullptr);
  if (!use_distance && metric != nullptr && metric->net != nullptr) {
    r.final_distance_perceptual =
        perceptual::perceptual_distance(*metric->net, metric->weights, x.image, r.adversarial);
    r.final_distance = r.final_distance_perceptual;
  }
  return r;
}

}  // namespace demiguise::attacks
