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

#include <cmath>
#include <limits>
#include <optional>

#include "demiguise/attacks.hpp"
#include "demiguise/errors.hpp"

namespace demiguise::attacks {
namespace {

struct Penalty {
  double value = 0.0;
  Tensor3 gradient;
};

// Differentiable distance from a fixed clean image.
class PenaltyEvaluator {
 public:
  PenaltyEvaluator(DistanceKind kind, const ImageTensor& clean, const PerceptualMetric* metric)
      : kind_(kind), clean_(clean) {
    if (kind == DistanceKind::perceptual) {
      if (metric == nullptr || metric->net == nullptr) {
        throw PreconditionError("perceptual distance needs a perceptual network");
      }
      reference_.emplace(*metric->net, metric->weights, clean);
    }
  }

  Penalty operator()(const ImageTensor& x) const {
    switch (kind_) {
      case DistanceKind::perceptual: {
        auto r = reference_->value_and_gradient(x);
        return {r.value, std::move(r.gradient)};
      }
      case DistanceKind::l2: {
        Tensor3 d = x.tensor() - clean_.tensor();
        const double n = d.l2_norm();
        d.scale(2.0);
        return {n * n, std::move(d)};
      }
      case DistanceKind::neg_psnr: {
        Tensor3 d = x.tensor() - clean_.tensor();
        const double count = static_cast<double>(d.size());
        const double m = imaging::mse(clean_, x);
        const double value = 10.0 * std::log10(m + kPsnrMseFloor) - 10.0 * std::log10(kPsnrMseFloor);
        d.scale(10.0 / (std::log(10.0) * (m + kPsnrMseFloor)) * 2.0 / count);
        return {value, std::move(d)};
      }
      case DistanceKind::one_minus_ssim: {
        Tensor3 g = imaging::ssim_gradient(clean_, x);
        g.scale(-1.0);
        return {1.0 - imaging::ssim(clean_, x), std::move(g)};
      }
    }
    throw PreconditionError("unknown distance kind");
  }

 private:
  DistanceKind kind_;
  const ImageTensor& clean_;
  std::optional<perceptual::ReferenceDistance> reference_;
};

// d f_margin / d z, with the runner-up chosen by lowest index on ties.
std::vector<double> margin_upstream(const classifiers::Logits& z, int label, bool targeted, double confidence) {
  std::vector<double> g(z.size(), 0.0);
  if (f_margin(z, label, targeted, confidence) <= 0.0) return g;
  int other = -1;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (static_cast<int>(i) == label) continue;
    if (other < 0 || z[i] > z[other]) other = static_cast<int>(i);
  }
  g[label] = targeted ? -1.0 : 1.0;
  g[other] = targeted ? 1.0 : -1.0;
  return g;
}

bool goal_met(int predicted, int original, const AttackConfig& cfg) {
  return cfg.targeted ? predicted == *cfg.target : predicted != original;
}

AttackResult run_cw(const Classifier& c, const PerceptualMetric* metric, const LabeledImage& x, DistanceKind kind,
                    const AttackConfig& cfg, double lambda) {
  const std::uint64_t q0 = c.queries();
  AttackResult r;
  r.original_label = x.label;
  r.distance_kind = kind;
  r.adversarial = x.image;
  r.adversarial_label = x.label;
  if (cfg.max_iters == 0) {
    r.queries_used = c.queries() - q0;
    measure(r, x.image, metric);
    return r;
  }

  const PenaltyEvaluator penalty(kind, x.image, metric);
  const int f_label = cfg.targeted ? *cfg.target : x.label;
  Tensor3 u = tanh_encode(x.image);
  Tensor3 m(u.shape()), v(u.shape());
  constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

  std::optional<ImageTensor> best;
  int best_label = x.label;
  double best_distance = std::numeric_limits<double>::infinity();
  ImageTensor last = x.image;
  int last_label = x.label;
  double previous_loss = std::numeric_limits<double>::infinity();
  int stalled = 0;

  for (int it = 0; it < cfg.max_iters; ++it) {
    const ImageTensor candidate = tanh_decode(u);
    auto [z, grad_adv] = c.logits_and_gradient(candidate, [&](const classifiers::Logits& logits) {
      return margin_upstream(logits, f_label, cfg.targeted, cfg.confidence);
    });
    const double adv_loss = f_margin(z, f_label, cfg.targeted, cfg.confidence);
    Penalty dist = penalty(candidate);
    const double loss = lambda * dist.value + adv_loss;
    const int predicted = classifiers::argmax(z);
    r.iterations_used = it + 1;
    last = candidate;
    last_label = predicted;
    if (goal_met(predicted, x.label, cfg) && dist.value < best_distance) {
      best = candidate;
      best_label = predicted;
      best_distance = dist.value;
    }
    r.progress.push_back(best ? best_distance : loss);

    // Stall = relative improvement over the previous iterate below tolerance.
    const bool improved = !std::isfinite(previous_loss) ||
                          previous_loss - loss > cfg.early_stop.tolerance * std::abs(previous_loss);
    previous_loss = loss;
    if (improved) {
      stalled = 0;
    } else if (++stalled >= cfg.early_stop.patience) {
      break;
    }

    // dL/dx' then through x' = (tanh(u) + 1) / 2
    Tensor3 grad = std::move(grad_adv);
    grad.add_scaled(dist.gradient, lambda);
    const double c1 = 1.0 - std::pow(beta1, it + 1);
    const double c2 = 1.0 - std::pow(beta2, it + 1);
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double t = std::tanh(u[i]);
      const double g = grad[i] * 0.5 * (1.0 - t * t);
      m[i] = beta1 * m[i] + (1.0 - beta1) * g;
      v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
      u[i] -= cfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + adam_eps);
    }
  }

  if (best) {
    r.adversarial = *best;
    r.adversarial_label = best_label;
    r.success = true;
  } else {
    r.adversarial = last;
    r.adversarial_label = last_label;
    r.success = false;
  }
  r.queries_used = c.queries() - q0;
  measure(r, x.image, metric);
  return r;
}

}  // namespace

AttackResult cw_attack(const Classifier& c, const PerceptualMetric* metric, const LabeledImage& x, DistanceKind kind,
                       const AttackConfig& cfg) {
  if (c.tier() != classifiers::AccessTier::white_box) {
    throw TierViolation("cw_attack needs a white_box handle, got " + std::string(tier_name(c.tier())));
  }
  cfg.validate(x.label, c.num_classes());
  const std::uint64_t q0 = c.queries();
  if (c.predict(x.image) != x.label) {
    throw PreconditionError("sample " + x.sample_id + " is already misclassified");
  }
  const std::uint64_t precheck = c.queries() - q0;

  AttackResult result;
  if (!cfg.lambda_search) {
    result = run_cw(c, metric, x, kind, cfg, cfg.lambda);
    result.queries_used += precheck;
    return result;
  }
  std::optional<AttackResult> chosen;
  int iterations = 0;
  std::uint64_t queries = precheck;
  for (double lambda : {cfg.lambda / 10.0, cfg.lambda, cfg.lambda * 10.0}) {
    AttackResult r = run_cw(c, metric, x, kind, cfg, lambda);
    iterations += r.iterations_used;
    queries += r.queries_used;
    const bool better = !chosen || (r.success && (!chosen->success || r.final_distance < chosen->final_distance)) ||
                        (!r.success && !chosen->success && lambda == cfg.lambda);
    if (better) chosen = std::move(r);
  }
  chosen->iterations_used = iterations;
  chosen->queries_used = queries;
  return *chosen;
}

}  // namespace demiguise::attacks
