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
#include <numeric>
#include <optional>

#include "demiguise/attacks.hpp"
#include "demiguise/errors.hpp"

namespace demiguise::attacks {
namespace {

struct BudgetExhausted {};

// Decision oracle with a hard query ceiling. Only predict() is ever called.
class Oracle {
 public:
  Oracle(const Classifier& c, const AttackConfig& cfg, int original)
      : c_(c), budget_(static_cast<std::uint64_t>(cfg.query_budget)), start_(c.queries()),
        targeted_(cfg.targeted), target_(cfg.target.value_or(-1)), original_(original) {}

  int label(const ImageTensor& x) {
    if (used() >= budget_) throw BudgetExhausted{};
    return c_.predict(x);
  }
  // Label of x when it meets the goal.
  std::optional<int> hit(const ImageTensor& x) {
    const int l = label(x);
    return met(l) ? std::optional<int>(l) : std::nullopt;
  }
  bool met(int predicted) const { return targeted_ ? predicted == target_ : predicted != original_; }
  std::uint64_t used() const { return c_.queries() - start_; }
  std::uint64_t remaining() const { return budget_ - std::min(budget_, used()); }

 private:
  const Classifier& c_;
  std::uint64_t budget_;
  std::uint64_t start_;
  bool targeted_;
  int target_;
  int original_;
};

struct Point {
  Tensor3 x;
  int label = 0;
};

Tensor3 blend(const Tensor3& clean, const Tensor3& adv, double t) {
  Tensor3 out = clean;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - t) * clean[i] + t * adv[i];
  return out;
}

// Binary search on the segment clean -> adv; the adversarial end is kept.
// `out` always holds a confirmed adversarial point, even if the budget runs out.
void project_to_boundary(Oracle& oracle, const Tensor3& clean, const Point& adv, Point& out) {
  double low = 0.0, high = 1.0;
  out = adv;
  while (high - low > kHsjaBoundaryTolerance) {
    const double mid = 0.5 * (low + high);
    Tensor3 candidate = blend(clean, adv.x, mid);
    if (auto l = oracle.hit(ImageTensor::clamped(candidate))) {
      high = mid;
      out = {std::move(candidate), *l};
    } else {
      low = mid;
    }
  }
}

Tensor3 estimate_direction(Oracle& oracle, const Tensor3& boundary, double delta, int samples,
                           std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const Shape3 shape = boundary.shape();
  std::vector<Tensor3> directions;
  std::vector<double> signs;
  directions.reserve(samples);
  for (int b = 0; b < samples; ++b) {
    Tensor3 u(shape);
    for (double& v : u.storage()) v = normal(rng);
    u.scale(1.0 / std::max(u.l2_norm(), 1e-12));
    Tensor3 probe = boundary;
    probe.add_scaled(u, delta);
    for (double& v : probe.storage()) v = std::clamp(v, 0.0, 1.0);
    Tensor3 effective = probe - boundary;
    effective.scale(1.0 / delta);
    // Record the direction first so a budget stop leaves a consistent prefix.
    const bool hit = oracle.hit(ImageTensor::from_tensor(probe)).has_value();
    directions.push_back(std::move(effective));
    signs.push_back(hit ? 1.0 : -1.0);
  }
  const double mean = signs.empty() ? 0.0 : std::accumulate(signs.begin(), signs.end(), 0.0) / signs.size();
  Tensor3 g(shape);
  for (std::size_t b = 0; b < directions.size(); ++b) {
    // With a uniform outcome the baseline would cancel everything.
    const double w = (std::abs(mean) == 1.0) ? signs[b] : signs[b] - mean;
    g.add_scaled(directions[b], w);
  }
  const double n = g.l2_norm();
  if (n > 0.0) g.scale(1.0 / n);
  return g;
}

}  // namespace

AttackResult hsja_attack(const Classifier& c, const PerceptualMetric* metric, const LabeledImage& x,
                         bool use_perceptual, const AttackConfig& cfg) {
  cfg.validate(x.label, c.num_classes());
  if (use_perceptual && (metric == nullptr || metric->net == nullptr)) {
    throw PreconditionError("perceptual HSJA needs a perceptual network");
  }
  AttackResult r;
  r.original_label = x.label;
  r.adversarial = x.image;
  r.adversarial_label = x.label;
  r.distance_kind = use_perceptual ? DistanceKind::perceptual : DistanceKind::l2;

  Oracle oracle(c, cfg, x.label);
  const Tensor3& clean = x.image.tensor();
  const double d = static_cast<double>(clean.size());
  std::optional<perceptual::ReferenceDistance> reference;
  if (use_perceptual) reference.emplace(*metric->net, metric->weights, x.image);
  auto l2 = [&](const Tensor3& t) { return (t - clean).l2_norm(); };
  auto objective = [&](const Tensor3& t) {
    return use_perceptual ? reference->value(ImageTensor::from_tensor(t)) : l2(t);
  };

  std::mt19937_64 rng(cfg.seed);
  std::optional<Point> best;
  double best_objective = 0.0;
  try {
    if (oracle.met(oracle.label(x.image))) {
      throw PreconditionError("sample " + x.sample_id + " already meets the attack goal");
    }

    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (int trial = 0; trial < kHsjaInitTrials && !best; ++trial) {
      Tensor3 noise(clean.shape());
      for (double& v : noise.storage()) v = uniform(rng);
      if (auto l = oracle.hit(ImageTensor::from_tensor(noise))) best = Point{std::move(noise), *l};
    }
    if (!best) throw BudgetExhausted{};
    {
      const Point start = *best;
      project_to_boundary(oracle, clean, start, *best);
    }
    best_objective = objective(best->x);

    // Radius scale: for D, convert sqrt(D) to pixel units using the first boundary point.
    const double kappa = use_perceptual && best_objective > 0.0 ? l2(best->x) / std::sqrt(best_objective) : 1.0;
    const double theta = kHsjaBoundaryTolerance;

    for (int t = 1; oracle.remaining() > 0; ++t) {
      const double scale = use_perceptual ? kappa * std::sqrt(best_objective) : best_objective;
      const double delta = std::sqrt(d) * theta * scale;
      const int samples = static_cast<int>(std::min<std::uint64_t>(
          static_cast<std::uint64_t>(std::ceil(100.0 * std::sqrt(static_cast<double>(t)))), oracle.remaining()));
      if (delta <= 0.0 || samples <= 0) break;
      const Tensor3 direction = estimate_direction(oracle, best->x, delta, samples, rng);
      if (direction.l2_norm() == 0.0) break;

      double step = l2(best->x) / std::sqrt(static_cast<double>(t));
      std::optional<Point> moved;
      for (int halvings = 0; halvings < 30 && !moved; ++halvings, step *= 0.5) {
        Tensor3 candidate = best->x;
        candidate.add_scaled(direction, step);
        for (double& v : candidate.storage()) v = std::clamp(v, 0.0, 1.0);
        if (auto l = oracle.hit(ImageTensor::from_tensor(candidate))) moved = Point{std::move(candidate), *l};
      }
      r.iterations_used = t;
      if (moved) {
        Point next;
        project_to_boundary(oracle, clean, *moved, next);
        const double value = objective(next.x);
        if (value < best_objective) {
          best = std::move(next);
          best_objective = value;
        }
      }
      r.progress.push_back(best_objective);
    }
  } catch (const BudgetExhausted&) {
  }

  if (best) {
    r.adversarial = ImageTensor::from_tensor(best->x);
    r.adversarial_label = best->label;
    r.success = true;
  }
  r.queries_used = oracle.used();
  measure(r, x.image, metric);
  return r;
}

}  // namespace demiguise::attacks
