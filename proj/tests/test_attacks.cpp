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
#include <limits>

#include "demiguise/attacks.hpp"
#include "demiguise/errors.hpp"
#include "support.hpp"

using namespace demiguise;
using namespace demiguise::attacks;
using classifiers::AccessTier;
using classifiers::Classifier;
using imaging::ImageTensor;
using imaging::LabeledImage;

namespace {

struct Setup {
  std::shared_ptr<testing::LinearBackend> backend;
  Classifier c;
  perceptual::PerceptualNet net;
  PerceptualMetric metric;

  explicit Setup(std::uint64_t seed = 50)
      : backend(std::make_shared<testing::LinearBackend>(testing::small_shape(), 4, seed)),
        c("linear", backend, classifiers::Normalization{{0.5, 0.5, 0.5}, {0.25, 0.25, 0.25}}),
        net(testing::tiny_perceptual(seed + 1)),
        metric(PerceptualMetric::unit_weights(net)) {}

  // A random image labelled with the stub's own prediction.
  LabeledImage sample(std::mt19937_64& rng) const {
    const ImageTensor x = testing::random_image(testing::small_shape(), rng, 0.05, 0.95);
    return {x, c.predict(x), "s"};
  }
};

// Plain iterative FGSM, written against the classifier API only.
ImageTensor ifgsm_oracle(const Classifier& c, const LabeledImage& x, double eps, int n) {
  const double alpha = eps / n;
  Tensor3 adv = x.image.tensor();
  for (int it = 0; it < n; ++it) {
    const Tensor3 g = c.loss_gradient(ImageTensor::from_tensor(adv), x.label);
    for (std::size_t i = 0; i < adv.size(); ++i) {
      const double s = g[i] > 0 ? 1.0 : (g[i] < 0 ? -1.0 : 0.0);
      const double lo = std::max(x.image[i] - eps, 0.0), hi = std::min(x.image[i] + eps, 1.0);
      adv[i] = std::min(std::max(adv[i] + alpha * s, lo), hi);
    }
  }
  return ImageTensor::from_tensor(adv);
}

bool in_unit_range(const ImageTensor& x) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= 0.0 && x[i] <= 1.0)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("f_margin is zero exactly when the goal is met") {
  std::mt19937_64 rng(51);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> z(6);
    for (double& v : z) v = n(rng);
    const int label = t % 6;
    const int pred = classifiers::argmax(z);
    CHECK((f_margin(z, label, false) == 0.0) == (pred != label));
    CHECK((f_margin(z, label, true) == 0.0) == (pred == label));
    CHECK(f_margin(z, label, false, 0.5) >= f_margin(z, label, false));
  }
}

TEST_CASE("tanh parameterisation round trips inside the clamp") {
  std::mt19937_64 rng(52);
  const ImageTensor x = testing::random_image({3, 5, 5}, rng);
  const ImageTensor back = tanh_decode(tanh_encode(x));
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(back[i] - x[i]) < 2e-6);
  Tensor3 wild(Shape3{1, 1, 3}, std::vector<double>{-50.0, 0.0, 50.0});
  const ImageTensor d = tanh_decode(wild);
  CHECK(d[0] == 0.0);
  CHECK(d[1] == 0.5);
  CHECK(d[2] == 1.0);
}

TEST_CASE("distance kinds") {
  CHECK(parse_distance_kind("neg_psnr") == DistanceKind::neg_psnr);
  CHECK_THROWS_AS(parse_distance_kind("linf"), ConfigError);
  Setup s;
  std::mt19937_64 rng(53);
  const auto a = testing::random_image(testing::small_shape(), rng);
  for (auto k : {DistanceKind::perceptual, DistanceKind::l2, DistanceKind::neg_psnr, DistanceKind::one_minus_ssim}) {
    CHECK(distance_value(k, a, a, &s.metric) == doctest::Approx(0.0).scale(1.0));
  }
  CHECK_THROWS_AS(distance_value(DistanceKind::perceptual, a, a, nullptr), PreconditionError);
}

TEST_CASE("cw: preconditions") {
  Setup s;
  std::mt19937_64 rng(54);
  LabeledImage x = s.sample(rng);
  AttackConfig cfg;
  CHECK_THROWS_AS(cw_attack(s.c.with_tier(AccessTier::score_only), &s.metric, x, DistanceKind::l2, cfg),
                  TierViolation);
  LabeledImage wrong = x;
  wrong.label = (x.label + 1) % 4;
  CHECK_THROWS_AS(cw_attack(s.c, &s.metric, wrong, DistanceKind::l2, cfg), PreconditionError);
  cfg.targeted = true;
  CHECK_THROWS_AS(cw_attack(s.c, &s.metric, x, DistanceKind::l2, cfg), PreconditionError);
  cfg.target = x.label;
  CHECK_THROWS_AS(cw_attack(s.c, &s.metric, x, DistanceKind::l2, cfg), PreconditionError);
  cfg.target = 9;
  CHECK_THROWS_AS(cw_attack(s.c, &s.metric, x, DistanceKind::l2, cfg), PreconditionError);
}

TEST_CASE("cw: zero iterations returns the input") {
  Setup s;
  std::mt19937_64 rng(55);
  const LabeledImage x = s.sample(rng);
  AttackConfig cfg;
  cfg.max_iters = 0;
  const AttackResult r = cw_attack(s.c, &s.metric, x, DistanceKind::perceptual, cfg);
  CHECK(r.adversarial == x.image);
  CHECK_FALSE(r.success);
  CHECK(r.iterations_used == 0);
}

TEST_CASE("cw: every distance kind succeeds on a linear model with consistent bookkeeping") {
  Setup s;
  std::mt19937_64 rng(56);
  for (auto kind : {DistanceKind::perceptual, DistanceKind::l2, DistanceKind::neg_psnr, DistanceKind::one_minus_ssim}) {
    const LabeledImage x = s.sample(rng);
    AttackConfig cfg;
    cfg.max_iters = 300;
    cfg.lambda = kind == DistanceKind::perceptual ? 0.05 : 0.01;
    const AttackResult r = cw_attack(s.c, &s.metric, x, kind, cfg);
    INFO(distance_kind_name(kind));
    CHECK(r.success);
    CHECK(r.adversarial_label != x.label);
    CHECK(s.c.predict(r.adversarial) == r.adversarial_label);
    CHECK(in_unit_range(r.adversarial));
    CHECK(std::abs(r.final_distance - distance_value(kind, x.image, r.adversarial, &s.metric)) < 1e-12);
    // The last progress entry is the retained iterate's own distance.
    REQUIRE_FALSE(r.progress.empty());
    CHECK(r.progress.back() == doctest::Approx(r.final_distance).epsilon(1e-12));
  }
}

TEST_CASE("cw: longer runs never return a farther success") {
  // A run of n iterations is a prefix of a run of n + k, so the retained
  // distance must be non-increasing in the iteration cap.
  Setup s;
  std::mt19937_64 rng(70);
  const LabeledImage x = s.sample(rng);
  AttackConfig cfg;
  cfg.early_stop.patience = 100000;
  double previous = std::numeric_limits<double>::infinity();
  for (int n : {20, 40, 80, 160}) {
    cfg.max_iters = n;
    const AttackResult r = cw_attack(s.c, &s.metric, x, DistanceKind::perceptual, cfg);
    if (!r.success) continue;
    CHECK(r.final_distance <= previous);
    previous = r.final_distance;
  }
  CHECK(std::isfinite(previous));
}

TEST_CASE("cw: a dominant distance term keeps the image in place") {
  // Robust here means class 0 wins at every point of the unit cube, so even a
  // full-size first optimizer step cannot flip the label.
  Setup s;
  s.backend->set_bias(0, 100.0);
  const std::size_t n = testing::small_shape().size();
  for (int k = 1; k < 4; ++k) {
    double worst = s.backend->bias(0) - s.backend->bias(k);
    for (std::size_t i = 0; i < n; ++i) {
      // Normalization maps a pixel v to 4v - 2, so the logit slope is 4w.
      const double w = 4.0 * (s.backend->weight(0, i) - s.backend->weight(k, i));
      worst += std::min(w * 1.0, w * 0.0) - 2.0 * (s.backend->weight(0, i) - s.backend->weight(k, i));
    }
    REQUIRE(worst > 0.0);
  }
  std::mt19937_64 rng(57);
  const LabeledImage x = s.sample(rng);
  REQUIRE(x.label == 0);
  AttackConfig cfg;
  cfg.lambda = 1e9;
  cfg.max_iters = 200;
  const AttackResult r = cw_attack(s.c, &s.metric, x, DistanceKind::l2, cfg);
  CHECK_FALSE(r.success);
  CHECK(r.final_l2 < 1e-3);
}

TEST_CASE("cw: targeted mode reaches the target") {
  Setup s;
  std::mt19937_64 rng(58);
  const LabeledImage x = s.sample(rng);
  AttackConfig cfg;
  cfg.targeted = true;
  cfg.target = (x.label + 2) % 4;
  cfg.max_iters = 300;
  const AttackResult r = cw_attack(s.c, &s.metric, x, DistanceKind::l2, cfg);
  CHECK(r.success);
  CHECK(r.adversarial_label == *cfg.target);
}

TEST_CASE("cw: lambda search keeps the closest success and sums the work") {
  Setup s;
  std::mt19937_64 rng(59);
  const LabeledImage x = s.sample(rng);
  AttackConfig cfg;
  cfg.max_iters = 100;
  const AttackResult single = cw_attack(s.c, &s.metric, x, DistanceKind::perceptual, cfg);
  cfg.lambda_search = true;
  const AttackResult searched = cw_attack(s.c, &s.metric, x, DistanceKind::perceptual, cfg);
  CHECK(searched.iterations_used >= single.iterations_used);
  if (single.success) {
    CHECK(searched.success);
    CHECK(searched.final_distance <= single.final_distance);
  }
}

TEST_CASE("cw and mifgsm are deterministic") {
  Setup s;
  std::mt19937_64 rng(60);
  const LabeledImage x = s.sample(rng);
  AttackConfig cfg;
  cfg.max_iters = 50;
  cfg.seed = 3;
  const AttackResult a = cw_attack(s.c, &s.metric, x, DistanceKind::perceptual, cfg);
  const AttackResult b = cw_attack(s.c, &s.metric, x, DistanceKind::perceptual, cfg);
  CHECK(a.adversarial == b.adversarial);
  CHECK(a.progress == b.progress);
  cfg.lambda = 0.5;
  cfg.di_probability = 0.7;
  cfg.max_iters = 10;
  const AttackResult m1 = mifgsm_attack(s.c, &s.metric, x, cfg);
  const AttackResult m2 = mifgsm_attack(s.c, &s.metric, x, cfg);
  CHECK(m1.adversarial == m2.adversarial);
}

TEST_CASE("mifgsm: zero budget is the identity") {
  Setup s;
  std::mt19937_64 rng(61);
  const LabeledImage x = s.sample(rng);
  AttackConfig cfg;
  cfg.epsilon = 0.0;
  cfg.max_iters = 10;
  CHECK(mifgsm_attack(s.c, &s.metric, x, cfg).adversarial == x.image);
}

TEST_CASE("mifgsm: the l-infinity bound holds for every pixel") {
  Setup s;
  std::mt19937_64 rng(62);
  for (int t = 0; t < 5; ++t) {
    const LabeledImage x = s.sample(rng);
    AttackConfig cfg;
    cfg.epsilon = 0.03 * (t + 1);
    cfg.max_iters = 7 + t;
    cfg.lambda = t % 2 ? 1.0 : 0.0;
    cfg.di_probability = t % 3 ? 0.5 : 0.0;
    cfg.seed = t;
    const AttackResult r = mifgsm_attack(s.c, &s.metric, x, cfg);
    CHECK(r.final_linf <= cfg.epsilon + 1e-6);
    CHECK(in_unit_range(r.adversarial));
    CHECK(r.iterations_used == cfg.max_iters);
  }
}

TEST_CASE("mifgsm: no momentum and no distance term equals iterative FGSM") {
  Setup s;
  std::mt19937_64 rng(63);
  for (int t = 0; t < 3; ++t) {
    const LabeledImage x = s.sample(rng);
    AttackConfig cfg;
    cfg.lambda = 0.0;
    cfg.decay = 0.0;
    cfg.epsilon = 0.08;
    cfg.max_iters = 12;
    const AttackResult r = mifgsm_attack(s.c, nullptr, x, cfg);
    CHECK(r.adversarial == ifgsm_oracle(s.c, x, cfg.epsilon, cfg.max_iters));
  }
}

TEST_CASE("mifgsm: a distance term needs a perceptual network") {
  Setup s;
  std::mt19937_64 rng(64);
  AttackConfig cfg;
  cfg.lambda = 1.0;
  CHECK_THROWS_AS(mifgsm_attack(s.c, nullptr, s.sample(rng), cfg), PreconditionError);
}

TEST_CASE("input diversity") {
  std::mt19937_64 rng(65);
  const ImageTensor x = testing::random_image({3, 20, 20}, rng, 0.2, 1.0);
  SUBCASE("p = 0 is the identity") {
    std::mt19937_64 r(1);
    for (int t = 0; t < 10; ++t) CHECK(input_diversity(x, 0.0, r) == x);
  }
  SUBCASE("p = 1 keeps the size and pads with exact zeros") {
    std::mt19937_64 r(2);
    for (int t = 0; t < 20; ++t) {
      std::mt19937_64 copy = r;
      const DiversityTransform d = sample_diversity(x.shape(), 1.0, copy);
      const ImageTensor y = input_diversity(x, 1.0, r);
      CHECK(y.shape() == x.shape());
      CHECK(d.resized >= 18);
      CHECK(d.resized <= 20);
      for (int c = 0; c < 3; ++c) {
        for (int h = 0; h < 20; ++h) {
          for (int w = 0; w < 20; ++w) {
            const bool inside = h >= d.top && h < d.top + d.resized && w >= d.left && w < d.left + d.resized;
            if (!inside) CHECK(y.at(c, h, w) == 0.0);
            if (inside) CHECK(y.at(c, h, w) > 0.0);
          }
        }
      }
    }
  }
  SUBCASE("fixed seed gives a fixed sequence") {
    std::mt19937_64 a(3), b(3);
    for (int t = 0; t < 10; ++t) CHECK(input_diversity(x, 0.5, a) == input_diversity(x, 0.5, b));
  }
  SUBCASE("the adjoint satisfies <Tx, y> = <x, T*y>") {
    DiversityTransform d{20, 20, 18, 1, 2};
    const Tensor3 u = testing::random_tensor(x.shape(), rng, -1, 1);
    const Tensor3 v = testing::random_tensor(x.shape(), rng, -1, 1);
    const Tensor3 tu = d.apply(u), tv = d.adjoint(v);
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      lhs += tu[i] * v[i];
      rhs += u[i] * tv[i];
    }
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
  CHECK_THROWS_AS(input_diversity(x, 1.5, rng), PreconditionError);
}

TEST_CASE("hsja: decision-only access within the query budget") {
  Setup s;
  std::mt19937_64 rng(66);
  for (bool demi : {false, true}) {
    for (int budget : {300, 2000}) {
      const LabeledImage x = s.sample(rng);
      const Classifier handle = s.c.with_tier(AccessTier::decision_only);
      const int logits_before = s.backend->logits_calls, grads_before = s.backend->gradient_calls;
      AttackConfig cfg;
      cfg.query_budget = budget;
      cfg.seed = 9;
      const AttackResult r = hsja_attack(handle, &s.metric, x, demi, cfg);
      CHECK(s.backend->gradient_calls == grads_before);
      CHECK(static_cast<std::uint64_t>(s.backend->logits_calls - logits_before) == r.queries_used);
      CHECK(r.queries_used == handle.queries());
      CHECK(r.queries_used <= static_cast<std::uint64_t>(budget));
      CHECK(r.success);
      CHECK(s.c.predict(r.adversarial) != x.label);
      CHECK(in_unit_range(r.adversarial));
      for (std::size_t i = 1; i < r.progress.size(); ++i) CHECK(r.progress[i] <= r.progress[i - 1]);
      const double metric = demi ? r.final_distance_perceptual : r.final_l2;
      if (!r.progress.empty()) CHECK(r.progress.back() == doctest::Approx(metric).epsilon(1e-12));
    }
  }
}

TEST_CASE("hsja: deterministic and tolerant of a tiny budget") {
  Setup s;
  std::mt19937_64 rng(67);
  const LabeledImage x = s.sample(rng);
  AttackConfig cfg;
  cfg.query_budget = 500;
  cfg.seed = 4;
  const AttackResult a = hsja_attack(s.c.with_tier(AccessTier::decision_only), &s.metric, x, true, cfg);
  const AttackResult b = hsja_attack(s.c.with_tier(AccessTier::decision_only), &s.metric, x, true, cfg);
  CHECK(a.adversarial == b.adversarial);
  CHECK(a.queries_used == b.queries_used);
  cfg.query_budget = 1;
  const AttackResult tiny = hsja_attack(s.c.with_tier(AccessTier::decision_only), &s.metric, x, false, cfg);
  CHECK_FALSE(tiny.success);
  CHECK(tiny.queries_used <= 1);
  CHECK(tiny.adversarial == x.image);
}
