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

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "demiguise/classifiers.hpp"
#include "demiguise/imaging.hpp"
#include "demiguise/perceptual.hpp"

namespace demiguise::attacks {

using classifiers::Classifier;
using imaging::ImageTensor;
using imaging::LabeledImage;

enum class DistanceKind { perceptual, l2, neg_psnr, one_minus_ssim };

const char* distance_kind_name(DistanceKind kind);
DistanceKind parse_distance_kind(const std::string& name);

// The penalty for neg_psnr is 10*log10(mse + kPsnrMseFloor) - 10*log10(kPsnrMseFloor),
// i.e. -PSNR shifted so that it is finite and zero at the clean image.
inline constexpr double kPsnrMseFloor = 1e-10;

struct EarlyStop {
  double tolerance = 1e-4;
  int patience = 50;
};

struct AttackConfig {
  double lambda = 0.05;
  double learning_rate = 0.2;
  int max_iters = 1000;
  double epsilon = 0.1;
  double decay = 1.0;
  int query_budget = 2000;
  bool targeted = false;
  std::optional<int> target;
  double di_probability = 0.0;
  std::uint64_t seed = 0;
  EarlyStop early_stop;
  double confidence = 0.0;
  // C&W only: also try lambda/10 and 10*lambda, keep the closest success.
  bool lambda_search = false;

  // Throws PreconditionError when an invariant fails.
  void validate(int original_label, int num_classes) const;
};

struct AttackResult {
  ImageTensor adversarial;
  bool success = false;
  int iterations_used = 0;
  std::uint64_t queries_used = 0;
  double final_distance_perceptual = 0.0;
  double final_l2 = 0.0;
  double final_linf = 0.0;
  int original_label = 0;
  int adversarial_label = 0;
  // Penalty the attack optimised, measured on `adversarial`.
  DistanceKind distance_kind = DistanceKind::l2;
  double final_distance = 0.0;
  // Tracked objective of the retained iterate, one entry per outer iteration.
  std::vector<double> progress;
};

// Perceptual network plus channel weights. Attacks that do not need a
// perceptual term accept a null pointer.
struct PerceptualMetric {
  const perceptual::PerceptualNet* net = nullptr;
  perceptual::ChannelWeights weights;

  static PerceptualMetric unit_weights(const perceptual::PerceptualNet& net);
};

// Hinge on logits. Targeted: max(max_{i!=t} z_i - z_t + k, 0);
// non-targeted: max(z_y - max_{i!=y} z_i + k, 0).
double f_margin(std::span<const double> z, int label, bool targeted, double confidence = 0.0);

// Inputs are pulled inward by kTanhClamp before arctanh.
inline constexpr double kTanhClamp = 1e-6;
Tensor3 tanh_encode(const ImageTensor& x);
ImageTensor tanh_decode(const Tensor3& u);

// Value of a distance penalty between a clean and a candidate image.
double distance_value(DistanceKind kind, const ImageTensor& clean, const ImageTensor& candidate,
                      const PerceptualMetric* metric);

AttackResult cw_attack(const Classifier& c, const PerceptualMetric* metric, const LabeledImage& x,
                       DistanceKind kind, const AttackConfig& cfg);

// Random resize-and-pad, kept as a linear map so gradients can be pulled back.
struct DiversityTransform {
  int side_h = 0;
  int side_w = 0;
  int resized = 0;  // 0 means identity
  int top = 0;
  int left = 0;

  bool identity() const { return resized == 0; }
  Tensor3 apply(const Tensor3& x) const;
  Tensor3 adjoint(const Tensor3& grad) const;
};

DiversityTransform sample_diversity(const Shape3& shape, double p, std::mt19937_64& rng);
ImageTensor input_diversity(const ImageTensor& x, double p, std::mt19937_64& rng);

// lambda = 0 gives plain MI-FGSM; metric may then be null.
AttackResult mifgsm_attack(const Classifier& c, const PerceptualMetric* metric, const LabeledImage& x,
                           const AttackConfig& cfg);

inline constexpr int kHsjaInitTrials = 1000;
inline constexpr double kHsjaBoundaryTolerance = 1e-3;

// Decision-based: uses predict() only. With use_perceptual the retained
// iterate, the progress metric and the sampling radius follow D instead of l2.
AttackResult hsja_attack(const Classifier& c, const PerceptualMetric* metric, const LabeledImage& x,
                         bool use_perceptual, const AttackConfig& cfg);

// Fills the bookkeeping fields of a result from its adversarial image.
void measure(AttackResult& r, const ImageTensor& clean, const PerceptualMetric* metric);

}  // namespace demiguise::attacks
