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

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "demiguise/imaging.hpp"
#include "demiguise/nn.hpp"
#include "demiguise/perceptual.hpp"

namespace demiguise::classifiers {

using imaging::ImageTensor;

enum class AccessTier { white_box, score_only, decision_only };

const char* tier_name(AccessTier tier);

using Logits = std::vector<double>;

struct Normalization {
  std::vector<double> mean;
  std::vector<double> stddev;

  static Normalization identity(int channels);
  Tensor3 apply(const Tensor3& x) const;
};

// The unnormalised model core. Implementations must be reentrant.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual int num_classes() const = 0;
  virtual Shape3 input_shape() const = 0;
  virtual Logits logits(const Tensor3& normalized) const = 0;
  // Returns logits and d(sum_i upstream_i * z_i)/d(normalized input), where
  // upstream is computed from the logits by `upstream_of`.
  virtual std::pair<Logits, Tensor3> logits_and_gradient(
      const Tensor3& normalized, const std::function<std::vector<double>(const Logits&)>& upstream_of) const = 0;
};

class NetworkBackend final : public Backend {
 public:
  explicit NetworkBackend(nn::Network net);

  int num_classes() const override;
  Shape3 input_shape() const override { return net_.input_shape(); }
  Logits logits(const Tensor3& normalized) const override;
  std::pair<Logits, Tensor3> logits_and_gradient(
      const Tensor3& normalized,
      const std::function<std::vector<double>(const Logits&)>& upstream_of) const override;
  const nn::Network& network() const { return net_; }

 private:
  nn::Network net_;
};

// Opaque classifier handle. Copies share weights and the query counter;
// with_tier() makes a fresh handle with its own counter.
class Classifier {
 public:
  Classifier(std::string name, std::shared_ptr<const Backend> backend, Normalization norm,
             AccessTier tier = AccessTier::white_box);

  const std::string& name() const { return name_; }
  int num_classes() const { return backend_->num_classes(); }
  Shape3 input_shape() const { return backend_->input_shape(); }
  AccessTier tier() const { return tier_; }
  const Normalization& normalization() const { return norm_; }
  const Backend& backend() const { return *backend_; }

  Classifier with_tier(AccessTier tier) const;

  // Every method below is one forward evaluation and bumps the counter by 1.
  Logits logits(const ImageTensor& x) const;
  int predict(const ImageTensor& x) const;
  // Softmax cross-entropy gradient with respect to the pixel-space input.
  Tensor3 loss_gradient(const ImageTensor& x, int label) const;
  // Logits plus the pixel-space gradient of sum_i upstream_i * z_i.
  std::pair<Logits, Tensor3> logits_and_gradient(
      const ImageTensor& x, const std::function<std::vector<double>(const Logits&)>& upstream_of) const;

  std::uint64_t queries() const { return counter_->load(); }
  void reset_queries() const { counter_->store(0); }

 private:
  void check_input(const ImageTensor& x) const;
  void require_tier(AccessTier minimum, const char* op) const;

  std::string name_;
  std::shared_ptr<const Backend> backend_;
  Normalization norm_;
  AccessTier tier_;
  std::shared_ptr<std::atomic<std::uint64_t>> counter_;
};

// argmax with ties going to the lowest index.
int argmax(std::span<const double> values);
std::vector<double> softmax(std::span<const double> logits);
double cross_entropy(std::span<const double> logits, int label);

struct ZooEntry {
  std::string name;
  std::string architecture;
  std::filesystem::path archive;
  std::string role;  // "classifier" or "perceptual"
  double test_accuracy = 0.0;
  Normalization normalization;
};

struct Zoo {
  int num_classes = 0;
  std::vector<ZooEntry> entries;
  std::vector<Classifier> classifiers;
  std::optional<perceptual::PerceptualNet> perceptual;

  const Classifier& classifier(const std::string& name) const;
};

// Reads the JSON zoo manifest; archive paths resolve relative to it.
Zoo load_zoo(const std::filesystem::path& manifest_path);

Classifier load_classifier(const ZooEntry& entry, int num_classes);

// Fraction of `samples` whose prediction equals their label.
double accuracy(const Classifier& c, std::span<const imaging::LabeledImage> samples);

}  // namespace demiguise::classifiers
