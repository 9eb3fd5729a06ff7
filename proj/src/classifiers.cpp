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

#include "demiguise/classifiers.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "demiguise/architectures.hpp"
#include "demiguise/archive.hpp"
#include "demiguise/errors.hpp"

namespace demiguise::classifiers {

const char* tier_name(AccessTier tier) {
  switch (tier) {
    case AccessTier::white_box:
      return "white_box";
    case AccessTier::score_only:
      return "score_only";
    case AccessTier::decision_only:
      return "decision_only";
  }
  return "unknown";
}

Normalization Normalization::identity(int channels) {
  return {std::vector<double>(channels, 0.0), std::vector<double>(channels, 1.0)};
}

Tensor3 Normalization::apply(const Tensor3& x) const {
  if (static_cast<std::size_t>(x.channels()) != mean.size()) {
    throw ShapeError("normalization has " + std::to_string(mean.size()) + " channels, input " + x.shape().str());
  }
  Tensor3 out = x;
  const std::size_t plane = static_cast<std::size_t>(x.height()) * x.width();
  for (int c = 0; c < x.channels(); ++c) {
    for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] = (x[c * plane + i] - mean[c]) / stddev[c];
  }
  return out;
}

// ------------------------------------------------------------ NetworkBackend

NetworkBackend::NetworkBackend(nn::Network net) : net_(std::move(net)) {
  const Shape3 out = net_.output_shape();
  if (out.height != 1 || out.width != 1 || out.channels < 2) {
    throw ShapeError("classifier network must end in >= 2 logits, ends in " + out.str());
  }
}

int NetworkBackend::num_classes() const { return net_.output_shape().channels; }

Logits NetworkBackend::logits(const Tensor3& normalized) const {
  const Tensor3 z = net_.forward(normalized);
  return {z.values().begin(), z.values().end()};
}

std::pair<Logits, Tensor3> NetworkBackend::logits_and_gradient(
    const Tensor3& normalized, const std::function<std::vector<double>(const Logits&)>& upstream_of) const {
  nn::Trace trace;
  const Tensor3 z = net_.forward(normalized, trace);
  Logits logits(z.values().begin(), z.values().end());
  std::vector<double> upstream = upstream_of(logits);
  if (upstream.size() != logits.size()) throw ShapeError("upstream gradient length must equal logits length");
  Tensor3 g = net_.backward(trace, Tensor3(z.shape(), std::move(upstream)));
  return {std::move(logits), std::move(g)};
}

// ------------------------------------------------------------ Classifier

Classifier::Classifier(std::string name, std::shared_ptr<const Backend> backend, Normalization norm,
                       AccessTier tier)
    : name_(std::move(name)),
      backend_(std::move(backend)),
      norm_(std::move(norm)),
      tier_(tier),
      counter_(std::make_shared<std::atomic<std::uint64_t>>(0)) {
  if (backend_->num_classes() < 2) throw PreconditionError("classifier needs at least two classes");
  if (norm_.mean.size() != static_cast<std::size_t>(backend_->input_shape().channels) ||
      norm_.stddev.size() != norm_.mean.size()) {
    throw ShapeError("normalization constants do not match input channels for " + name_);
  }
  for (double s : norm_.stddev) {
    if (!(s > 0.0)) throw PreconditionError("normalization stddev must be positive");
  }
}

Classifier Classifier::with_tier(AccessTier tier) const { return Classifier(name_, backend_, norm_, tier); }

void Classifier::check_input(const ImageTensor& x) const {
  require_same_shape(x.shape(), backend_->input_shape(), ("classifier " + name_ + " input").c_str());
}

void Classifier::require_tier(AccessTier minimum, const char* op) const {
  const bool ok = minimum == AccessTier::score_only ? tier_ != AccessTier::decision_only
                                                     : tier_ == AccessTier::white_box;
  if (!ok) {
    throw TierViolation(std::string(op) + " is not available on " + tier_name(tier_) + " handle " + name_);
  }
}

Logits Classifier::logits(const ImageTensor& x) const {
  require_tier(AccessTier::score_only, "logits");
  check_input(x);
  counter_->fetch_add(1);
  return backend_->logits(norm_.apply(x.tensor()));
}

int Classifier::predict(const ImageTensor& x) const {
  check_input(x);
  counter_->fetch_add(1);
  return argmax(backend_->logits(norm_.apply(x.tensor())));
}

std::pair<Logits, Tensor3> Classifier::logits_and_gradient(
    const ImageTensor& x, const std::function<std::vector<double>(const Logits&)>& upstream_of) const {
  require_tier(AccessTier::white_box, "gradient access");
  check_input(x);
  counter_->fetch_add(1);
  auto [z, g] = backend_->logits_and_gradient(norm_.apply(x.tensor()), upstream_of);
  // chain rule through (x - mean) / std
  const std::size_t plane = static_cast<std::size_t>(g.height()) * g.width();
  for (int c = 0; c < g.channels(); ++c) {
    for (std::size_t i = 0; i < plane; ++i) g[c * plane + i] /= norm_.stddev[c];
  }
  return {std::move(z), std::move(g)};
}

Tensor3 Classifier::loss_gradient(const ImageTensor& x, int label) const {
  require_tier(AccessTier::white_box, "loss_gradient");
  if (label < 0 || label >= num_classes()) throw PreconditionError("label out of range");
  return logits_and_gradient(x,
                             [label](const Logits& z) {
                               auto p = softmax(z);
                               p[label] -= 1.0;
                               return p;
                             })
      .second;
}

// ------------------------------------------------------------ helpers

int argmax(std::span<const double> values) {
  if (values.empty()) throw PreconditionError("argmax of empty vector");
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = static_cast<int>(i);
  }
  return best;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    s += p[i];
  }
  for (double& v : p) v /= s;
  return p;
}

double cross_entropy(std::span<const double> logits, int label) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double z : logits) s += std::exp(z - m);
  return std::log(s) + m - logits[label];
}

// ------------------------------------------------------------ zoo

const Classifier& Zoo::classifier(const std::string& name) const {
  for (const auto& c : classifiers) {
    if (c.name() == name) return c;
  }
  throw ConfigError("model '" + name + "' is not in the zoo");
}

Classifier load_classifier(const ZooEntry& entry, int num_classes) {
  Architecture arch = build_architecture(entry.architecture, num_classes);
  nn::load_parameters(arch.network, entry.archive);
  return Classifier(entry.name, std::make_shared<NetworkBackend>(std::move(arch.network)), entry.normalization);
}

Zoo load_zoo(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open zoo manifest " + manifest_path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("zoo manifest " + manifest_path.string() + " is not valid JSON: " + e.what());
  }
  Zoo zoo;
  try {
    if (j.at("schema").get<std::string>() != "demiguise-zoo/1") {
      throw SchemaError("unsupported zoo schema in " + manifest_path.string());
    }
    zoo.num_classes = j.at("num_classes").get<int>();
    const auto base = manifest_path.parent_path();
    for (const auto& m : j.at("models")) {
      ZooEntry e;
      e.name = m.at("name").get<std::string>();
      e.architecture = m.at("architecture").get<std::string>();
      e.archive = base / m.at("archive").get<std::string>();
      e.role = m.value("role", std::string("classifier"));
      e.test_accuracy = m.at("test_accuracy").get<double>();
      e.normalization.mean = m.at("mean").get<std::vector<double>>();
      e.normalization.stddev = m.at("std").get<std::vector<double>>();
      if (!std::filesystem::exists(e.archive)) {
        throw IoError("zoo model " + e.name + " references missing archive " + e.archive.string());
      }
      zoo.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed zoo manifest " + manifest_path.string() + ": " + e.what());
  }
  for (const auto& e : zoo.entries) {
    if (e.role == "perceptual") {
      zoo.perceptual = perceptual::PerceptualNet::load(e.archive, e.normalization.mean, e.normalization.stddev);
    } else if (e.role == "classifier") {
      zoo.classifiers.push_back(load_classifier(e, zoo.num_classes));
    } else {
      throw IoError("zoo model " + e.name + " has unknown role '" + e.role + "'");
    }
  }
  return zoo;
}

double accuracy(const Classifier& c, std::span<const imaging::LabeledImage> samples) {
  if (samples.empty()) throw PreconditionError("accuracy of an empty sample set");
  std::size_t correct = 0;
  for (const auto& s : samples) correct += c.predict(s.image) == s.label ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

}  // namespace demiguise::classifiers
