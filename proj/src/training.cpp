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

#include "demiguise/training.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <cmath>
#include <numeric>
#include <random>

#include "demiguise/architectures.hpp"
#include "demiguise/archive.hpp"
#include "demiguise/dataset.hpp"
#include "demiguise/errors.hpp"

namespace demiguise::training {

classifiers::Normalization channel_statistics(std::span<const imaging::LabeledImage> samples) {
  if (samples.empty()) throw PreconditionError("channel statistics of an empty set");
  const int channels = samples.front().image.channels();
  std::vector<double> sum(channels, 0.0), sq(channels, 0.0);
  double count = 0.0;
  for (const auto& s : samples) {
    const auto& t = s.image.tensor();
    const std::size_t plane = static_cast<std::size_t>(t.height()) * t.width();
    for (int c = 0; c < channels; ++c) {
      for (std::size_t i = 0; i < plane; ++i) {
        const double v = t[c * plane + i];
        sum[c] += v;
        sq[c] += v * v;
      }
    }
    count += static_cast<double>(plane);
  }
  classifiers::Normalization n;
  for (int c = 0; c < channels; ++c) {
    const double mean = sum[c] / count;
    n.mean.push_back(mean);
    n.stddev.push_back(std::sqrt(std::max(sq[c] / count - mean * mean, 1e-12)));
  }
  return n;
}

void initialize(nn::Network& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (nn::Parameter* p : net.parameters()) {
    if (p->shape.size() == 1) {
      std::fill(p->values.begin(), p->values.end(), 0.0);
      continue;
    }
    std::size_t fan_in = 1;
    for (std::size_t i = 1; i < p->shape.size(); ++i) fan_in *= static_cast<std::size_t>(p->shape[i]);
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (double& v : p->values) v = dist(rng);
  }
}

namespace {

struct AdamState {
  std::vector<std::vector<double>> m, v;
  long step = 0;
};

double evaluate(const classifiers::Classifier& c, std::span<const imaging::LabeledImage> samples) {
  return classifiers::accuracy(c, samples);
}

}  // namespace

TrainResult train_classifier(nn::Network net, std::span<const imaging::LabeledImage> train,
                             std::span<const imaging::LabeledImage> test, const TrainOptions& options,
                             std::ostream* log) {
  if (train.empty()) throw PreconditionError("training set is empty");
  const classifiers::Normalization norm = channel_statistics(train);
  initialize(net, options.seed);
  std::vector<Tensor3> inputs;
  inputs.reserve(train.size());
  for (const auto& s : train) inputs.push_back(norm.apply(s.image.tensor()));

  AdamState adam{net.make_gradient_buffers(), net.make_gradient_buffers(), 0};
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(options.seed ^ 0x5eedULL);
  double lr = options.learning_rate;

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(options.batch_size));
      auto grads = net.make_gradient_buffers();
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t idx = order[k];
        nn::Trace trace;
        const Tensor3 z = net.forward(inputs[idx], trace);
        const int label = train[idx].label;
        loss_sum += classifiers::cross_entropy(z.values(), label);
        correct += classifiers::argmax(z.values()) == label ? 1 : 0;
        auto p = classifiers::softmax(z.values());
        p[label] -= 1.0;
        for (double& v : p) v /= static_cast<double>(end - start);
        net.backward(trace, Tensor3(z.shape(), std::move(p)), grads);
      }
      ++adam.step;
      const double c1 = 1.0 - std::pow(beta1, adam.step);
      const double c2 = 1.0 - std::pow(beta2, adam.step);
      auto params = net.parameters();
      for (std::size_t t = 0; t < params.size(); ++t) {
        auto& values = params[t]->values;
        for (std::size_t i = 0; i < values.size(); ++i) {
          const double g = grads[t][i];
          adam.m[t][i] = beta1 * adam.m[t][i] + (1 - beta1) * g;
          adam.v[t][i] = beta2 * adam.v[t][i] + (1 - beta2) * g * g;
          values[i] -= lr * (adam.m[t][i] / c1) / (std::sqrt(adam.v[t][i] / c2) + eps);
        }
      }
    }
    lr *= options.lr_decay;
    if (log != nullptr) {
      *log << "  epoch " << epoch + 1 << "/" << options.epochs << " loss "
           << loss_sum / static_cast<double>(train.size()) << " train acc "
           << static_cast<double>(correct) / static_cast<double>(train.size()) << std::endl;
    }
  }

  TrainResult result{net, norm, 0.0, 0.0};
  const classifiers::Classifier handle("training", std::make_shared<classifiers::NetworkBackend>(net), norm);
  result.train_accuracy = evaluate(handle, train);
  if (!test.empty()) result.test_accuracy = evaluate(handle, test);
  return result;
}

void train_zoo(const std::filesystem::path& dir, const ZooOptions& options, std::ostream* log) {
  std::filesystem::create_directories(dir);
  const auto train = dataset::generate_split(options.data_seed, "train", options.train_count);
  const auto test = dataset::generate_split(options.data_seed, "test", options.test_count);
  nlohmann::ordered_json manifest;
  manifest["schema"] = "demiguise-zoo/1";
  manifest["num_classes"] = dataset::kNumClasses;
  manifest["input_side"] = dataset::kDeskCrop;
  manifest["data_seed"] = options.data_seed;
  manifest["models"] = nlohmann::ordered_json::array();

  std::vector<std::pair<std::string, std::string>> jobs;
  jobs.emplace_back(options.perceptual, "perceptual");
  for (const auto& c : options.classifiers) jobs.emplace_back(c, "classifier");

  std::uint64_t model_seed = options.train.seed;
  for (const auto& [tag, role] : jobs) {
    if (log != nullptr) *log << "training " << tag << " (" << role << ")" << std::endl;
    TrainOptions opts = options.train;
    opts.seed = model_seed++;
    TrainResult r = train_classifier(build_architecture(tag, dataset::kNumClasses).network, train, test, opts, log);
    // Archives store f32; score the network exactly as it will be reloaded.
    for (nn::Parameter* p : r.network.parameters()) {
      for (double& v : p->values) v = static_cast<double>(static_cast<float>(v));
    }
    const classifiers::Classifier reloaded(tag, std::make_shared<classifiers::NetworkBackend>(r.network),
                                           r.normalization);
    r.test_accuracy = classifiers::accuracy(reloaded, test);
    if (log != nullptr) *log << "  test accuracy " << r.test_accuracy << std::endl;
    const auto params = r.network.parameters();
    nn::save_archive(dir / (tag + ".manifest"), params);
    nlohmann::ordered_json m;
    m["name"] = tag;
    m["architecture"] = tag;
    m["role"] = role;
    m["archive"] = tag + ".manifest";
    m["test_accuracy"] = r.test_accuracy;
    m["mean"] = r.normalization.mean;
    m["std"] = r.normalization.stddev;
    manifest["models"].push_back(m);
  }
  std::ofstream out(dir / "zoo.json");
  if (!out) throw IoError("cannot write " + (dir / "zoo.json").string());
  out << manifest.dump(2) << '\n';
}

}  // namespace demiguise::training
