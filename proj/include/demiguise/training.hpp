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
#include <filesystem>
#include <ostream>
#include <span>
#include <string>

#include "demiguise/classifiers.hpp"
#include "demiguise/nn.hpp"

namespace demiguise::training {

struct TrainOptions {
  int epochs = 10;
  int batch_size = 32;
  double learning_rate = 3e-3;
  double lr_decay = 0.8;  // multiplicative, per epoch
  std::uint64_t seed = 1;
};

struct TrainResult {
  nn::Network network;
  classifiers::Normalization normalization;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

// Per-channel mean and standard deviation over a sample set.
classifiers::Normalization channel_statistics(std::span<const imaging::LabeledImage> samples);

// He-normal weights, zero biases.
void initialize(nn::Network& net, std::uint64_t seed);

// Minibatch Adam on softmax cross-entropy.
TrainResult train_classifier(nn::Network net, std::span<const imaging::LabeledImage> train,
                             std::span<const imaging::LabeledImage> test, const TrainOptions& options,
                             std::ostream* log = nullptr);

struct ZooOptions {
  std::uint64_t data_seed = 20210819;
  int train_count = 12000;
  int test_count = 1000;
  TrainOptions train;
  std::vector<std::string> classifiers = {"vgg_small", "resnet_small", "mobile_small"};
  std::string perceptual = "percept_vgg";
};

// Trains the perceptual net and every classifier on the desk dataset, then
// writes <dir>/<name>.manifest + .bin per model and <dir>/zoo.json.
void train_zoo(const std::filesystem::path& dir, const ZooOptions& options, std::ostream* log = nullptr);

}  // namespace demiguise::training
