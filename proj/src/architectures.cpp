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

#include "demiguise/architectures.hpp"

#include <memory>

#include "demiguise/errors.hpp"

namespace demiguise {
namespace {

using nn::AvgPool2;
using nn::Conv2d;
using nn::DepthwiseConv2d;
using nn::GlobalAvgPool;
using nn::Linear;
using nn::MaxPool2;
using nn::ReLU;

Architecture percept_vgg(int num_classes, Shape3 input) {
  Architecture a{"percept_vgg", nn::Network(input), {}};
  auto& n = a.network;
  auto tap = [&] { a.taps.push_back(n.num_layers() - 1); };
  n.emplace<Conv2d>("block1.conv", 3, 16, 3, 1, 1);
  n.emplace<ReLU>();
  tap();
  n.emplace<AvgPool2>();
  n.emplace<Conv2d>("block2.conv", 16, 32, 3, 1, 1);
  n.emplace<ReLU>();
  tap();
  n.emplace<AvgPool2>();
  n.emplace<Conv2d>("block3.conv", 32, 32, 3, 1, 1);
  n.emplace<ReLU>();
  tap();
  n.emplace<AvgPool2>();
  n.emplace<Conv2d>("block4.conv", 32, 64, 3, 1, 1);
  n.emplace<ReLU>();
  tap();
  n.emplace<Conv2d>("block5.conv", 64, 64, 3, 1, 1);
  n.emplace<ReLU>();
  tap();
  n.emplace<GlobalAvgPool>();
  n.emplace<Linear>("head.fc", 64, num_classes);
  return a;
}

Architecture vgg_small(int num_classes, Shape3 input) {
  Architecture a{"vgg_small", nn::Network(input), {}};
  auto& n = a.network;
  n.emplace<Conv2d>("conv1", 3, 16, 3, 1, 1);
  n.emplace<ReLU>();
  n.emplace<MaxPool2>();
  n.emplace<Conv2d>("conv2", 16, 32, 3, 1, 1);
  n.emplace<ReLU>();
  n.emplace<MaxPool2>();
  n.emplace<Conv2d>("conv3", 32, 64, 3, 1, 1);
  n.emplace<ReLU>();
  n.emplace<MaxPool2>();
  n.emplace<Conv2d>("conv4", 64, 64, 3, 1, 1);
  n.emplace<ReLU>();
  n.emplace<GlobalAvgPool>();
  n.emplace<Linear>("fc", 64, num_classes);
  return a;
}

nn::Network basic_block(const std::string& name, Shape3 shape) {
  nn::Network body(shape);
  body.emplace<Conv2d>(name + ".conv1", shape.channels, shape.channels, 3, 1, 1);
  body.emplace<ReLU>();
  body.emplace<Conv2d>(name + ".conv2", shape.channels, shape.channels, 3, 1, 1);
  return body;
}

Architecture resnet_small(int num_classes, Shape3 input) {
  Architecture a{"resnet_small", nn::Network(input), {}};
  auto& n = a.network;
  n.emplace<Conv2d>("stem", 3, 16, 3, 2, 1);
  n.emplace<ReLU>();
  n.emplace<nn::Residual>(basic_block("stage1.block", n.output_shape()));
  n.emplace<ReLU>();
  n.emplace<Conv2d>("stage2.down", 16, 32, 3, 2, 1);
  n.emplace<ReLU>();
  n.emplace<nn::Residual>(basic_block("stage2.block", n.output_shape()));
  n.emplace<ReLU>();
  n.emplace<Conv2d>("stage3.down", 32, 64, 3, 2, 1);
  n.emplace<ReLU>();
  n.emplace<GlobalAvgPool>();
  n.emplace<Linear>("fc", 64, num_classes);
  return a;
}

void separable(nn::Network& n, const std::string& name, int in, int out, int stride) {
  n.emplace<DepthwiseConv2d>(name + ".dw", in, 3, stride, 1);
  n.emplace<ReLU>();
  n.emplace<Conv2d>(name + ".pw", in, out, 1, 1, 0);
  n.emplace<ReLU>();
}

Architecture mobile_small(int num_classes, Shape3 input) {
  Architecture a{"mobile_small", nn::Network(input), {}};
  auto& n = a.network;
  n.emplace<Conv2d>("stem", 3, 16, 3, 1, 1);
  n.emplace<ReLU>();
  separable(n, "sep1", 16, 32, 2);
  separable(n, "sep2", 32, 32, 1);
  separable(n, "sep3", 32, 64, 2);
  separable(n, "sep4", 64, 64, 2);
  n.emplace<GlobalAvgPool>();
  n.emplace<Linear>("fc", 64, num_classes);
  return a;
}

}  // namespace

Architecture build_architecture(const std::string& tag, int num_classes, int side) {
  const Shape3 input{3, side, side};
  if (tag == "percept_vgg") return percept_vgg(num_classes, input);
  if (tag == "vgg_small") return vgg_small(num_classes, input);
  if (tag == "resnet_small") return resnet_small(num_classes, input);
  if (tag == "mobile_small") return mobile_small(num_classes, input);
  throw ConfigError("unknown architecture tag '" + tag + "'");
}

std::vector<std::string> architecture_tags() { return {"percept_vgg", "vgg_small", "resnet_small", "mobile_small"}; }

}  // namespace demiguise
