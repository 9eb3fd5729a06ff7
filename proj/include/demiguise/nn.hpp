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

// Minimal CPU layer stack with hand-written backward passes. Layers are
// immutable during forward/backward; per-call state lives in a Trace so one
// network can serve any number of concurrent callers.

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "demiguise/tensor.hpp"

namespace demiguise::nn {

struct Parameter {
  std::string name;
  std::vector<int> shape;
  std::vector<double> values;

  std::size_t numel() const { return values.size(); }
};

struct Trace;

struct LayerCache {
  std::vector<double> scratch;
  std::unique_ptr<Trace> inner;
};

// Everything a backward pass needs from a forward pass.
struct Trace {
  Tensor3 input;
  std::vector<Tensor3> outputs;
  std::vector<LayerCache> caches;
};

// Parameter-gradient accumulators, one vector per parameter, aligned with
// Layer::parameters(). An empty span means "input gradient only".
using ParamGrads = std::span<std::vector<double>>;

class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string kind() const = 0;
  virtual Shape3 output_shape(const Shape3& in) const = 0;
  virtual void forward(const Tensor3& in, Tensor3& out, LayerCache& cache) const = 0;
  // Accumulates (+=) into `grads` when non-empty; writes grad_in when non-null.
  virtual void backward(const Tensor3& in, const Tensor3& out, const LayerCache& cache,
                        const Tensor3& grad_out, Tensor3* grad_in, ParamGrads grads) const = 0;
  virtual std::vector<Parameter*> parameters() { return {}; }
  virtual std::unique_ptr<Layer> clone() const = 0;

  std::vector<const Parameter*> parameters() const;
};

class Conv2d final : public Layer {
 public:
  Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride, int padding);

  std::string kind() const override { return "conv2d"; }
  Shape3 output_shape(const Shape3& in) const override;
  void forward(const Tensor3& in, Tensor3& out, LayerCache& cache) const override;
  void backward(const Tensor3& in, const Tensor3& out, const LayerCache& cache, const Tensor3& grad_out,
                Tensor3* grad_in, ParamGrads grads) const override;
  std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }

 private:
  int in_channels_, out_channels_, kernel_, stride_, padding_;
  Parameter weight_;
  Parameter bias_;
};

// One k x k filter per channel (no cross-channel mixing).
class DepthwiseConv2d final : public Layer {
 public:
  DepthwiseConv2d(std::string name, int channels, int kernel, int stride, int padding);

  std::string kind() const override { return "depthwise_conv2d"; }
  Shape3 output_shape(const Shape3& in) const override;
  void forward(const Tensor3& in, Tensor3& out, LayerCache& cache) const override;
  void backward(const Tensor3& in, const Tensor3& out, const LayerCache& cache, const Tensor3& grad_out,
                Tensor3* grad_in, ParamGrads grads) const override;
  std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<DepthwiseConv2d>(*this); }

 private:
  int channels_, kernel_, stride_, padding_;
  Parameter weight_;
  Parameter bias_;
};

// Fully connected; the input is flattened, the output has shape (out, 1, 1).
class Linear final : public Layer {
 public:
  Linear(std::string name, int in_features, int out_features);

  std::string kind() const override { return "linear"; }
  Shape3 output_shape(const Shape3& in) const override;
  void forward(const Tensor3& in, Tensor3& out, LayerCache& cache) const override;
  void backward(const Tensor3& in, const Tensor3& out, const LayerCache& cache, const Tensor3& grad_out,
                Tensor3* grad_in, ParamGrads grads) const override;
  std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Linear>(*this); }

 private:
  int in_features_, out_features_;
  Parameter weight_;
  Parameter bias_;
};

class ReLU final : public Layer {
 public:
  std::string kind() const override { return "relu"; }
  Shape3 output_shape(const Shape3& in) const override { return in; }
  void forward(const Tensor3& in, Tensor3& out, LayerCache& cache) const override;
  void backward(const Tensor3& in, const Tensor3& out, const LayerCache& cache, const Tensor3& grad_out,
                Tensor3* grad_in, ParamGrads grads) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ReLU>(*this); }
};

// 2x2 window, stride 2. Ties resolve to the first maximum in scan order.
class MaxPool2 final : public Layer {
 public:
  std::string kind() const override { return "maxpool2"; }
  Shape3 output_shape(const Shape3& in) const override;
  void forward(const Tensor3& in, Tensor3& out, LayerCache& cache) const override;
  void backward(const Tensor3& in, const Tensor3& out, const LayerCache& cache, const Tensor3& grad_out,
                Tensor3* grad_in, ParamGrads grads) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2>(*this); }
};

class AvgPool2 final : public Layer {
 public:
  std::string kind() const override { return "avgpool2"; }
  Shape3 output_shape(const Shape3& in) const override;
  void forward(const Tensor3& in, Tensor3& out, LayerCache& cache) const override;
  void backward(const Tensor3& in, const Tensor3& out, const LayerCache& cache, const Tensor3& grad_out,
                Tensor3* grad_in, ParamGrads grads) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<AvgPool2>(*this); }
};

class GlobalAvgPool final : public Layer {
 public:
  std::string kind() const override { return "global_avgpool"; }
  Shape3 output_shape(const Shape3& in) const override { return {in.channels, 1, 1}; }
  void forward(const Tensor3& in, Tensor3& out, LayerCache& cache) const override;
  void backward(const Tensor3& in, const Tensor3& out, const LayerCache& cache, const Tensor3& grad_out,
                Tensor3* grad_in, ParamGrads grads) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<GlobalAvgPool>(*this); }
};

// Fixed per-channel affine map out = (in - shift) / scale; used for input
// normalisation. Carries no trainable parameters.
class ChannelAffine final : public Layer {
 public:
  ChannelAffine(std::vector<double> shift, std::vector<double> scale);

  std::string kind() const override { return "channel_affine"; }
  Shape3 output_shape(const Shape3& in) const override;
  void forward(const Tensor3& in, Tensor3& out, LayerCache& cache) const override;
  void backward(const Tensor3& in, const Tensor3& out, const LayerCache& cache, const Tensor3& grad_out,
                Tensor3* grad_in, ParamGrads grads) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ChannelAffine>(*this); }

 private:
  std::vector<double> shift_;
  std::vector<double> scale_;
};

class Network;

// out = in + body(in); the body must preserve shape.
class Residual final : public Layer {
 public:
  explicit Residual(Network body);
  Residual(const Residual& other);

  std::string kind() const override { return "residual"; }
  Shape3 output_shape(const Shape3& in) const override { return in; }
  void forward(const Tensor3& in, Tensor3& out, LayerCache& cache) const override;
  void backward(const Tensor3& in, const Tensor3& out, const LayerCache& cache, const Tensor3& grad_out,
                Tensor3* grad_in, ParamGrads grads) const override;
  std::vector<Parameter*> parameters() override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Residual>(*this); }

 private:
  std::unique_ptr<Network> body_;
};

// A straight chain of layers with fixed input shape.
class Network {
 public:
  explicit Network(Shape3 input_shape);
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  void add(std::unique_ptr<Layer> layer);
  template <typename L, typename... Args>
  void emplace(Args&&... args) {
    add(std::make_unique<L>(std::forward<Args>(args)...));
  }

  const Shape3& input_shape() const { return input_shape_; }
  Shape3 output_shape() const;
  const Shape3& layer_output_shape(std::size_t i) const { return shapes_.at(i); }
  std::size_t num_layers() const { return layers_.size(); }
  const Layer& layer(std::size_t i) const { return *layers_.at(i); }

  Tensor3 forward(const Tensor3& x) const;
  Tensor3 forward(const Tensor3& x, Trace& trace) const;

  // grads_at[i] is dL/d(output of layer i) or nullptr; contributions are
  // summed while walking backwards. Returns dL/dx.
  Tensor3 backward(const Trace& trace, std::span<const Tensor3* const> grads_at, ParamGrads grads = {}) const;
  // Convenience: gradient flowing in only at the final output.
  Tensor3 backward(const Trace& trace, const Tensor3& grad_output, ParamGrads grads = {}) const;

  // Copy of the first `count` layers.
  Network prefix(std::size_t count) const;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t parameter_tensor_count() const;
  std::size_t parameter_count() const;
  // Zero-initialised accumulators matching parameters().
  std::vector<std::vector<double>> make_gradient_buffers() const;

 private:
  Shape3 input_shape_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<Shape3> shapes_;
  std::vector<std::size_t> param_offsets_;
};

}  // namespace demiguise::nn
