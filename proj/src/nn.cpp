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

#include "demiguise/nn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cstring>

#include "demiguise/errors.hpp"

namespace demiguise::nn {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

int conv_out_dim(int in, int kernel, int stride, int padding) {
  return (in + 2 * padding - kernel) / stride + 1;
}

Parameter make_param(std::string name, std::vector<int> shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return Parameter{std::move(name), std::move(shape), std::vector<double>(n, 0.0)};
}

// Unfolds `in` into a (C*k*k) x (Ho*Wo) row-major matrix.
void im2col(const Tensor3& in, int kernel, int stride, int padding, int out_h, int out_w,
            std::vector<double>& col) {
  const int channels = in.channels();
  const int patches = out_h * out_w;
  col.assign(static_cast<std::size_t>(channels) * kernel * kernel * patches, 0.0);
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        double* row = col.data() + static_cast<std::size_t>((c * kernel + ky) * kernel + kx) * patches;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - padding + ky;
          if (iy < 0 || iy >= in.height()) continue;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - padding + kx;
            if (ix < 0 || ix >= in.width()) continue;
            row[oy * out_w + ox] = in.at(c, iy, ix);
          }
        }
      }
    }
  }
}

void col2im(const double* col, int kernel, int stride, int padding, int out_h, int out_w, Tensor3& grad_in) {
  const int patches = out_h * out_w;
  for (int c = 0; c < grad_in.channels(); ++c) {
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const double* row = col + static_cast<std::size_t>((c * kernel + ky) * kernel + kx) * patches;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - padding + ky;
          if (iy < 0 || iy >= grad_in.height()) continue;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - padding + kx;
            if (ix < 0 || ix >= grad_in.width()) continue;
            grad_in.at(c, iy, ix) += row[oy * out_w + ox];
          }
        }
      }
    }
  }
}

}  // namespace

std::vector<const Parameter*> Layer::parameters() const {
  auto params = const_cast<Layer*>(this)->parameters();
  return {params.begin(), params.end()};
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride, int padding)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      padding_(padding),
      weight_(make_param(name + ".weight", {out_channels, in_channels, kernel, kernel})),
      bias_(make_param(name + ".bias", {out_channels})) {}

Shape3 Conv2d::output_shape(const Shape3& in) const {
  if (in.channels != in_channels_) {
    throw ShapeError("conv2d " + weight_.name + " expects " + std::to_string(in_channels_) +
                     " input channels, got " + std::to_string(in.channels));
  }
  return {out_channels_, conv_out_dim(in.height, kernel_, stride_, padding_),
          conv_out_dim(in.width, kernel_, stride_, padding_)};
}

void Conv2d::forward(const Tensor3& in, Tensor3& out, LayerCache& cache) const {
  const Shape3 os = output_shape(in.shape());
  const int patches = os.height * os.width;
  const int k = in_channels_ * kernel_ * kernel_;
  im2col(in, kernel_, stride_, padding_, os.height, os.width, cache.scratch);
  out = Tensor3(os);
  ConstMatrixMap w(weight_.values.data(), out_channels_, k);
  ConstMatrixMap col(cache.scratch.data(), k, patches);
  MatrixMap o(out.data(), out_channels_, patches);
  o.noalias() = w * col;
  for (int c = 0; c < out_channels_; ++c) o.row(c).array() += bias_.values[c];
}

void Conv2d::backward(const Tensor3& in, const Tensor3& out, const LayerCache& cache, const Tensor3& grad_out,
                      Tensor3* grad_in, ParamGrads grads) const {
  const int patches = out.height() * out.width();
  const int k = in_channels_ * kernel_ * kernel_;
  ConstMatrixMap g(grad_out.data(), out_channels_, patches);
  ConstMatrixMap col(cache.scratch.data(), k, patches);
  if (!grads.empty()) {
    MatrixMap gw(grads[0].data(), out_channels_, k);
    gw.noalias() += g * col.transpose();
    for (int c = 0; c < out_channels_; ++c) grads[1][c] += g.row(c).sum();
  }
  if (grad_in != nullptr) {
    ConstMatrixMap w(weight_.values.data(), out_channels_, k);
    RowMatrix gcol = w.transpose() * g;
    *grad_in = Tensor3(in.shape());
    col2im(gcol.data(), kernel_, stride_, padding_, out.height(), out.width(), *grad_in);
  }
}

// ---------------------------------------------------------- DepthwiseConv2d

DepthwiseConv2d::DepthwiseConv2d(std::string name, int channels, int kernel, int stride, int padding)
    : channels_(channels),
      kernel_(kernel),
      stride_(stride),
      padding_(padding),
      weight_(make_param(name + ".weight", {channels, 1, kernel, kernel})),
      bias_(make_param(name + ".bias", {channels})) {}

Shape3 DepthwiseConv2d::output_shape(const Shape3& in) const {
  if (in.channels != channels_) {
    throw ShapeError("depthwise conv " + weight_.name + " expects " + std::to_string(channels_) + " channels");
  }
  return {channels_, conv_out_dim(in.height, kernel_, stride_, padding_),
          conv_out_dim(in.width, kernel_, stride_, padding_)};
}

void DepthwiseConv2d::forward(const Tensor3& in, Tensor3& out, LayerCache&) const {
  const Shape3 os = output_shape(in.shape());
  out = Tensor3(os);
  for (int c = 0; c < channels_; ++c) {
    const double* w = weight_.values.data() + static_cast<std::size_t>(c) * kernel_ * kernel_;
    for (int oy = 0; oy < os.height; ++oy) {
      for (int ox = 0; ox < os.width; ++ox) {
        double acc = bias_.values[c];
        for (int ky = 0; ky < kernel_; ++ky) {
          const int iy = oy * stride_ - padding_ + ky;
          if (iy < 0 || iy >= in.height()) continue;
          for (int kx = 0; kx < kernel_; ++kx) {
            const int ix = ox * stride_ - padding_ + kx;
            if (ix < 0 || ix >= in.width()) continue;
            acc += w[ky * kernel_ + kx] * in.at(c, iy, ix);
          }
        }
        out.at(c, oy, ox) = acc;
      }
    }
  }
}

void DepthwiseConv2d::backward(const Tensor3& in, const Tensor3& out, const LayerCache&, const Tensor3& grad_out,
                               Tensor3* grad_in, ParamGrads grads) const {
  if (grad_in != nullptr) *grad_in = Tensor3(in.shape());
  for (int c = 0; c < channels_; ++c) {
    const double* w = weight_.values.data() + static_cast<std::size_t>(c) * kernel_ * kernel_;
    double* gw = grads.empty() ? nullptr : grads[0].data() + static_cast<std::size_t>(c) * kernel_ * kernel_;
    for (int oy = 0; oy < out.height(); ++oy) {
      for (int ox = 0; ox < out.width(); ++ox) {
        const double g = grad_out.at(c, oy, ox);
        if (!grads.empty()) grads[1][c] += g;
        for (int ky = 0; ky < kernel_; ++ky) {
          const int iy = oy * stride_ - padding_ + ky;
          if (iy < 0 || iy >= in.height()) continue;
          for (int kx = 0; kx < kernel_; ++kx) {
            const int ix = ox * stride_ - padding_ + kx;
            if (ix < 0 || ix >= in.width()) continue;
            if (gw != nullptr) gw[ky * kernel_ + kx] += g * in.at(c, iy, ix);
            if (grad_in != nullptr) grad_in->at(c, iy, ix) += g * w[ky * kernel_ + kx];
          }
        }
      }
    }
  }
}

// ---------------------------------------------------------------- Linear

Linear::Linear(std::string name, int in_features, int out_features)
    : in_features_(in_features),
      out_features_(out_features),
      weight_(make_param(name + ".weight", {out_features, in_features})),
      bias_(make_param(name + ".bias", {out_features})) {}

Shape3 Linear::output_shape(const Shape3& in) const {
  if (static_cast<int>(in.size()) != in_features_) {
    throw ShapeError("linear " + weight_.name + " expects " + std::to_string(in_features_) + " inputs, got " +
                     std::to_string(in.size()));
  }
  return {out_features_, 1, 1};
}

void Linear::forward(const Tensor3& in, Tensor3& out, LayerCache&) const {
  out = Tensor3(output_shape(in.shape()));
  ConstMatrixMap w(weight_.values.data(), out_features_, in_features_);
  Eigen::Map<const Eigen::VectorXd> x(in.data(), in_features_);
  Eigen::Map<Eigen::VectorXd> y(out.data(), out_features_);
  Eigen::Map<const Eigen::VectorXd> b(bias_.values.data(), out_features_);
  y.noalias() = w * x + b;
}

void Linear::backward(const Tensor3& in, const Tensor3&, const LayerCache&, const Tensor3& grad_out,
                      Tensor3* grad_in, ParamGrads grads) const {
  Eigen::Map<const Eigen::VectorXd> g(grad_out.data(), out_features_);
  Eigen::Map<const Eigen::VectorXd> x(in.data(), in_features_);
  if (!grads.empty()) {
    MatrixMap gw(grads[0].data(), out_features_, in_features_);
    gw.noalias() += g * x.transpose();
    Eigen::Map<Eigen::VectorXd>(grads[1].data(), out_features_) += g;
  }
  if (grad_in != nullptr) {
    *grad_in = Tensor3(in.shape());
    ConstMatrixMap w(weight_.values.data(), out_features_, in_features_);
    Eigen::Map<Eigen::VectorXd>(grad_in->data(), in_features_).noalias() = w.transpose() * g;
  }
}

// ---------------------------------------------------------------- ReLU

void ReLU::forward(const Tensor3& in, Tensor3& out, LayerCache&) const {
  out = in;
  for (double& v : out.storage()) v = v > 0.0 ? v : 0.0;
}

void ReLU::backward(const Tensor3& in, const Tensor3&, const LayerCache&, const Tensor3& grad_out,
                    Tensor3* grad_in, ParamGrads) const {
  if (grad_in == nullptr) return;
  *grad_in = grad_out;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (!(in[i] > 0.0)) (*grad_in)[i] = 0.0;
  }
}

// ---------------------------------------------------------------- pooling

Shape3 MaxPool2::output_shape(const Shape3& in) const {
  if (in.height < 2 || in.width < 2) throw ShapeError("maxpool2 needs spatial size >= 2, got " + in.str());
  return {in.channels, in.height / 2, in.width / 2};
}

void MaxPool2::forward(const Tensor3& in, Tensor3& out, LayerCache& cache) const {
  const Shape3 os = output_shape(in.shape());
  out = Tensor3(os);
  cache.scratch.assign(os.size(), 0.0);
  std::size_t o = 0;
  for (int c = 0; c < os.channels; ++c) {
    for (int y = 0; y < os.height; ++y) {
      for (int x = 0; x < os.width; ++x, ++o) {
        int best = 0;
        double best_v = in.at(c, 2 * y, 2 * x);
        for (int j = 1; j < 4; ++j) {
          const double v = in.at(c, 2 * y + j / 2, 2 * x + j % 2);
          if (v > best_v) {
            best_v = v;
            best = j;
          }
        }
        out[o] = best_v;
        cache.scratch[o] = best;
      }
    }
  }
}

void MaxPool2::backward(const Tensor3& in, const Tensor3& out, const LayerCache& cache, const Tensor3& grad_out,
                        Tensor3* grad_in, ParamGrads) const {
  if (grad_in == nullptr) return;
  *grad_in = Tensor3(in.shape());
  std::size_t o = 0;
  for (int c = 0; c < out.channels(); ++c) {
    for (int y = 0; y < out.height(); ++y) {
      for (int x = 0; x < out.width(); ++x, ++o) {
        const int j = static_cast<int>(cache.scratch[o]);
        grad_in->at(c, 2 * y + j / 2, 2 * x + j % 2) += grad_out[o];
      }
    }
  }
}

Shape3 AvgPool2::output_shape(const Shape3& in) const {
  if (in.height < 2 || in.width < 2) throw ShapeError("avgpool2 needs spatial size >= 2, got " + in.str());
  return {in.channels, in.height / 2, in.width / 2};
}

void AvgPool2::forward(const Tensor3& in, Tensor3& out, LayerCache&) const {
  const Shape3 os = output_shape(in.shape());
  out = Tensor3(os);
  for (int c = 0; c < os.channels; ++c) {
    for (int y = 0; y < os.height; ++y) {
      for (int x = 0; x < os.width; ++x) {
        out.at(c, y, x) = 0.25 * (in.at(c, 2 * y, 2 * x) + in.at(c, 2 * y, 2 * x + 1) +
                                  in.at(c, 2 * y + 1, 2 * x) + in.at(c, 2 * y + 1, 2 * x + 1));
      }
    }
  }
}

void AvgPool2::backward(const Tensor3& in, const Tensor3& out, const LayerCache&, const Tensor3& grad_out,
                        Tensor3* grad_in, ParamGrads) const {
  if (grad_in == nullptr) return;
  *grad_in = Tensor3(in.shape());
  for (int c = 0; c < out.channels(); ++c) {
    for (int y = 0; y < out.height(); ++y) {
      for (int x = 0; x < out.width(); ++x) {
        const double g = 0.25 * grad_out.at(c, y, x);
        grad_in->at(c, 2 * y, 2 * x) += g;
        grad_in->at(c, 2 * y, 2 * x + 1) += g;
        grad_in->at(c, 2 * y + 1, 2 * x) += g;
        grad_in->at(c, 2 * y + 1, 2 * x + 1) += g;
      }
    }
  }
}

void GlobalAvgPool::forward(const Tensor3& in, Tensor3& out, LayerCache&) const {
  out = Tensor3(Shape3{in.channels(), 1, 1});
  const std::size_t plane = static_cast<std::size_t>(in.height()) * in.width();
  for (int c = 0; c < in.channels(); ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += in[c * plane + i];
    out[c] = s / static_cast<double>(plane);
  }
}

void GlobalAvgPool::backward(const Tensor3& in, const Tensor3&, const LayerCache&, const Tensor3& grad_out,
                             Tensor3* grad_in, ParamGrads) const {
  if (grad_in == nullptr) return;
  *grad_in = Tensor3(in.shape());
  const std::size_t plane = static_cast<std::size_t>(in.height()) * in.width();
  for (int c = 0; c < in.channels(); ++c) {
    const double g = grad_out[c] / static_cast<double>(plane);
    for (std::size_t i = 0; i < plane; ++i) (*grad_in)[c * plane + i] = g;
  }
}

// ---------------------------------------------------------- ChannelAffine

ChannelAffine::ChannelAffine(std::vector<double> shift, std::vector<double> scale)
    : shift_(std::move(shift)), scale_(std::move(scale)) {
  if (shift_.size() != scale_.size()) throw ShapeError("channel affine needs matching shift/scale lengths");
  for (double s : scale_) {
    if (!(s > 0.0)) throw PreconditionError("channel affine scale must be positive");
  }
}

Shape3 ChannelAffine::output_shape(const Shape3& in) const {
  if (static_cast<std::size_t>(in.channels) != shift_.size()) {
    throw ShapeError("channel affine expects " + std::to_string(shift_.size()) + " channels, got " + in.str());
  }
  return in;
}

void ChannelAffine::forward(const Tensor3& in, Tensor3& out, LayerCache&) const {
  output_shape(in.shape());
  out = in;
  const std::size_t plane = static_cast<std::size_t>(in.height()) * in.width();
  for (int c = 0; c < in.channels(); ++c) {
    for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] = (in[c * plane + i] - shift_[c]) / scale_[c];
  }
}

void ChannelAffine::backward(const Tensor3& in, const Tensor3&, const LayerCache&, const Tensor3& grad_out,
                             Tensor3* grad_in, ParamGrads) const {
  if (grad_in == nullptr) return;
  *grad_in = grad_out;
  const std::size_t plane = static_cast<std::size_t>(in.height()) * in.width();
  for (int c = 0; c < in.channels(); ++c) {
    for (std::size_t i = 0; i < plane; ++i) (*grad_in)[c * plane + i] /= scale_[c];
  }
}

// ---------------------------------------------------------------- Residual

Residual::Residual(Network body) : body_(std::make_unique<Network>(std::move(body))) {
  if (!(body_->output_shape() == body_->input_shape())) {
    throw ShapeError("residual body must preserve shape, maps " + body_->input_shape().str() + " to " +
                     body_->output_shape().str());
  }
}

Residual::Residual(const Residual& other) : body_(std::make_unique<Network>(*other.body_)) {}

void Residual::forward(const Tensor3& in, Tensor3& out, LayerCache& cache) const {
  cache.inner = std::make_unique<Trace>();
  out = body_->forward(in, *cache.inner);
  out.add_scaled(in);
}

void Residual::backward(const Tensor3&, const Tensor3&, const LayerCache& cache, const Tensor3& grad_out,
                        Tensor3* grad_in, ParamGrads grads) const {
  Tensor3 g = body_->backward(*cache.inner, grad_out, grads);
  if (grad_in != nullptr) {
    g.add_scaled(grad_out);
    *grad_in = std::move(g);
  }
}

std::vector<Parameter*> Residual::parameters() { return body_->parameters(); }

// ---------------------------------------------------------------- Network

Network::Network(Shape3 input_shape) : input_shape_(input_shape) { param_offsets_.push_back(0); }

Network::Network(const Network& other)
    : input_shape_(other.input_shape_), shapes_(other.shapes_), param_offsets_(other.param_offsets_) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Network& Network::operator=(const Network& other) {
  if (this != &other) {
    Network copy(other);
    *this = std::move(copy);
  }
  return *this;
}

void Network::add(std::unique_ptr<Layer> layer) {
  const Shape3 in = shapes_.empty() ? input_shape_ : shapes_.back();
  shapes_.push_back(layer->output_shape(in));
  param_offsets_.push_back(param_offsets_.back() + layer->parameters().size());
  layers_.push_back(std::move(layer));
}

Shape3 Network::output_shape() const { return shapes_.empty() ? input_shape_ : shapes_.back(); }

Tensor3 Network::forward(const Tensor3& x) const {
  require_same_shape(x.shape(), input_shape_, "network input");
  Tensor3 current = x;
  Tensor3 next;
  LayerCache cache;
  for (const auto& layer : layers_) {
    layer->forward(current, next, cache);
    std::swap(current, next);
  }
  return current;
}

Tensor3 Network::forward(const Tensor3& x, Trace& trace) const {
  require_same_shape(x.shape(), input_shape_, "network input");
  trace.input = x;
  trace.outputs.resize(layers_.size());
  trace.caches.clear();
  trace.caches.resize(layers_.size());
  const Tensor3* current = &trace.input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i]->forward(*current, trace.outputs[i], trace.caches[i]);
    current = &trace.outputs[i];
  }
  return *current;
}

Tensor3 Network::backward(const Trace& trace, std::span<const Tensor3* const> grads_at, ParamGrads grads) const {
  if (grads_at.size() != layers_.size()) {
    throw ShapeError("backward expects one gradient slot per layer");
  }
  Tensor3 g;
  bool have = false;
  for (std::size_t idx = layers_.size(); idx-- > 0;) {
    if (grads_at[idx] != nullptr) {
      if (have) {
        g.add_scaled(*grads_at[idx]);
      } else {
        g = *grads_at[idx];
        have = true;
      }
    }
    if (!have) continue;
    const Tensor3& in = idx == 0 ? trace.input : trace.outputs[idx - 1];
    ParamGrads slice;
    if (!grads.empty()) {
      slice = grads.subspan(param_offsets_[idx], param_offsets_[idx + 1] - param_offsets_[idx]);
    }
    Tensor3 gin;
    layers_[idx]->backward(in, trace.outputs[idx], trace.caches[idx], g, &gin, slice);
    g = std::move(gin);
  }
  if (!have) return Tensor3(input_shape_);
  return g;
}

Tensor3 Network::backward(const Trace& trace, const Tensor3& grad_output, ParamGrads grads) const {
  std::vector<const Tensor3*> slots(layers_.size(), nullptr);
  if (layers_.empty()) return grad_output;
  slots.back() = &grad_output;
  return backward(trace, slots, grads);
}

Network Network::prefix(std::size_t count) const {
  if (count > layers_.size()) throw ShapeError("prefix longer than network");
  Network out(input_shape_);
  for (std::size_t i = 0; i < count; ++i) out.add(layers_[i]->clone());
  return out;
}

std::vector<Parameter*> Network::parameters() {
  std::vector<Parameter*> out;
  for (auto& l : layers_) {
    auto p = l->parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<const Parameter*> Network::parameters() const {
  auto p = const_cast<Network*>(this)->parameters();
  return {p.begin(), p.end()};
}

std::size_t Network::parameter_tensor_count() const { return param_offsets_.back(); }

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter* p : parameters()) n += p->numel();
  return n;
}

std::vector<std::vector<double>> Network::make_gradient_buffers() const {
  std::vector<std::vector<double>> out;
  for (const Parameter* p : parameters()) out.emplace_back(p->numel(), 0.0);
  return out;
}

}  // namespace demiguise::nn
