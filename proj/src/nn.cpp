// Copyright 2026 The fedpad-sim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fedpad/nn.hpp"

#include <cmath>

#include "fedpad/error.hpp"

namespace fedpad::nn {

const char* layer_kind_name(LayerKind kind) noexcept {
  switch (kind) {
    case LayerKind::kDense: return "dense";
    case LayerKind::kConv3x3: return "conv3x3";
    case LayerKind::kAvgPool2x2: return "avgpool2x2";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kSigmoid: return "sigmoid";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kUpsample2x: return "upsample2x_nearest";
    case LayerKind::kUnflatten: return "unflatten";
  }
  return "?";
}

Shape Layer::weight_shape() const {
  if (kind == LayerKind::kDense) return {in, out};
  if (kind == LayerKind::kConv3x3) return {out, in, 3, 3};
  throw ContractError(std::string(layer_kind_name(kind)) + " has no weight");
}

Shape Layer::bias_shape() const {
  if (!trainable()) throw ContractError(std::string(layer_kind_name(kind)) + " has no bias");
  return {out};
}

Layer dense(std::string name, std::size_t in, std::size_t out) {
  if (in == 0 || out == 0) throw ConfigError("dense layer '" + name + "' needs nonzero widths");
  return Layer{LayerKind::kDense, std::move(name), in, out, {}};
}

Layer conv3x3(std::string name, std::size_t in_ch, std::size_t out_ch) {
  if (in_ch == 0 || out_ch == 0) throw ConfigError("conv layer '" + name + "' needs nonzero channels");
  return Layer{LayerKind::kConv3x3, std::move(name), in_ch, out_ch, {}};
}

Layer avgpool2x2() { return Layer{LayerKind::kAvgPool2x2, "", 0, 0, {}}; }
Layer relu() { return Layer{LayerKind::kRelu, "", 0, 0, {}}; }
Layer sigmoid() { return Layer{LayerKind::kSigmoid, "", 0, 0, {}}; }
Layer flatten() { return Layer{LayerKind::kFlatten, "", 0, 0, {}}; }
Layer upsample2x() { return Layer{LayerKind::kUpsample2x, "", 0, 0, {}}; }

Layer unflatten(std::size_t h, std::size_t w, std::size_t c) {
  if (h == 0 || w == 0 || c == 0) throw ConfigError("unflatten needs nonzero dims");
  return Layer{LayerKind::kUnflatten, "", 0, 0, Shape{h, w, c}};
}

void init_params(const Stack& stack, Rng& rng, Partition partition, ParameterSet& params) {
  for (const Layer& layer : stack) {
    if (!layer.trainable()) continue;
    const Shape ws = layer.weight_shape();
    const double fan_in = layer.kind == LayerKind::kDense ? static_cast<double>(layer.in)
                                                          : static_cast<double>(layer.in * 9);
    params.add(layer.weight_name(), draw(rng, Normal{0.0, std::sqrt(2.0 / fan_in)}, ws), partition);
    params.add(layer.bias_name(), Tensor(layer.bias_shape()), partition);
  }
}

std::size_t count_params(const Stack& stack) {
  std::size_t n = 0;
  for (const Layer& layer : stack) {
    if (layer.trainable()) n += shape_size(layer.weight_shape()) + shape_size(layer.bias_shape());
  }
  return n;
}

namespace {

[[noreturn]] void layer_error(std::size_t index, const Layer& layer, const Shape& got,
                              const std::string& expected) {
  throw DimensionError("layer " + std::to_string(index) + " (" + layer_kind_name(layer.kind) +
                       (layer.name.empty() ? "" : " '" + layer.name + "'") + "): input " +
                       shape_str(got) + ", expected " + expected);
}

Shape step_shape(std::size_t index, const Layer& layer, const Shape& in) {
  switch (layer.kind) {
    case LayerKind::kDense:
      if (in.size() != 2 || in[1] != layer.in) {
        layer_error(index, layer, in, "[batch x " + std::to_string(layer.in) + "]");
      }
      return {in[0], layer.out};
    case LayerKind::kConv3x3:
      if (in.size() != 4 || in[3] != layer.in) {
        layer_error(index, layer, in, "[batch x h x w x " + std::to_string(layer.in) + "]");
      }
      return {in[0], in[1], in[2], layer.out};
    case LayerKind::kAvgPool2x2:
      if (in.size() != 4 || in[1] % 2 != 0 || in[2] % 2 != 0) {
        layer_error(index, layer, in, "[batch x even h x even w x c]");
      }
      return {in[0], in[1] / 2, in[2] / 2, in[3]};
    case LayerKind::kUpsample2x:
      if (in.size() != 4) layer_error(index, layer, in, "[batch x h x w x c]");
      return {in[0], in[1] * 2, in[2] * 2, in[3]};
    case LayerKind::kFlatten: {
      if (in.size() < 2) layer_error(index, layer, in, "rank >= 2");
      std::size_t rest = 1;
      for (std::size_t i = 1; i < in.size(); ++i) rest *= in[i];
      return {in[0], rest};
    }
    case LayerKind::kUnflatten: {
      const std::size_t n = shape_size(layer.unflatten);
      if (in.size() != 2 || in[1] != n) {
        layer_error(index, layer, in, "[batch x " + std::to_string(n) + "]");
      }
      return {in[0], layer.unflatten[0], layer.unflatten[1], layer.unflatten[2]};
    }
    case LayerKind::kRelu:
    case LayerKind::kSigmoid:
      return in;
  }
  return in;
}

}  // namespace

Shape output_shape(const Stack& stack, const Shape& input) {
  Shape s = input;
  for (std::size_t i = 0; i < stack.size(); ++i) s = step_shape(i, stack[i], s);
  return s;
}

ad::NodeId forward(const Stack& stack, const ParameterSet& params, ad::NodeId x,
                   ad::Graph& graph) {
  ad::NodeId h = x;
  for (std::size_t i = 0; i < stack.size(); ++i) {
    const Layer& layer = stack[i];
    const Shape out = step_shape(i, layer, graph.value(h).shape());
    switch (layer.kind) {
      case LayerKind::kDense: {
        const auto w = graph.parameter(layer.weight_name(), params.get(layer.weight_name()));
        const auto b = graph.parameter(layer.bias_name(), params.get(layer.bias_name()));
        h = ad::add_bias(graph, ad::matmul(graph, h, w), b);
        break;
      }
      case LayerKind::kConv3x3: {
        const auto w = graph.parameter(layer.weight_name(), params.get(layer.weight_name()));
        const auto b = graph.parameter(layer.bias_name(), params.get(layer.bias_name()));
        h = ad::conv3x3(graph, h, w, b);
        break;
      }
      case LayerKind::kAvgPool2x2: h = ad::avgpool2x2(graph, h); break;
      case LayerKind::kUpsample2x: h = ad::upsample2x(graph, h); break;
      case LayerKind::kRelu: h = ad::relu(graph, h); break;
      case LayerKind::kSigmoid: h = ad::sigmoid(graph, h); break;
      case LayerKind::kFlatten:
      case LayerKind::kUnflatten: h = ad::reshape(graph, h, out); break;
    }
  }
  return h;
}

void Optimizer::step(ParameterSet& params, const ParameterSet& grads) {
  if (params.size() != grads.size()) {
    throw ParameterError("optimizer: " + std::to_string(grads.size()) + " gradients for " +
                         std::to_string(params.size()) + " parameters");
  }
  for (const auto& e : params.entries()) {
    if (!grads.contains(e.name)) throw ParameterError("optimizer: no gradient for '" + e.name + "'");
    if (grads.get(e.name).shape() != e.value.shape()) {
      throw ParameterError("optimizer: gradient shape mismatch for '" + e.name + "'");
    }
  }
  ++steps_;
  if (!is_adam_) {
    for (auto& e : params.entries()) {
      const Tensor& g = grads.get(e.name);
      for (std::size_t i = 0; i < e.value.size(); ++i) e.value[i] -= sgd_.lr * g[i];
    }
    return;
  }
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(adam_.beta1, t);
  const double c2 = 1.0 - std::pow(adam_.beta2, t);
  for (auto& e : params.entries()) {
    if (!m_.contains(e.name)) {
      m_.add(e.name, Tensor(e.value.shape()), e.partition);
      v_.add(e.name, Tensor(e.value.shape()), e.partition);
    }
    const Tensor& g = grads.get(e.name);
    Tensor& m = m_.get(e.name);
    Tensor& v = v_.get(e.name);
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      m[i] = adam_.beta1 * m[i] + (1.0 - adam_.beta1) * g[i];
      v[i] = adam_.beta2 * v[i] + (1.0 - adam_.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      e.value[i] -= adam_.lr * mhat / (std::sqrt(vhat) + adam_.eps);
    }
  }
}

}  // namespace fedpad::nn
