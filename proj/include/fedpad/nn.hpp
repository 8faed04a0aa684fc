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

#ifndef FEDPAD_NN_HPP_
#define FEDPAD_NN_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fedpad/autodiff.hpp"
#include "fedpad/parameter_set.hpp"
#include "fedpad/rng.hpp"

namespace fedpad::nn {

enum class LayerKind {
  kDense,
  kConv3x3,
  kAvgPool2x2,
  kRelu,
  kSigmoid,
  kFlatten,
  kUpsample2x,
  kUnflatten,  // [batch x h*w*c] -> [batch x h x w x c]
};

const char* layer_kind_name(LayerKind kind) noexcept;

/// One stage of a sequential stack. Trainable kinds own "<name>.weight" and
/// "<name>.bias" in the model's ParameterSet.
struct Layer {
  LayerKind kind = LayerKind::kRelu;
  std::string name;
  std::size_t in = 0;   // dense: in features, conv: in channels
  std::size_t out = 0;  // dense: out features, conv: out channels
  Shape unflatten;      // kUnflatten only: {h, w, c}

  bool trainable() const noexcept {
    return kind == LayerKind::kDense || kind == LayerKind::kConv3x3;
  }
  std::string weight_name() const { return name + ".weight"; }
  std::string bias_name() const { return name + ".bias"; }
  Shape weight_shape() const;
  Shape bias_shape() const;
};

Layer dense(std::string name, std::size_t in, std::size_t out);
Layer conv3x3(std::string name, std::size_t in_ch, std::size_t out_ch);
Layer avgpool2x2();
Layer relu();
Layer sigmoid();
Layer flatten();
Layer upsample2x();
Layer unflatten(std::size_t h, std::size_t w, std::size_t c);

using Stack = std::vector<Layer>;

/// Adds He-initialised weights (normal, std sqrt(2 / fan_in)) and zero
/// biases for every trainable layer of `stack` to `params`.
void init_params(const Stack& stack, Rng& rng, Partition partition, ParameterSet& params);

/// Number of scalar parameters the stack owns.
std::size_t count_params(const Stack& stack);

/// Shape produced by the stack for a given input shape. Throws
/// DimensionError naming the first offending layer index.
Shape output_shape(const Stack& stack, const Shape& input);

/// Sequential application recorded in `graph`. Shape errors name the layer.
ad::NodeId forward(const Stack& stack, const ParameterSet& params, ad::NodeId x,
                   ad::Graph& graph);

// ---------------------------------------------------------------------------

struct SgdSpec {
  double lr = 0.01;
};

struct AdamSpec {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// SGD or Adam with per-parameter moment state keyed by name.
class Optimizer {
 public:
  explicit Optimizer(SgdSpec spec) : is_adam_(false), sgd_(spec) {}
  explicit Optimizer(AdamSpec spec) : is_adam_(true), adam_(spec) {}

  bool is_adam() const noexcept { return is_adam_; }
  double learning_rate() const noexcept { return is_adam_ ? adam_.lr : sgd_.lr; }
  std::uint64_t step_count() const noexcept { return steps_; }

  /// In-place update. `grads` must carry exactly the names of `params`
  /// (ParameterError otherwise).
  void step(ParameterSet& params, const ParameterSet& grads);

  const ParameterSet& first_moment() const noexcept { return m_; }
  const ParameterSet& second_moment() const noexcept { return v_; }

 private:
  bool is_adam_;
  SgdSpec sgd_{};
  AdamSpec adam_{};
  std::uint64_t steps_ = 0;
  ParameterSet m_;
  ParameterSet v_;
};

}  // namespace fedpad::nn

#endif  // FEDPAD_NN_HPP_
