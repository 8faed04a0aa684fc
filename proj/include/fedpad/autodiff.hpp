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

#ifndef FEDPAD_AUTODIFF_HPP_
#define FEDPAD_AUTODIFF_HPP_

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "fedpad/parameter_set.hpp"
#include "fedpad/tensor.hpp"

namespace fedpad::ad {

using NodeId = std::size_t;

/**
 * Append-only reverse-mode tape.
 *
 * Each node stores its op tag, input ids (always smaller than its own id),
 * the cached forward value and a closure that pushes its output gradient
 * into its inputs. Nodes that cannot reach a parameter skip gradient work.
 * A Graph belongs to one task for its whole lifetime.
 */
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, NodeId)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  /// Constant leaf (inputs, labels, targets).
  NodeId constant(Tensor value);
  /// Trainable leaf. Registering the same name twice returns the first node.
  NodeId parameter(const std::string& name, const Tensor& value);

  /// Appends an op node. `fn` may be empty for ops with no differentiable input.
  NodeId push(std::string tag, std::vector<NodeId> inputs, Tensor value, BackwardFn fn);

  std::size_t size() const noexcept { return nodes_.size(); }
  const Tensor& value(NodeId id) const { return nodes_.at(id).value; }
  const std::string& tag(NodeId id) const { return nodes_.at(id).tag; }
  const std::vector<NodeId>& inputs(NodeId id) const { return nodes_.at(id).inputs; }
  bool needs_grad(NodeId id) const { return nodes_.at(id).needs_grad; }
  bool has_grad(NodeId id) const { return !nodes_.at(id).grad.empty(); }

  /// Gradient of the last backward() target w.r.t. this node; zeros if unreached.
  Tensor grad(NodeId id) const;
  /// Accumulator used by backward closures; allocated on first touch.
  Tensor& grad_slot(NodeId id);

  /// Reverse sweep from a scalar node. Throws ContractError for non-scalar
  /// targets. Clears gradients from any previous sweep first.
  void backward(NodeId loss);

  /// Gradients for every entry of `params` (zeros for entries the loss does
  /// not depend on), keyed and tagged identically.
  ParameterSet parameter_grads(const ParameterSet& params) const;

 private:
  struct Node {
    std::string tag;
    std::vector<NodeId> inputs;
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    bool needs_grad = false;
  };

  std::vector<Node> nodes_;
  std::map<std::string, NodeId> params_;
};

// Differentiable ops. Every op validates shapes and throws DimensionError.

NodeId add(Graph& g, NodeId a, NodeId b);
NodeId sub(Graph& g, NodeId a, NodeId b);
NodeId mul(Graph& g, NodeId a, NodeId b);
NodeId scale(Graph& g, NodeId a, double c);
NodeId relu(Graph& g, NodeId a);
NodeId sigmoid(Graph& g, NodeId a);
NodeId square(Graph& g, NodeId a);
NodeId sum(Graph& g, NodeId a);
NodeId frobenius_sq(Graph& g, NodeId a);
/// Weighted sum of scalar nodes.
NodeId weighted_sum(Graph& g, const std::vector<NodeId>& terms, const std::vector<double>& weights);

NodeId matmul(Graph& g, NodeId a, NodeId b);
/// x[..., C] + bias[C] broadcast along the last axis.
NodeId add_bias(Graph& g, NodeId x, NodeId bias);
NodeId reshape(Graph& g, NodeId x, Shape shape);

/// 3x3 same-padding convolution over NHWC input with an [out, in, 3, 3]
/// kernel and [out] bias.
NodeId conv3x3(Graph& g, NodeId x, NodeId kernel, NodeId bias);
/// Non-overlapping 2x2 mean pooling over NHWC input with even H and W.
NodeId avgpool2x2(Graph& g, NodeId x);
/// Nearest-neighbour 2x upsampling over NHWC input.
NodeId upsample2x(Graph& g, NodeId x);

// Losses. All are batch means over the leading axis.

inline constexpr double kProbEpsilon = 1e-7;

/// Mean binary cross-entropy on probabilities clamped to [eps, 1-eps].
/// Labels must be exactly 0 or 1 (LabelError otherwise).
NodeId loss_cls(Graph& g, NodeId prob, NodeId labels);
/// Mean over the batch of the per-sample squared L2 distance.
NodeId loss_depth(Graph& g, NodeId pred, NodeId target);
NodeId loss_rec(Graph& g, NodeId reconstruction, NodeId x);
/// ||Zi^T Zs||_F^2 / batch for [batch x dI] and [batch x dS] features.
NodeId loss_diff(Graph& g, NodeId zi, NodeId zs);

}  // namespace fedpad::ad

#endif  // FEDPAD_AUTODIFF_HPP_
