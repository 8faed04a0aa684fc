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

#ifndef FEDPAD_MODELS_HPP_
#define FEDPAD_MODELS_HPP_

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "fedpad/autodiff.hpp"
#include "fedpad/nn.hpp"
#include "fedpad/parameter_set.hpp"
#include "fedpad/rng.hpp"

namespace fedpad {

/// Desk-scale network geometry. Input is [h x w x channels] (RGB + HSV).
struct ModelConfig {
  std::size_t image_h = 16;
  std::size_t image_w = 16;
  std::size_t channels = 6;
  std::size_t conv1 = 8;
  std::size_t conv2 = 4;
  std::size_t depth_h = 4;
  std::size_t depth_w = 4;
  std::size_t decoder_channels = 8;
  std::size_t classifier_hidden = 32;

  /// Throws ConfigError for zero widths or spatial sizes not divisible by 4.
  void validate() const;
  std::size_t feature_dim() const { return (image_h / 4) * (image_w / 4) * conv2; }
  std::size_t depth_dim() const { return depth_h * depth_w; }
  Shape batch_shape(std::size_t batch) const { return {batch, image_h, image_w, channels}; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// One minibatch. depth is [batch x depth_h*depth_w], labels are 0/1.
struct Batch {
  Tensor images;
  Tensor labels;
  Tensor depth;

  std::size_t size() const { return labels.empty() ? 0 : labels.dim(0); }
};

// Parameter name prefixes of the five subnets.
inline constexpr const char* kInvariantExtractor = "ei.";
inline constexpr const char* kSpecificExtractor = "es.";
inline constexpr const char* kClassifier = "cls.";
inline constexpr const char* kDepthEstimator = "dep.";
inline constexpr const char* kDecoder = "dec.";

nn::Stack extractor_stack(const ModelConfig& cfg, const std::string& prefix);
nn::Stack classifier_stack(const ModelConfig& cfg);
nn::Stack depth_stack(const ModelConfig& cfg);
nn::Stack decoder_stack(const ModelConfig& cfg);

/// Feature trunk + classifier; every parameter is tagged invariant.
class MonolithicModel {
 public:
  MonolithicModel(ModelConfig cfg, ParameterSet params);

  const ModelConfig& config() const noexcept { return cfg_; }
  const ParameterSet& params() const noexcept { return params_; }
  ParameterSet& params() noexcept { return params_; }
  const nn::Stack& trunk() const noexcept { return trunk_; }
  const nn::Stack& head() const noexcept { return head_; }

  /// Probabilities [batch] recorded in `graph`.
  ad::NodeId forward(ad::NodeId x, ad::Graph& graph) const;
  /// Inference-only probabilities for a [batch x h x w x c] tensor.
  Tensor predict(const Tensor& images) const;

 private:
  ModelConfig cfg_;
  nn::Stack trunk_;
  nn::Stack head_;
  ParameterSet params_;
};

/// Node ids of one disentangled forward pass, all in the same graph.
struct DisentangledOutputs {
  ad::NodeId prob;    // [batch]
  ad::NodeId depth;   // [batch x depth_dim]
  ad::NodeId recon;   // [batch x h x w x c]
  ad::NodeId zi;      // [batch x feature_dim]
  ad::NodeId zs;      // [batch x feature_dim]
};

/**
 * Five-subnet model: invariant extractor EI, specific extractor ES,
 * classifier C and depth estimator Dep on Z_I, decoder Dec on Z_I + Z_S.
 * EI, C and Dep form the invariant partition; ES and Dec the specific one.
 */
class DisentangledModel {
 public:
  DisentangledModel(ModelConfig cfg, ParameterSet params);

  const ModelConfig& config() const noexcept { return cfg_; }
  const ParameterSet& params() const noexcept { return params_; }
  ParameterSet& params() noexcept { return params_; }

  const nn::Stack& invariant_extractor() const noexcept { return ei_; }
  const nn::Stack& specific_extractor() const noexcept { return es_; }
  const nn::Stack& classifier() const noexcept { return cls_; }
  const nn::Stack& depth_estimator() const noexcept { return dep_; }
  const nn::Stack& decoder() const noexcept { return dec_; }

  /// Parameters a user downloads for inference: EI and C.
  ParameterSet user_params() const;

  Tensor predict(const Tensor& images) const;

 private:
  ModelConfig cfg_;
  nn::Stack ei_, es_, cls_, dep_, dec_;
  ParameterSet params_;
};

MonolithicModel build_monolithic(const ModelConfig& cfg, const Rng& rng);
DisentangledModel build_disentangled(const ModelConfig& cfg, const Rng& rng);

DisentangledOutputs disentangled_forward(const DisentangledModel& m, ad::NodeId x,
                                         ad::Graph& graph);

/// Which auxiliary terms take part in the local objective. The
/// classification term is always on.
struct LossFlags {
  bool diff = true;
  bool rec = true;
  bool dep = true;

  bool any() const noexcept { return diff || rec || dep; }
  friend bool operator==(const LossFlags&, const LossFlags&) = default;
};

/// Per-term values. `cls`, `dep`, `rec`, `diff` are the contributions to
/// the total (zero for disabled terms); `raw` keeps the measured values.
struct LossTerms {
  double cls = 0.0;
  double dep = 0.0;
  double rec = 0.0;
  double diff = 0.0;
  double total = 0.0;
  struct {
    double cls = 0.0, dep = 0.0, rec = 0.0, diff = 0.0;
  } raw;
};

struct LocalLoss {
  ad::NodeId total;
  LossTerms terms;
};

/// L = L_Cls + L_Dep + L_Rec + L_Diff with unit weights; disabled terms get
/// weight zero and contribute neither value nor gradient.
LocalLoss total_local_loss(ad::Graph& graph, const DisentangledOutputs& out, ad::NodeId x,
                           ad::NodeId labels, ad::NodeId depth_target, const LossFlags& flags);

using AnyModel = std::variant<MonolithicModel, DisentangledModel>;

const ParameterSet& model_params(const AnyModel& m);
ParameterSet& model_params(AnyModel& m);
Tensor model_predict(const AnyModel& m, const Tensor& images);

/// Builds the training objective for one batch: cross-entropy for the
/// monolithic model, the flagged disentanglement suite otherwise.
LocalLoss model_objective(const AnyModel& m, ad::Graph& graph, const Batch& batch,
                          const LossFlags& flags);

}  // namespace fedpad

#endif  // FEDPAD_MODELS_HPP_
