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

#include "fedpad/models.hpp"

#include <algorithm>

#include "fedpad/error.hpp"

namespace fedpad {

namespace {

constexpr std::size_t kPredictChunk = 64;

void require_param_layout(const ParameterSet& params, const std::vector<const nn::Stack*>& stacks) {
  std::size_t expected = 0;
  for (const auto* stack : stacks) {
    for (const auto& layer : *stack) {
      if (!layer.trainable()) continue;
      expected += 2;
      for (const auto& [name, shape] :
           {std::pair{layer.weight_name(), layer.weight_shape()},
            std::pair{layer.bias_name(), layer.bias_shape()}}) {
        if (!params.contains(name)) throw ConfigError("model parameters lack '" + name + "'");
        if (params.get(name).shape() != shape) {
          throw ConfigError("parameter '" + name + "' has shape " +
                            shape_str(params.get(name).shape()) + ", layer needs " +
                            shape_str(shape));
        }
      }
    }
  }
  if (params.size() != expected) {
    throw ConfigError("model expects " + std::to_string(expected) + " parameter tensors, got " +
                      std::to_string(params.size()));
  }
}

// Runs `fn(chunk_images)` over slices of at most kPredictChunk samples.
template <typename Fn>
Tensor predict_chunked(const Tensor& images, const ModelConfig& cfg, Fn&& fn) {
  if (images.rank() != 4 || images.dim(1) != cfg.image_h || images.dim(2) != cfg.image_w ||
      images.dim(3) != cfg.channels) {
    throw DimensionError("predict: images " + shape_str(images.shape()) + ", expected [batch x " +
                         std::to_string(cfg.image_h) + " x " + std::to_string(cfg.image_w) +
                         " x " + std::to_string(cfg.channels) + "]");
  }
  const std::size_t n = images.dim(0);
  const std::size_t per = cfg.image_h * cfg.image_w * cfg.channels;
  Tensor out(Shape{n});
  for (std::size_t start = 0; start < n; start += kPredictChunk) {
    const std::size_t len = std::min(kPredictChunk, n - start);
    std::vector<double> chunk(images.raw() + start * per, images.raw() + (start + len) * per);
    const Tensor probs = fn(Tensor(cfg.batch_shape(len), std::move(chunk)));
    std::copy(probs.raw(), probs.raw() + len, out.raw() + start);
  }
  return out;
}

}  // namespace

void ModelConfig::validate() const {
  if (image_h == 0 || image_w == 0 || channels == 0 || conv1 == 0 || conv2 == 0 ||
      depth_h == 0 || depth_w == 0 || decoder_channels == 0 || classifier_hidden == 0) {
    throw ConfigError("model config: all widths and sizes must be nonzero");
  }
  if (image_h % 4 != 0 || image_w % 4 != 0) {
    throw ConfigError("model config: image size must be divisible by 4 (two 2x2 pools)");
  }
}

nn::Stack extractor_stack(const ModelConfig& cfg, const std::string& prefix) {
  return {nn::conv3x3(prefix + "conv1", cfg.channels, cfg.conv1), nn::relu(), nn::avgpool2x2(),
          nn::conv3x3(prefix + "conv2", cfg.conv1, cfg.conv2),     nn::avgpool2x2(),
          nn::flatten()};
}

nn::Stack classifier_stack(const ModelConfig& cfg) {
  return {nn::dense(std::string(kClassifier) + "fc1", cfg.feature_dim(), cfg.classifier_hidden),
          nn::relu(), nn::dense(std::string(kClassifier) + "fc2", cfg.classifier_hidden, 1),
          nn::sigmoid()};
}

nn::Stack depth_stack(const ModelConfig& cfg) {
  return {nn::dense(std::string(kDepthEstimator) + "fc", cfg.feature_dim(), cfg.depth_dim())};
}

nn::Stack decoder_stack(const ModelConfig& cfg) {
  const std::size_t h = cfg.image_h / 4, w = cfg.image_w / 4, c = cfg.decoder_channels;
  const std::string p = kDecoder;
  return {nn::dense(p + "fc", cfg.feature_dim(), h * w * c),
          nn::relu(),
          nn::unflatten(h, w, c),
          nn::upsample2x(),
          nn::conv3x3(p + "conv1", c, c),
          nn::relu(),
          nn::upsample2x(),
          nn::conv3x3(p + "conv2", c, cfg.channels)};
}

// --- MonolithicModel -------------------------------------------------------

MonolithicModel::MonolithicModel(ModelConfig cfg, ParameterSet params)
    : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  trunk_ = extractor_stack(cfg_, kInvariantExtractor);
  head_ = classifier_stack(cfg_);
  require_param_layout(params_, {&trunk_, &head_});
  for (const auto& e : params_.entries()) {
    if (e.partition != Partition::kInvariant) {
      throw ConfigError("monolithic parameter '" + e.name + "' must be tagged invariant");
    }
  }
}

ad::NodeId MonolithicModel::forward(ad::NodeId x, ad::Graph& graph) const {
  const ad::NodeId features = nn::forward(trunk_, params_, x, graph);
  const ad::NodeId prob = nn::forward(head_, params_, features, graph);
  return ad::reshape(graph, prob, {graph.value(prob).dim(0)});
}

Tensor MonolithicModel::predict(const Tensor& images) const {
  return predict_chunked(images, cfg_, [this](Tensor chunk) {
    ad::Graph g;
    return g.value(forward(g.constant(std::move(chunk)), g));
  });
}

MonolithicModel build_monolithic(const ModelConfig& cfg, const Rng& rng) {
  cfg.validate();
  ParameterSet params;
  Rng ei = rng.fork("init.ei");
  Rng cls = rng.fork("init.cls");
  nn::init_params(extractor_stack(cfg, kInvariantExtractor), ei, Partition::kInvariant, params);
  nn::init_params(classifier_stack(cfg), cls, Partition::kInvariant, params);
  return MonolithicModel(cfg, std::move(params));
}

// --- DisentangledModel -----------------------------------------------------

DisentangledModel::DisentangledModel(ModelConfig cfg, ParameterSet params)
    : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  ei_ = extractor_stack(cfg_, kInvariantExtractor);
  es_ = extractor_stack(cfg_, kSpecificExtractor);
  cls_ = classifier_stack(cfg_);
  dep_ = depth_stack(cfg_);
  dec_ = decoder_stack(cfg_);
  require_param_layout(params_, {&ei_, &es_, &cls_, &dep_, &dec_});
  for (const auto& e : params_.entries()) {
    const bool specific = e.name.rfind(kSpecificExtractor, 0) == 0 || e.name.rfind(kDecoder, 0) == 0;
    const Partition want = specific ? Partition::kSpecific : Partition::kInvariant;
    if (e.partition != want) {
      throw ConfigError("parameter '" + e.name + "' must be tagged " + partition_name(want));
    }
  }
}

ParameterSet DisentangledModel::user_params() const {
  return params_.with_prefixes({kInvariantExtractor, kClassifier});
}

Tensor DisentangledModel::predict(const Tensor& images) const {
  return predict_chunked(images, cfg_, [this](Tensor chunk) {
    ad::Graph g;
    const ad::NodeId zi = nn::forward(ei_, params_, g.constant(std::move(chunk)), g);
    const ad::NodeId p = nn::forward(cls_, params_, zi, g);
    return g.value(p).reshaped({g.value(p).dim(0)});
  });
}

DisentangledModel build_disentangled(const ModelConfig& cfg, const Rng& rng) {
  cfg.validate();
  ParameterSet params;
  // Same streams as build_monolithic for EI and C so both protocols start
  // from identical invariant weights under one seed.
  Rng ei = rng.fork("init.ei");
  Rng cls = rng.fork("init.cls");
  Rng es = rng.fork("init.es");
  Rng dep = rng.fork("init.dep");
  Rng dec = rng.fork("init.dec");
  nn::init_params(extractor_stack(cfg, kInvariantExtractor), ei, Partition::kInvariant, params);
  nn::init_params(classifier_stack(cfg), cls, Partition::kInvariant, params);
  nn::init_params(depth_stack(cfg), dep, Partition::kInvariant, params);
  nn::init_params(extractor_stack(cfg, kSpecificExtractor), es, Partition::kSpecific, params);
  nn::init_params(decoder_stack(cfg), dec, Partition::kSpecific, params);
  return DisentangledModel(cfg, std::move(params));
}

DisentangledOutputs disentangled_forward(const DisentangledModel& m, ad::NodeId x,
                                         ad::Graph& graph) {
  const ParameterSet& params = m.params();
  DisentangledOutputs out{};
  out.zi = nn::forward(m.invariant_extractor(), params, x, graph);
  out.zs = nn::forward(m.specific_extractor(), params, x, graph);
  const ad::NodeId p = nn::forward(m.classifier(), params, out.zi, graph);
  out.prob = ad::reshape(graph, p, {graph.value(p).dim(0)});
  out.depth = nn::forward(m.depth_estimator(), params, out.zi, graph);
  out.recon = nn::forward(m.decoder(), params, ad::add(graph, out.zi, out.zs), graph);
  return out;
}

LocalLoss total_local_loss(ad::Graph& graph, const DisentangledOutputs& out, ad::NodeId x,
                           ad::NodeId labels, ad::NodeId depth_target, const LossFlags& flags) {
  const ad::NodeId cls = ad::loss_cls(graph, out.prob, labels);
  const ad::NodeId dep = ad::loss_depth(graph, out.depth, depth_target);
  const ad::NodeId rec = ad::loss_rec(graph, out.recon, x);
  const ad::NodeId diff = ad::loss_diff(graph, out.zi, out.zs);
  const std::vector<double> w = {1.0, flags.dep ? 1.0 : 0.0, flags.rec ? 1.0 : 0.0,
                                 flags.diff ? 1.0 : 0.0};
  LocalLoss result{};
  result.total = ad::weighted_sum(graph, {cls, dep, rec, diff}, w);
  auto& t = result.terms;
  t.raw.cls = graph.value(cls)[0];
  t.raw.dep = graph.value(dep)[0];
  t.raw.rec = graph.value(rec)[0];
  t.raw.diff = graph.value(diff)[0];
  t.cls = t.raw.cls;
  t.dep = w[1] * t.raw.dep;
  t.rec = w[2] * t.raw.rec;
  t.diff = w[3] * t.raw.diff;
  t.total = graph.value(result.total)[0];
  return result;
}

const ParameterSet& model_params(const AnyModel& m) {
  return std::visit([](const auto& v) -> const ParameterSet& { return v.params(); }, m);
}

ParameterSet& model_params(AnyModel& m) {
  return std::visit([](auto& v) -> ParameterSet& { return v.params(); }, m);
}

Tensor model_predict(const AnyModel& m, const Tensor& images) {
  return std::visit([&](const auto& v) { return v.predict(images); }, m);
}

LocalLoss model_objective(const AnyModel& m, ad::Graph& graph, const Batch& batch,
                          const LossFlags& flags) {
  const ad::NodeId x = graph.constant(batch.images);
  const ad::NodeId y = graph.constant(batch.labels);
  if (const auto* mono = std::get_if<MonolithicModel>(&m)) {
    const ad::NodeId p = mono->forward(x, graph);
    LocalLoss result{};
    result.total = ad::loss_cls(graph, p, y);
    result.terms.cls = result.terms.raw.cls = result.terms.total = graph.value(result.total)[0];
    return result;
  }
  const auto& dis = std::get<DisentangledModel>(m);
  const ad::NodeId depth = graph.constant(batch.depth);
  return total_local_loss(graph, disentangled_forward(dis, x, graph), x, y, depth, flags);
}

}  // namespace fedpad
