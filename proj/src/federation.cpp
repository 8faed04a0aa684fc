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

#include "fedpad/federation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include "fedpad/binary_io.hpp"
#include "fedpad/error.hpp"

namespace fedpad {

// --- ModelUpdate -----------------------------------------------------------

std::vector<std::uint8_t> ModelUpdate::encode() const {
  io::ByteWriter w;
  w.u32(kMagic);
  w.u32(kVersion);
  w.u64(round);
  w.u64(data_center);
  w.u64(entries.size());
  for (const auto& e : entries.entries()) {
    w.str(e.name);
    w.shape(e.value.shape());
    w.values(e.value);
  }
  w.checksum();
  return w.take();
}

ModelUpdate ModelUpdate::decode(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  if (r.u32() != kMagic) throw ParseError("not a model update (bad magic)", 0);
  if (const auto v = r.u32(); v != kVersion) {
    throw ParseError("unsupported model update version " + std::to_string(v), 4);
  }
  ModelUpdate u;
  u.round = r.u64();
  u.data_center = r.u64();
  const std::size_t count_at = r.offset();
  const std::uint64_t count = r.u64();
  if (count > r.remaining()) throw ParseError("entry count exceeds record size", count_at);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t name_at = r.offset();
    std::string name = r.str();
    const Shape shape = r.shape();
    Tensor value = r.tensor(shape);
    if (name.empty() || u.entries.contains(name)) {
      throw ParseError("empty or duplicate entry name '" + name + "'", name_at);
    }
    u.entries.add(std::move(name), std::move(value), Partition::kInvariant);
  }
  r.verify_checksum();
  r.expect_end();
  return u;
}

// --- aggregate -------------------------------------------------------------

ParameterSet aggregate(const std::vector<ModelUpdate>& updates) {
  if (updates.empty()) throw ProtocolError("aggregate: no updates (K = 0)");
  const ModelUpdate& first = updates.front();
  for (const auto& u : updates) {
    if (u.round != first.round) {
      throw VersionError("aggregate: update from data center " + std::to_string(u.data_center) +
                         " is for round " + std::to_string(u.round) + ", expected " +
                         std::to_string(first.round));
    }
    if (!u.entries.same_layout(first.entries)) {
      throw VersionError("aggregate: data center " + std::to_string(u.data_center) +
                         " sent a different key set or shapes");
    }
  }
  const std::size_t k = updates.size();
  const double inv_k = 1.0 / static_cast<double>(k);
  ParameterSet out = first.entries.zeros_like();
  std::vector<double> column(k);
  for (std::size_t e = 0; e < out.size(); ++e) {
    Tensor& dst = out.entries()[e].value;
    for (std::size_t j = 0; j < dst.size(); ++j) {
      for (std::size_t i = 0; i < k; ++i) column[i] = updates[i].entries.entries()[e].value[j];
      std::sort(column.begin(), column.end());
      // Shifted mean: exact for identical inputs, order-free after sorting.
      double acc = 0.0;
      for (std::size_t i = 1; i < k; ++i) acc += column[i] - column[0];
      dst[j] = column[0] + acc * inv_k;
    }
  }
  return out;
}

const char* aggregation_mode_name(AggregationMode mode) noexcept {
  return mode == AggregationMode::kFull ? "full" : "invariant_only";
}

// --- DataCenter ------------------------------------------------------------

DataCenter::DataCenter(DomainDataset dataset, AnyModel model, nn::Optimizer optimizer,
                       LocalTraining training, Rng rng)
    : dataset_(std::move(dataset)),
      model_(std::move(model)),
      optimizer_(std::move(optimizer)),
      training_(training),
      rng_(rng) {
  if (training_.batch_size == 0) throw ConfigError("data center: batch_size must be positive");
}

std::string DataCenter::reader_tag() const { return "dc:" + std::to_string(id()); }

void DataCenter::train_local(std::uint64_t round) {
  if (dataset_.empty()) {
    throw ProtocolError("data center " + std::to_string(id()) + " has an empty dataset");
  }
  report_ = DataCenterReport{id(), 0, {}};
  const std::size_t n = dataset_.size();
  const std::size_t bs = std::min(training_.batch_size, n);
  ParameterSet& params = model_params(model_);
  LossTerms acc{};
  for (std::size_t e = 0; e < training_.local_epochs; ++e) {
    // Keyed by the global epoch index so the shuffle is independent of how
    // epochs are split into rounds.
    const std::uint64_t epoch = round * training_.local_epochs + e;
    Rng shuffle = rng_.fork("epoch", epoch);
    const std::vector<std::size_t> order = shuffle.permutation(n);
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t len = std::min(bs, n - start);
      const Batch batch = dataset_.gather(std::span(order).subspan(start, len), reader_tag());
      ad::Graph graph;
      const LocalLoss loss = model_objective(model_, graph, batch, training_.flags);
      if (!std::isfinite(loss.terms.total)) {
        throw NumericError("data center " + std::to_string(id()) + ": non-finite loss in round " +
                           std::to_string(round));
      }
      graph.backward(loss.total);
      optimizer_.step(params, graph.parameter_grads(params));
      acc.cls += loss.terms.cls;
      acc.dep += loss.terms.dep;
      acc.rec += loss.terms.rec;
      acc.diff += loss.terms.diff;
      acc.total += loss.terms.total;
      acc.raw.cls += loss.terms.raw.cls;
      acc.raw.dep += loss.terms.raw.dep;
      acc.raw.rec += loss.terms.raw.rec;
      acc.raw.diff += loss.terms.raw.diff;
      ++report_.steps;
    }
  }
  if (report_.steps > 0) {
    const double s = 1.0 / static_cast<double>(report_.steps);
    LossTerms& m = report_.mean;
    m.cls = acc.cls * s;
    m.dep = acc.dep * s;
    m.rec = acc.rec * s;
    m.diff = acc.diff * s;
    m.total = acc.total * s;
    m.raw.cls = acc.raw.cls * s;
    m.raw.dep = acc.raw.dep * s;
    m.raw.rec = acc.raw.rec * s;
    m.raw.diff = acc.raw.diff * s;
  }
}

ModelUpdate DataCenter::update_full(const ParameterSet& global, std::uint64_t round) {
  if (dataset_.empty()) {
    throw ProtocolError("data center " + std::to_string(id()) + " has an empty dataset");
  }
  ParameterSet& params = model_params(model_);
  if (global.size() != params.size()) {
    throw VersionError("data center " + std::to_string(id()) + ": global model has " +
                       std::to_string(global.size()) + " entries, local model " +
                       std::to_string(params.size()));
  }
  params.assign(global);
  train_local(round);
  return ModelUpdate{id(), round, params};
}

ModelUpdate DataCenter::update_invariant(const ParameterSet& global_invariant,
                                         std::uint64_t round) {
  if (!std::holds_alternative<DisentangledModel>(model_)) {
    throw ProtocolError("invariant-only updates need a disentangled model");
  }
  if (dataset_.empty()) {
    throw ProtocolError("data center " + std::to_string(id()) + " has an empty dataset");
  }
  ParameterSet& params = model_params(model_);
  const ParameterSet invariant = params.subset(Partition::kInvariant);
  for (const auto& e : global_invariant.entries()) {
    if (params.contains(e.name) && params.partition(e.name) == Partition::kSpecific) {
      throw PartitionError("download carries domain-specific entry '" + e.name + "'");
    }
  }
  if (global_invariant.size() != invariant.size()) {
    throw VersionError("data center " + std::to_string(id()) + ": expected " +
                       std::to_string(invariant.size()) + " invariant entries, got " +
                       std::to_string(global_invariant.size()));
  }
  params.assign(global_invariant);
  train_local(round);
  return ModelUpdate{id(), round, params.subset(Partition::kInvariant)};
}

// --- Server ----------------------------------------------------------------

Server::Server(const ParameterSet& initial, AggregationMode mode)
    : global_(mode == AggregationMode::kFull ? initial : initial.subset(Partition::kInvariant)),
      mode_(mode) {
  if (global_.empty()) throw ConfigError("server: initial model has no shareable parameters");
}

void Server::apply(const std::vector<ModelUpdate>& updates) {
  if (updates.empty()) throw ProtocolError("server: round " + std::to_string(round_) + " has no updates");
  for (const auto& u : updates) {
    if (u.round != round_) {
      throw VersionError("server: update for round " + std::to_string(u.round) +
                         " during round " + std::to_string(round_));
    }
    for (const auto& e : u.entries.entries()) {
      if (!global_.contains(e.name)) {
        if (mode_ == AggregationMode::kInvariantOnly) {
          throw PartitionError("data center " + std::to_string(u.data_center) +
                               " uploaded non-shared entry '" + e.name + "'");
        }
        throw VersionError("data center " + std::to_string(u.data_center) +
                           " uploaded unknown entry '" + e.name + "'");
      }
    }
    if (!u.entries.same_layout(global_)) {
      throw VersionError("data center " + std::to_string(u.data_center) +
                         " uploaded a layout that differs from the global model");
    }
  }
  const ParameterSet mean = aggregate(updates);
  global_.assign(mean);
  ++round_;
}

ParameterSet user_artifact(const ParameterSet& global, AggregationMode mode) {
  if (mode == AggregationMode::kFull) return global;
  return global.with_prefixes({kInvariantExtractor, kClassifier});
}

// --- run_rounds ------------------------------------------------------------

FederationResult run_rounds(Server& server, std::vector<DataCenter>& data_centers,
                            std::size_t rounds, const FederationOptions& options) {
  if (rounds == 0) throw ConfigError("run_rounds: need at least one round");
  if (data_centers.empty()) throw ProtocolError("run_rounds: no data centers");
  FederationResult result;
  const std::size_t k = data_centers.size();
  for (std::size_t t = 0; t < rounds; ++t) {
    const std::uint64_t round = server.round();
    const ParameterSet broadcast = server.global();
    std::vector<std::vector<std::uint8_t>> wire(k);
    std::vector<std::exception_ptr> failures(k);

    auto work = [&](std::size_t i) {
      try {
        DataCenter& dc = data_centers[i];
        const ModelUpdate u = server.mode() == AggregationMode::kFull
                                  ? dc.update_full(broadcast, round)
                                  : dc.update_invariant(broadcast, round);
        wire[i] = u.encode();
      } catch (...) {
        failures[i] = std::current_exception();
      }
    };
    if (options.concurrent && k > 1) {
      std::vector<std::thread> threads;
      threads.reserve(k);
      for (std::size_t i = 0; i < k; ++i) threads.emplace_back(work, i);
      for (auto& th : threads) th.join();
    } else {
      for (std::size_t i = 0; i < k; ++i) work(i);
    }
    for (std::size_t i = 0; i < k; ++i) {
      if (!failures[i]) continue;
      std::string why = "unknown error";
      try {
        std::rethrow_exception(failures[i]);
      } catch (const std::exception& e) {
        why = e.what();
      } catch (...) {
      }
      throw ProtocolError("round " + std::to_string(round) + " aborted: data center " +
                          std::to_string(data_centers[i].id()) + " failed: " + why);
    }

    RoundTelemetry tel;
    tel.round = round;
    std::vector<ModelUpdate> updates;
    updates.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
      tel.upload_bytes += wire[i].size();
      updates.push_back(ModelUpdate::decode(wire[i]));
      tel.data_centers.push_back(data_centers[i].last_report());
    }
    server.apply(updates);
    const auto global_bytes = ModelUpdate{ModelUpdate::kServerId, round, server.global()}.encode();
    tel.aggregate_checksum = io::checksum(global_bytes);
    if (options.checkpoint_dir) {
      std::filesystem::create_directories(*options.checkpoint_dir);
      io::write_file(*options.checkpoint_dir / ("round_" + std::to_string(round) + ".bin"),
                     global_bytes);
    }
    result.rounds.push_back(std::move(tel));
  }
  result.global = server.global();
  return result;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& global,
                     std::uint64_t round) {
  io::write_file(path, ModelUpdate{ModelUpdate::kServerId, round, global}.encode());
}

ModelUpdate load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return ModelUpdate::decode(bytes);
}

}  // namespace fedpad
