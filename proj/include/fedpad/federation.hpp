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

#ifndef FEDPAD_FEDERATION_HPP_
#define FEDPAD_FEDERATION_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedpad/datagen.hpp"
#include "fedpad/models.hpp"
#include "fedpad/nn.hpp"
#include "fedpad/parameter_set.hpp"
#include "fedpad/rng.hpp"

namespace fedpad {

/**
 * Parameters uploaded by one data center in one round.
 *
 * Wire format (little-endian):
 *   u32 magic "FPMU", u32 version, u64 round, u64 data center id,
 *   u64 entry count, then per entry: u32 name length, name bytes,
 *   u32 rank, u64 dims[rank], f64 values[product(dims)];
 *   trailing u64 FNV-1a checksum of every preceding byte.
 */
struct ModelUpdate {
  static constexpr std::uint32_t kMagic = 0x554d5046;  // "FPMU"
  static constexpr std::uint32_t kVersion = 1;
  static constexpr std::uint64_t kServerId = ~std::uint64_t{0};

  std::uint64_t data_center = 0;
  std::uint64_t round = 0;
  ParameterSet entries;

  std::vector<std::uint8_t> encode() const;
  /// Throws ParseError on truncation, bad magic/version or checksum mismatch.
  /// Decoded entries are tagged invariant.
  static ModelUpdate decode(std::span<const std::uint8_t> bytes);

  friend bool operator==(const ModelUpdate&, const ModelUpdate&) = default;
};

/// Unweighted per-entry mean over all updates. Values at each position are
/// combined in sorted order, so the result does not depend on the order of
/// `updates` and K identical inputs return that input bit for bit.
/// Throws ProtocolError for K = 0 and VersionError when rounds, names or
/// shapes disagree.
ParameterSet aggregate(const std::vector<ModelUpdate>& updates);

enum class AggregationMode { kFull, kInvariantOnly };

const char* aggregation_mode_name(AggregationMode mode) noexcept;

struct LocalTraining {
  std::size_t local_epochs = 1;
  std::size_t batch_size = 16;
  LossFlags flags;
};

/// Per-round mean loss terms of one data center.
struct DataCenterReport {
  std::uint32_t data_center = 0;
  std::size_t steps = 0;
  LossTerms mean;
};

/**
 * A federated client. Owns its dataset (moved in, never shared), a private
 * model clone, optimizer state and rng stream. Optimizer state persists
 * across rounds; only parameters travel.
 */
class DataCenter {
 public:
  DataCenter(DomainDataset dataset, AnyModel model, nn::Optimizer optimizer,
             LocalTraining training, Rng rng);

  std::uint32_t id() const noexcept { return dataset_.domain_id(); }
  const AnyModel& model() const noexcept { return model_; }
  const DomainDataset& dataset() const noexcept { return dataset_; }
  const LocalTraining& training() const noexcept { return training_; }
  /// Loss telemetry of the most recent update call.
  const DataCenterReport& last_report() const noexcept { return report_; }

  /// Full-model local update: load `global`, run L epochs of cross-entropy
  /// minibatch training, upload every parameter.
  ModelUpdate update_full(const ParameterSet& global, std::uint64_t round);

  /// Disentangled local update: overwrite the invariant partition with
  /// `global_invariant`, train every parameter on the local objective for
  /// L epochs, upload the invariant partition only.
  ModelUpdate update_invariant(const ParameterSet& global_invariant, std::uint64_t round);

  /// Runs L epochs from the current parameters without any exchange.
  void train_local(std::uint64_t round);

 private:
  std::string reader_tag() const;

  DomainDataset dataset_;
  AnyModel model_;
  nn::Optimizer optimizer_;
  LocalTraining training_;
  Rng rng_;
  DataCenterReport report_;
};

/// Round-synchronous aggregator. In invariant-only mode the server stores
/// and distributes invariant-tagged entries only.
class Server {
 public:
  Server(const ParameterSet& initial, AggregationMode mode);

  AggregationMode mode() const noexcept { return mode_; }
  const ParameterSet& global() const noexcept { return global_; }
  std::uint64_t round() const noexcept { return round_; }

  /// Validates every update against the stored layout, averages, and
  /// advances the round counter. Throws PartitionError when an update in
  /// invariant-only mode carries an entry the server does not hold.
  void apply(const std::vector<ModelUpdate>& updates);

 private:
  ParameterSet global_;
  AggregationMode mode_;
  std::uint64_t round_ = 0;
};

/// What a user downloads: every parameter in full mode, EI and C only in
/// invariant-only mode.
ParameterSet user_artifact(const ParameterSet& global, AggregationMode mode);

struct RoundTelemetry {
  std::uint64_t round = 0;
  std::vector<DataCenterReport> data_centers;
  std::uint64_t aggregate_checksum = 0;
  std::size_t upload_bytes = 0;
};

struct FederationOptions {
  bool concurrent = false;
  /// When set, the global parameters are written here after every round
  /// as round_<t>.bin in the ModelUpdate format.
  std::optional<std::filesystem::path> checkpoint_dir;
};

struct FederationResult {
  ParameterSet global;
  std::vector<RoundTelemetry> rounds;
};

/// T rounds of broadcast -> local updates -> serialized upload -> aggregate.
/// A failing data center aborts the round before aggregation.
FederationResult run_rounds(Server& server, std::vector<DataCenter>& data_centers,
                            std::size_t rounds, const FederationOptions& options = {});

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& global,
                     std::uint64_t round);
ModelUpdate load_checkpoint(const std::filesystem::path& path);

}  // namespace fedpad

#endif  // FEDPAD_FEDERATION_HPP_
