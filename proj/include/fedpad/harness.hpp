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

#ifndef FEDPAD_HARNESS_HPP_
#define FEDPAD_HARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedpad/datagen.hpp"
#include "fedpad/metrics.hpp"
#include "fedpad/models.hpp"
#include "fedpad/nn.hpp"

namespace fedpad {

enum class Mode { kSingle, kFused, kAll, kFedPad, kFedGPad };

const char* mode_name(Mode mode) noexcept;
/// Throws ConfigError for an unknown name.
Mode parse_mode(const std::string& name);

struct OptimizerConfig {
  std::string kind = "adam";  // "adam" or "sgd"
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  nn::Optimizer make() const;
};

struct SyntheticSource {
  std::size_t num_domains = 3;     // training domains; the held-out domain gets id num_domains
  std::size_t per_domain = 160;
  std::size_t held_out_size = 400;
  FamilyRecipe recipe;
};

struct DataSource {
  bool synthetic = true;
  SyntheticSource generator;
  std::vector<std::string> paths;  // dataset directories when not synthetic
};

/**
 * Everything that determines one experiment.
 *
 * JSON layout (every key optional, unknown keys rejected):
 *   mode, seed, user_domain, train_domains, rounds, local_epochs,
 *   batch_size (0 picks 16, or 8 for fedgpad), concurrent, output_dir,
 *   optimizer {kind, lr, beta1, beta2, eps},
 *   model {image_h, image_w, channels, conv1, conv2, depth_h, depth_w,
 *          decoder_channels},
 *   ablation {diff, rec, dep},
 *   data {source: "synthetic" | "paths", paths, num_domains, per_domain,
 *         held_out_size, recipe {...FamilyRecipe fields, signal {...}}}
 */
struct ExperimentConfig {
  Mode mode = Mode::kFedGPad;
  std::uint64_t seed = 1;
  DataSource data;
  /// Defaults to the synthetic held-out domain; required for path data.
  std::optional<std::uint32_t> user_domain;
  /// Empty means every domain except the user domain.
  std::vector<std::uint32_t> train_domains;
  std::size_t rounds = 40;
  std::size_t local_epochs = 1;
  std::size_t batch_size = 0;
  OptimizerConfig optimizer;
  ModelConfig model;
  LossFlags ablation;
  /// Run data centers on separate threads. Never changes results.
  bool concurrent = false;
  std::string output_dir = "out";

  std::size_t effective_batch_size() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

/// 16 hex digits over every field that can change results (everything but
/// output_dir and concurrent).
std::string config_hash(const ExperimentConfig& cfg);

struct TelemetryRow {
  std::uint64_t round = 0;
  std::uint32_t data_center = 0;
  double cls = 0.0;
  double dep = 0.0;
  double rec = 0.0;
  double diff = 0.0;
};

struct RunRecord {
  std::string config_hash;
  nlohmann::json config;
  Mode mode = Mode::kFedGPad;
  std::uint32_t user_domain = 0;
  std::vector<std::uint32_t> train_domains;
  std::vector<TelemetryRow> telemetry;
  metrics::EvalReport report;
  double wall_seconds = 0.0;
};

/// Generated family (training ids first, held-out last) or loaded paths.
std::vector<DomainDataset> load_domains(const ExperimentConfig& cfg);

/// Trains and evaluates per cfg.mode on already materialized domains.
/// Throws ConfigError for mode/domain mismatches before any training.
/// When `audit` is set every dataset read is logged to it.
RunRecord run_on(const ExperimentConfig& cfg, const std::vector<DomainDataset>& training,
                 const DomainDataset& user, std::shared_ptr<AccessLog> audit = nullptr);

/// Resolves domains from cfg and calls run_on.
RunRecord run(const ExperimentConfig& cfg, std::shared_ptr<AccessLog> audit = nullptr);

struct SweepResult {
  std::vector<RunRecord> runs;
  std::string summary;
};

/// One run per domain in `domains` acting as the user, the others as data
/// centers. Writes per-run outputs and summary.csv into cfg.output_dir and
/// reuses runs whose record already exists there (matched by config hash).
/// Throws ConfigError for fewer than two domains.
SweepResult sweep_leave_one_out(const ExperimentConfig& base, std::vector<std::uint32_t> domains);

/// "mode,user_domain,hter,eer,auc"; with `average`, one "avg" row per mode.
std::string summary_csv(const std::vector<RunRecord>& runs, bool average);
/// "round,dc,L_Cls,L_Dep,L_Rec,L_Diff"
std::string telemetry_csv(const std::vector<TelemetryRow>& rows);

nlohmann::json record_to_json(const RunRecord& r);
RunRecord record_from_json(const nlohmann::json& j);

/// summary.csv, report_<d>.csv, roc_<d>.csv, telemetry.csv and
/// runs/<hash>.json under `dir`.
void write_run_outputs(const RunRecord& r, const std::filesystem::path& dir);

/// Every runs/*.json under `dir`, sorted by (mode, user domain, hash).
std::vector<RunRecord> load_records(const std::filesystem::path& dir);

/// Re-renders summary.csv and roc_<d>.csv from stored records, optionally
/// restricted to one mode. Returns the number of records rendered.
std::size_t render_report(const std::filesystem::path& dir, std::optional<Mode> only = std::nullopt);

}  // namespace fedpad

#endif  // FEDPAD_HARNESS_HPP_
