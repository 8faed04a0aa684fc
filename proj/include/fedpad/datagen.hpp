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

#ifndef FEDPAD_DATAGEN_HPP_
#define FEDPAD_DATAGEN_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "fedpad/models.hpp"
#include "fedpad/rng.hpp"
#include "fedpad/tensor.hpp"

namespace fedpad {

inline constexpr int kSpoof = 0;
inline constexpr int kReal = 1;

/// image: [h x w x 6] with RGB in channels 0-2 and HSV in 3-5, all in [0, 1].
/// depth: [dh x dw], all zeros exactly when label is spoof.
struct Sample {
  Tensor image;
  int label = kSpoof;
  Tensor depth;

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Standard RGB -> HSV on [h x w x 3] input with hue scaled to [0, 1).
/// Throws RangeError for values outside [0, 1].
Tensor rgb_to_hsv(const Tensor& rgb);

/// Liveness cues shared by every domain of a family.
struct SignalSpec {
  double face_level = 0.45;       // mean face intensity
  double real_relief = 0.22;      // radial shading bump of live faces
  double spoof_relief = 0.14;     // flattened shading left on a print/replay
  double grid_amplitude = 0.01;   // high-frequency display/print artifact
  double bump_sigma = 3.5;        // pixels
  double amp_lo = 0.6;            // per-sample relief scale range
  double amp_hi = 1.0;
  std::array<double, 3> skin_tone{1.2, 1.0, 0.75};  // per-channel multiplier of face intensity

  friend bool operator==(const SignalSpec&, const SignalSpec&) = default;
};

/// Domain-specific nuisances.
struct DomainRecipe {
  std::uint32_t domain_id = 0;
  std::array<double, 3> color_shift{};  // added to every pixel
  std::array<double, 3> spoof_tint{};   // added to spoof pixels only
  std::uint32_t texture_id = 0;
  double texture_amplitude = 0.0;
  // Device moire on spoofs: sin(freq * (x cos a + y sin a) + random phase).
  double moire_amplitude = 0.0;
  double moire_frequency = 0.0;  // radians per pixel
  double moire_angle = 0.0;
  double illumination_gain = 1.0;
  double noise_std = 0.0;

  friend bool operator==(const DomainRecipe&, const DomainRecipe&) = default;
};

/// Knobs that shape the nuisance draws of a family.
struct FamilyRecipe {
  SignalSpec signal;
  std::size_t image_h = 16;
  std::size_t image_w = 16;
  std::size_t depth_h = 4;
  std::size_t depth_w = 4;
  double tint_magnitude = 0.12;
  double tint_spread = 0.6;         // random component mixed into the shared tint axis
  double held_out_tint = 0.0;       // along the shared tint axis, in tint_magnitude units
  double color_shift_max = 0.08;
  double gain_lo = 0.8;
  double gain_hi = 1.0;
  double held_out_gain = 1.15;
  double noise_lo = 0.02;
  double noise_hi = 0.04;
  double held_out_noise = 0.05;
  double texture_amplitude = 0.08;
  double moire_amplitude = 0.0;      // training spoofs; the held-out domain has none
  double moire_freq_lo = 1.0;
  double moire_freq_hi = 2.2;
  std::uint32_t training_textures = 8;  // training domains pick ids below this

  friend bool operator==(const FamilyRecipe&, const FamilyRecipe&) = default;
};

/// Records which reader touched which domain. Attach to datasets to audit
/// that no data center reads a foreign domain.
class AccessLog {
 public:
  void record(const std::string& reader, std::uint32_t domain_id, std::size_t count);
  /// reader -> domain id -> number of samples read.
  std::map<std::string, std::map<std::uint32_t, std::size_t>> snapshot() const;
  void clear();

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::map<std::uint32_t, std::size_t>> reads_;
};

/// Labeled samples of one simulated data center.
class DomainDataset {
 public:
  DomainDataset() = default;
  DomainDataset(std::uint32_t domain_id, std::vector<Sample> samples, DomainRecipe recipe = {});

  std::uint32_t domain_id() const noexcept { return domain_id_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  const DomainRecipe& recipe() const noexcept { return recipe_; }
  std::size_t count(int label) const;

  /// Direct access for tooling and tests; training code goes through gather().
  const std::vector<Sample>& samples() const noexcept { return samples_; }

  /// Stacks the indexed samples into a batch and logs the read.
  Batch gather(std::span<const std::size_t> indices, const std::string& reader) const;
  /// Whole dataset as one batch.
  Batch all(const std::string& reader) const;

  void attach_audit(std::shared_ptr<AccessLog> log) { audit_ = std::move(log); }

  /// Throws SchemaError for a bad label, a depth/label mismatch, channel
  /// values outside [0, 1], inconsistent shapes, or a missing class.
  void validate() const;

  friend bool operator==(const DomainDataset& a, const DomainDataset& b) {
    return a.domain_id_ == b.domain_id_ && a.samples_ == b.samples_ && a.recipe_ == b.recipe_;
  }

 private:
  std::uint32_t domain_id_ = 0;
  std::vector<Sample> samples_;
  DomainRecipe recipe_;
  std::shared_ptr<AccessLog> audit_;
};

/// K training domains followed by one held-out (user) domain with id K.
struct DomainFamily {
  std::vector<DomainDataset> training;
  DomainDataset held_out;
};

/// Recipe of training domain `index`; depends only on (seed, index).
DomainRecipe training_recipe(const FamilyRecipe& family, std::uint64_t seed, std::uint32_t index);
/// Held-out recipe; depends only on seed and lies outside the range of every
/// training draw (gain, noise, texture id and tint).
DomainRecipe held_out_recipe(const FamilyRecipe& family, std::uint64_t seed, std::uint32_t id);

DomainDataset generate_domain(const FamilyRecipe& family, const DomainRecipe& recipe,
                              std::size_t n, std::uint64_t seed);

/// Throws ParameterError unless k >= 1 and n >= 4.
DomainFamily generate_family(std::size_t k, std::size_t n, const FamilyRecipe& recipe,
                             std::uint64_t seed, std::size_t held_out_n = 0);

/// Concatenation in argument order under a new id (for the pooled baseline).
DomainDataset union_of(const std::vector<const DomainDataset*>& parts, std::uint32_t id);

/// Directory layout: schema.json + samples.bin.
void save_dataset(const DomainDataset& ds, const std::filesystem::path& dir);
DomainDataset load_dataset(const std::filesystem::path& dir);

}  // namespace fedpad

#endif  // FEDPAD_DATAGEN_HPP_
