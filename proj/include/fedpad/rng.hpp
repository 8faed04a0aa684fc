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

#ifndef FEDPAD_RNG_HPP_
#define FEDPAD_RNG_HPP_

#include <cstdint>
#include <string_view>
#include <vector>

#include "fedpad/tensor.hpp"

namespace fedpad {

/// 64-bit finalizer from SplitMix64.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// FNV-1a over a byte string; used to turn stream labels into ids.
std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept;

/**
 * Counter-based generator.
 *
 * The i-th draw is a pure function of (seed, stream_id, i), so two Rng values
 * with equal fields produce identical sequences regardless of which thread
 * runs them or what other streams have done. Sub-streams are derived with
 * `fork`, which never advances the parent.
 */
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream_id) noexcept
      : seed_(seed), stream_(stream_id) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_; }
  std::uint64_t counter() const noexcept { return counter_; }

  /// Independent child stream keyed by a label and an optional index.
  Rng fork(std::string_view label, std::uint64_t index = 0) const noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept;
  double normal(double mean, double stddev) noexcept;
  /// Uniform integer in [0, n); n must be below 2^32.
  std::uint64_t below(std::uint64_t n) noexcept;

  /// Deterministic Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

struct Uniform {
  double lo;
  double hi;
};

struct Normal {
  double mean;
  double stddev;
};

/// Tensor of i.i.d. draws. Throws ParameterError when lo > hi or stddev < 0.
Tensor draw(Rng& rng, Uniform dist, const Shape& shape);
Tensor draw(Rng& rng, Normal dist, const Shape& shape);

}  // namespace fedpad

#endif  // FEDPAD_RNG_HPP_
