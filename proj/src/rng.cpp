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

#include "fedpad/rng.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "fedpad/error.hpp"

namespace fedpad {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) noexcept {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Rng Rng::fork(std::string_view label, std::uint64_t index) const noexcept {
  const std::uint64_t child =
      mix64(stream_ ^ mix64(fnv1a64(label) + 0x632be59bd9b4e019ULL * (index + 1)));
  return Rng(seed_, child);
}

std::uint64_t Rng::next_u64() noexcept {
  // Two rounds keep nearby (seed, stream, counter) triples decorrelated.
  const std::uint64_t key = mix64(seed_ ^ mix64(stream_));
  return mix64(key ^ mix64(counter_++ + 0xd1b54a32d192ed03ULL));
}

double Rng::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) noexcept {
  if (lo == hi) {
    ++counter_;
    return lo;
  }
  return lo + (hi - lo) * uniform();
}

double Rng::normal(double mean, double stddev) noexcept {
  // Box-Muller, one output per two uniforms so the counter stays aligned.
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  return mean + stddev * z;
}

std::uint64_t Rng::below(std::uint64_t n) noexcept {
  if (n == 0) return 0;
  // Multiply-shift on the top 32 bits; callers keep n below 2^32.
  return ((next_u64() >> 32) * (n & 0xFFFFFFFFu)) >> 32;
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = below(i);
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

Tensor draw(Rng& rng, Uniform dist, const Shape& shape) {
  if (!(dist.lo <= dist.hi) || !std::isfinite(dist.lo) || !std::isfinite(dist.hi)) {
    throw ParameterError("uniform(lo, hi) requires finite lo <= hi");
  }
  Tensor t(shape);
  for (double& v : t.data()) v = rng.uniform(dist.lo, dist.hi);
  return t;
}

Tensor draw(Rng& rng, Normal dist, const Shape& shape) {
  if (!(dist.stddev >= 0.0) || !std::isfinite(dist.mean) || !std::isfinite(dist.stddev)) {
    throw ParameterError("normal(mean, std) requires finite mean and std >= 0");
  }
  Tensor t(shape);
  for (double& v : t.data()) v = rng.normal(dist.mean, dist.stddev);
  return t;
}

}  // namespace fedpad
