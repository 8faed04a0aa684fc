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

#include "fedpad/parameter_set.hpp"

#include <algorithm>
#include <cmath>

#include "fedpad/error.hpp"

namespace fedpad {

const char* partition_name(Partition p) noexcept {
  return p == Partition::kInvariant ? "invariant" : "specific";
}

void ParameterSet::add(std::string name, Tensor value, Partition partition) {
  if (name.empty()) throw ParameterError("parameter name must not be empty");
  if (contains(name)) throw ParameterError("duplicate parameter name '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.push_back(Entry{std::move(name), std::move(value), partition});
}

const Tensor& ParameterSet::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ParameterError("unknown parameter '" + name + "'");
  return entries_[it->second].value;
}

Tensor& ParameterSet::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ParameterError("unknown parameter '" + name + "'");
  return entries_[it->second].value;
}

Partition ParameterSet::partition(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ParameterError("unknown parameter '" + name + "'");
  return entries_[it->second].partition;
}

std::vector<std::string> ParameterSet::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

std::size_t ParameterSet::num_values() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

ParameterSet ParameterSet::subset(Partition partition) const {
  ParameterSet out;
  for (const auto& e : entries_) {
    if (e.partition == partition) out.add(e.name, e.value, e.partition);
  }
  return out;
}

ParameterSet ParameterSet::with_prefixes(const std::vector<std::string>& prefixes) const {
  ParameterSet out;
  for (const auto& e : entries_) {
    const bool hit = std::any_of(prefixes.begin(), prefixes.end(), [&](const std::string& p) {
      return e.name.compare(0, p.size(), p) == 0;
    });
    if (hit) out.add(e.name, e.value, e.partition);
  }
  return out;
}

void ParameterSet::assign(const ParameterSet& source) {
  for (const auto& e : source.entries()) {
    auto it = index_.find(e.name);
    if (it == index_.end()) {
      throw VersionError("parameter '" + e.name + "' is not part of this model");
    }
    Tensor& dst = entries_[it->second].value;
    if (dst.shape() != e.value.shape()) {
      throw VersionError("parameter '" + e.name + "' has shape " +
                         shape_str(e.value.shape()) + ", expected " +
                         shape_str(dst.shape()));
    }
    dst = e.value;
  }
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out;
  for (const auto& e : entries_) out.add(e.name, Tensor(e.value.shape()), e.partition);
  return out;
}

bool ParameterSet::same_layout(const ParameterSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name != other.entries_[i].name ||
        entries_[i].value.shape() != other.entries_[i].value.shape()) {
      return false;
    }
  }
  return true;
}

bool operator==(const ParameterSet& a, const ParameterSet& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    const auto& x = a.entries_[i];
    const auto& y = b.entries_[i];
    if (x.name != y.name || x.partition != y.partition || !(x.value == y.value)) return false;
  }
  return true;
}

double max_abs_diff(const ParameterSet& a, const ParameterSet& b) {
  if (!a.same_layout(b)) throw VersionError("parameter sets have different layouts");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a.entries()[i].value;
    const auto& y = b.entries()[i].value;
    for (std::size_t j = 0; j < x.size(); ++j) worst = std::max(worst, std::abs(x[j] - y[j]));
  }
  return worst;
}

}  // namespace fedpad
