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

#ifndef FEDPAD_PARAMETER_SET_HPP_
#define FEDPAD_PARAMETER_SET_HPP_

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "fedpad/tensor.hpp"

namespace fedpad {

/// Which side of the disentangled model a parameter belongs to. Only
/// invariant entries ever leave a data center in the generalized protocol.
enum class Partition { kInvariant, kSpecific };

const char* partition_name(Partition p) noexcept;

/**
 * Ordered, named collection of tensors.
 *
 * Iteration follows insertion order, names are unique, and every entry
 * carries exactly one partition tag. This is the unit that travels between
 * data centers and the server.
 */
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    Partition partition = Partition::kInvariant;
  };

  void add(std::string name, Tensor value, Partition partition = Partition::kInvariant);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  Partition partition(const std::string& name) const;

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::vector<Entry>& entries() noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::vector<std::string> names() const;
  /// Total number of scalar values across all entries.
  std::size_t num_values() const;

  /// Entries with the given tag, in order.
  ParameterSet subset(Partition partition) const;
  /// Entries whose name starts with one of the prefixes, in order.
  ParameterSet with_prefixes(const std::vector<std::string>& prefixes) const;

  /// Overwrites the values of every entry named in `source`. Throws
  /// VersionError when a name is unknown or a shape differs.
  void assign(const ParameterSet& source);

  /// Zero-filled set with the same names, shapes and tags.
  ParameterSet zeros_like() const;

  /// True when names, order and shapes agree.
  bool same_layout(const ParameterSet& other) const;

  friend bool operator==(const ParameterSet& a, const ParameterSet& b);

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

/// Largest |a - b| over all matching entries; throws VersionError on layout mismatch.
double max_abs_diff(const ParameterSet& a, const ParameterSet& b);

}  // namespace fedpad

#endif  // FEDPAD_PARAMETER_SET_HPP_
