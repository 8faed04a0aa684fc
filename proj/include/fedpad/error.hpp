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

#ifndef FEDPAD_ERROR_HPP_
#define FEDPAD_ERROR_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fedpad {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error { using Error::Error; };
class ParameterError : public Error { using Error::Error; };
class NumericError : public Error { using Error::Error; };
class LabelError : public Error { using Error::Error; };
class ContractError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class ProtocolError : public Error { using Error::Error; };
class VersionError : public Error { using Error::Error; };
class PartitionError : public Error { using Error::Error; };
class SchemaError : public Error { using Error::Error; };
class RangeError : public Error { using Error::Error; };
class MetricUndefinedError : public Error { using Error::Error; };

/// Malformed binary input. Carries the byte offset at which decoding failed.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace fedpad

#endif  // FEDPAD_ERROR_HPP_
