// Copyright 2026 The hsiseg Authors. All Rights Reserved.
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

#pragma once

#include <stdexcept>
#include <string>

namespace hsiseg {

/// Fine-grained failure reason. Each kind maps onto one of the coarse exit
/// categories used by the C API and the command-line tool.
enum class ErrorKind {
  kContract,          // caller violated a precondition
  kConfig,            // invalid model or run configuration
  kParameter,         // out-of-range scalar argument
  kShape,             // tensor or cube extents disagree
  kState,             // object used before it was ready (e.g. no centers)
  kInsufficientData,  // fewer points than the method needs
  kDegenerate,        // degenerate input such as a zero-mass cluster
  kUndefined,         // quantity undefined for the given input
  kIo,                // file missing or unreadable
  kFormat,            // malformed header or payload
  kSizeMismatch,      // payload length disagrees with header
  kNumerical,         // numerical breakdown (singular matrix, non-finite)
};

enum class ErrorCategory { kContract = 1, kIo = 2, kNumerical = 3 };

constexpr ErrorCategory category_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo:
    case ErrorKind::kFormat:
    case ErrorKind::kSizeMismatch:
      return ErrorCategory::kIo;
    case ErrorKind::kNumerical:
      return ErrorCategory::kNumerical;
    default:
      return ErrorCategory::kContract;
  }
}

const char* kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }
  ErrorCategory category() const { return category_of(kind_); }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace hsiseg
