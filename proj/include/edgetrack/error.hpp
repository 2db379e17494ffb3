// Copyright 2026 The edgetrack Authors.
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
#include <string_view>

namespace edgetrack {

enum class ErrorKind {
  kParse,
  kValidation,
  kInvalidConfig,
  kEmptyTruth,
  kEmptyList,
  kFrameOutOfRange,
  kNegativeStaleness,
  kInactiveJob,
  kUnknownModel,
  kTraceExhausted,
  kInvalidAction,
  kDimensionMismatch,
  kBufferTooSmall,
  kConfig,
  kMissingCheckpoint,
  kCheckpoint,
  kCalibrationDiverged,
  kIo,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return "ParseError";
    case ErrorKind::kValidation: return "ValidationError";
    case ErrorKind::kInvalidConfig: return "InvalidConfig";
    case ErrorKind::kEmptyTruth: return "EmptyTruth";
    case ErrorKind::kEmptyList: return "EmptyList";
    case ErrorKind::kFrameOutOfRange: return "FrameOutOfRange";
    case ErrorKind::kNegativeStaleness: return "NegativeStaleness";
    case ErrorKind::kInactiveJob: return "InactiveJob";
    case ErrorKind::kUnknownModel: return "UnknownModel";
    case ErrorKind::kTraceExhausted: return "TraceExhausted";
    case ErrorKind::kInvalidAction: return "InvalidAction";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kBufferTooSmall: return "BufferTooSmall";
    case ErrorKind::kConfig: return "ConfigError";
    case ErrorKind::kMissingCheckpoint: return "MissingCheckpoint";
    case ErrorKind::kCheckpoint: return "CheckpointError";
    case ErrorKind::kCalibrationDiverged: return "CalibrationDiverged";
    case ErrorKind::kIo: return "IoError";
  }
  return "Error";
}

// Every failure raised by the library carries a kind so callers (and tests)
// can branch on it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace edgetrack
