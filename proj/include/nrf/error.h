// Copyright 2026 The nrfilter Authors.
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

#ifndef NRF_ERROR_H_
#define NRF_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace nrf {

enum class ErrorCode {
  kIoError,
  kParseError,
  kInvalidChunk,
  kProbabilityOutOfRange,
  kProbabilitySumViolation,
  kNonPositiveDecayRate,
  kAnchorOutOfRange,
  kNonPositiveTemperature,
  kInvalidConfig,
  kPassMisalignment,
  kEmptyNode,
  kSingleClassTrainingSet,
  kSchemaMismatch,
  kChunkIdMismatch,
  kCountInflation,
};

// Stable name used in messages ("ProbabilitySumViolation", ...).
std::string_view ErrorName(ErrorCode code);

// Process exit code for the CLI; distinct and nonzero per error class.
int ExitCodeFor(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorName(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  // The message without the error-name prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace nrf

#endif  // NRF_ERROR_H_
