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

#include "nrf/error.h"

namespace nrf {

std::string_view ErrorName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kInvalidChunk: return "InvalidChunk";
    case ErrorCode::kProbabilityOutOfRange: return "ProbabilityOutOfRange";
    case ErrorCode::kProbabilitySumViolation: return "ProbabilitySumViolation";
    case ErrorCode::kNonPositiveDecayRate: return "NonPositiveDecayRate";
    case ErrorCode::kAnchorOutOfRange: return "AnchorOutOfRange";
    case ErrorCode::kNonPositiveTemperature: return "NonPositiveTemperature";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kPassMisalignment: return "PassMisalignment";
    case ErrorCode::kEmptyNode: return "EmptyNode";
    case ErrorCode::kSingleClassTrainingSet: return "SingleClassTrainingSet";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kChunkIdMismatch: return "ChunkIdMismatch";
    case ErrorCode::kCountInflation: return "CountInflation";
  }
  return "UnknownError";
}

int ExitCodeFor(ErrorCode code) {
  // 1 is left to usage errors reported by the argument parser.
  return 10 + static_cast<int>(code);
}

}  // namespace nrf
