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

#ifndef NRF_LOG_H_
#define NRF_LOG_H_

#include <string_view>

namespace nrf {

enum class LogLevel { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

// Read once from NRF_LOG (error, warn, info, debug); defaults to warn.
LogLevel CurrentLogLevel();

// Writes "[level] message" to stderr when enabled.
void Log(LogLevel level, std::string_view message);

}  // namespace nrf

#endif  // NRF_LOG_H_
