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

#ifndef NRF_RECORD_IO_H_
#define NRF_RECORD_IO_H_

#include <cstddef>
#include <fstream>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "nrf/core_model.h"

namespace nrf {

// JSON Lines record:
//   {"id": str, "classes": [str...],
//    "tokens": [{"text": str, "probs": [f...], "word_id": int?}...],
//    "label": "strong"|"weak"?,
//    "gold_spans": [{"start": int, "end": int, "type": str}...]?}
// Probabilities are permuted into canonical class order on read. Unknown
// fields are ignored. Throws kParseError.
Chunk ChunkFromJson(const nlohmann::json& record);
Chunk ParseChunkLine(std::string_view line, std::size_t line_number);

// Writes classes in canonical order.
nlohmann::json ChunkToJson(const Chunk& chunk);

nlohmann::json SpanToJson(const EntitySpan& span);

// Line-oriented reader that keeps one line in memory at a time.
class JsonlReader {
 public:
  explicit JsonlReader(const std::string& path);

  // Skips blank lines. Returns false at end of file.
  bool Next(std::string* line);
  std::size_t line_number() const { return line_number_; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::size_t line_number_ = 0;
};

// Streams validated chunks to `fn` one record at a time.
void ForEachChunk(const std::string& path, const std::function<void(Chunk&&)>& fn);

std::vector<Chunk> ReadChunks(const std::string& path);

std::ofstream OpenOutput(const std::string& path);
std::string ReadFile(const std::string& path);

}  // namespace nrf

#endif  // NRF_RECORD_IO_H_
