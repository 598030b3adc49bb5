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

#include "nrf/record_io.h"

#include <sstream>

#include "nrf/error.h"

namespace nrf {
namespace {

using nlohmann::json;

const json& Require(const json& object, const char* key) {
  auto it = object.find(key);
  if (it == object.end()) {
    throw Error(ErrorCode::kParseError, std::string("missing field \"") + key + "\"");
  }
  return *it;
}

}  // namespace

Chunk ChunkFromJson(const json& record) {
  if (!record.is_object()) throw Error(ErrorCode::kParseError, "record is not an object");
  try {
    Chunk chunk;
    chunk.id = Require(record, "id").get<std::string>();
    const auto class_names = Require(record, "classes").get<std::vector<std::string>>();
    std::vector<std::size_t> canonical;
    chunk.schema = ClassSchema::FromClassNames(class_names, &canonical);

    const json& tokens = Require(record, "tokens");
    if (!tokens.is_array()) throw Error(ErrorCode::kParseError, "\"tokens\" is not an array");
    chunk.tokens.reserve(tokens.size());
    for (const json& entry : tokens) {
      TokenPrediction token;
      token.text = Require(entry, "text").get<std::string>();
      token.position = chunk.tokens.size();
      const json& probs = Require(entry, "probs");
      if (!probs.is_array() || probs.size() != canonical.size()) {
        std::ostringstream msg;
        msg << "token " << token.position << " has " << probs.size()
            << " probabilities for " << canonical.size() << " classes";
        throw Error(ErrorCode::kParseError, msg.str());
      }
      token.probs.assign(canonical.size(), 0.0);
      for (std::size_t i = 0; i < canonical.size(); ++i) {
        token.probs[canonical[i]] = probs[i].get<double>();
      }
      if (auto it = entry.find("word_id"); it != entry.end() && !it->is_null()) {
        token.word_id = it->get<std::int64_t>();
      }
      chunk.tokens.push_back(std::move(token));
    }

    if (auto it = record.find("label"); it != record.end() && !it->is_null()) {
      const auto text = it->get<std::string>();
      chunk.label = ParseLabel(text);
      if (!chunk.label) throw Error(ErrorCode::kParseError, "unknown label \"" + text + "\"");
    }
    if (auto it = record.find("gold_spans"); it != record.end() && !it->is_null()) {
      std::vector<GoldSpan> gold;
      for (const json& g : *it) {
        GoldSpan span;
        span.start = Require(g, "start").get<std::size_t>();
        span.end = Require(g, "end").get<std::size_t>();
        if (auto type = g.find("type"); type != g.end()) span.entity_type = type->get<std::string>();
        gold.push_back(std::move(span));
      }
      chunk.gold_spans = std::move(gold);
    }
    return chunk;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
}

Chunk ParseChunkLine(std::string_view line, std::size_t line_number) {
  try {
    return ChunkFromJson(json::parse(line));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError,
                "line " + std::to_string(line_number) + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kParseError) {
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_number) + ": " + e.detail());
    }
    throw;
  }
}

json ChunkToJson(const Chunk& chunk) {
  json record;
  record["id"] = chunk.id;
  json classes = json::array();
  for (std::size_t k = 0; k < chunk.schema.num_classes(); ++k) {
    classes.push_back(chunk.schema.ClassName(k));
  }
  record["classes"] = std::move(classes);
  json tokens = json::array();
  for (const auto& token : chunk.tokens) {
    json entry{{"text", token.text}, {"probs", token.probs}};
    if (token.word_id) entry["word_id"] = *token.word_id;
    tokens.push_back(std::move(entry));
  }
  record["tokens"] = std::move(tokens);
  if (chunk.label) record["label"] = LabelName(*chunk.label);
  if (chunk.gold_spans) {
    json gold = json::array();
    for (const auto& g : *chunk.gold_spans) {
      gold.push_back({{"start", g.start}, {"end", g.end}, {"type", g.entity_type}});
    }
    record["gold_spans"] = std::move(gold);
  }
  return record;
}

json SpanToJson(const EntitySpan& span) {
  return {{"type", span.entity_type}, {"start", span.start}, {"end", span.end},
          {"anchor", span.anchor},    {"text", span.text}};
}

JsonlReader::JsonlReader(const std::string& path) : path_(path), in_(path) {
  if (!in_) throw Error(ErrorCode::kIoError, "cannot open \"" + path + "\"");
}

bool JsonlReader::Next(std::string* line) {
  while (std::getline(in_, *line)) {
    ++line_number_;
    if (line->find_first_not_of(" \t\r") != std::string::npos) return true;
  }
  if (in_.bad()) throw Error(ErrorCode::kIoError, "read failure on \"" + path_ + "\"");
  return false;
}

void ForEachChunk(const std::string& path, const std::function<void(Chunk&&)>& fn) {
  JsonlReader reader(path);
  std::string line;
  while (reader.Next(&line)) {
    Chunk chunk = ParseChunkLine(line, reader.line_number());
    try {
      ValidateChunk(chunk);
    } catch (const Error& e) {
      throw Error(e.code(),
                  path + ":" + std::to_string(reader.line_number()) + ": " + e.detail());
    }
    fn(std::move(chunk));
  }
}

std::vector<Chunk> ReadChunks(const std::string& path) {
  std::vector<Chunk> chunks;
  ForEachChunk(path, [&](Chunk&& chunk) { chunks.push_back(std::move(chunk)); });
  return chunks;
}

std::ofstream OpenOutput(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write \"" + path + "\"");
  return out;
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open \"" + path + "\"");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace nrf
