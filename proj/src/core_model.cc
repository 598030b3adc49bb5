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

#include "nrf/core_model.h"

#include <cmath>
#include <map>
#include <sstream>

#include "nrf/error.h"

namespace nrf {

ClassSchema::ClassSchema(std::vector<std::string> entity_names)
    : entity_names_(std::move(entity_names)) {}

ClassSchema ClassSchema::FromClassNames(std::span<const std::string> names,
                                        std::vector<std::size_t>* canonical_index) {
  std::vector<std::string> entities;
  struct Parsed {
    char prefix;
    std::size_t entity;
  };
  std::vector<Parsed> parsed;
  parsed.reserve(names.size());
  bool seen_outside = false;
  for (const auto& name : names) {
    if (name == "O") {
      if (seen_outside) throw Error(ErrorCode::kParseError, "duplicate class \"O\"");
      seen_outside = true;
      parsed.push_back({'O', 0});
      continue;
    }
    if (name.empty() || (name[0] != 'B' && name[0] != 'I') ||
        (name.size() > 1 && name[1] != '-') || name.size() == 2) {
      throw Error(ErrorCode::kParseError, "unrecognized class name \"" + name + "\"");
    }
    std::string entity = name.size() > 2 ? name.substr(2) : std::string();
    std::size_t index = 0;
    while (index < entities.size() && entities[index] != entity) ++index;
    if (index == entities.size()) entities.push_back(entity);
    parsed.push_back({name[0], index});
  }
  if (!seen_outside) throw Error(ErrorCode::kParseError, "class list has no \"O\"");
  if (entities.empty()) throw Error(ErrorCode::kParseError, "class list has no entity classes");

  ClassSchema schema(entities);
  std::vector<std::size_t> mapping;
  std::vector<bool> seen(schema.num_classes(), false);
  for (const auto& p : parsed) {
    std::size_t k = p.prefix == 'O'   ? kOutside
                    : p.prefix == 'B' ? BeginIndex(p.entity)
                                      : InsideIndex(p.entity);
    if (seen[k]) {
      throw Error(ErrorCode::kParseError, "duplicate class \"" + schema.ClassName(k) + "\"");
    }
    seen[k] = true;
    mapping.push_back(k);
  }
  for (std::size_t k = 0; k < seen.size(); ++k) {
    if (!seen[k]) {
      throw Error(ErrorCode::kParseError,
                  "class list is missing \"" + schema.ClassName(k) + "\"");
    }
  }
  if (canonical_index != nullptr) *canonical_index = std::move(mapping);
  return schema;
}

std::optional<std::size_t> ClassSchema::EntityIndex(std::string_view name) const {
  for (std::size_t e = 0; e < entity_names_.size(); ++e) {
    if (entity_names_[e] == name) return e;
  }
  return std::nullopt;
}

std::string ClassSchema::ClassName(std::size_t k) const {
  if (k == kOutside) return "O";
  const std::string prefix = IsBegin(k) ? "B" : "I";
  const std::string& entity = entity_names_.at(EntityOf(k));
  return entity.empty() ? prefix : prefix + "-" + entity;
}

std::string ClassSchema::TagName(std::size_t k) const {
  if (k == kOutside) return "O-tag";
  const std::string prefix = IsBegin(k) ? "B" : "I";
  if (entity_names_.size() == 1) return prefix + "-tag";
  return prefix + "-" + entity_names_.at(EntityOf(k)) + "-tag";
}

std::string_view LabelName(Label label) {
  return label == Label::kStrong ? "strong" : "weak";
}

std::optional<Label> ParseLabel(std::string_view text) {
  if (text == "strong") return Label::kStrong;
  if (text == "weak") return Label::kWeak;
  return std::nullopt;
}

std::size_t Argmax(std::span<const double> probs) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < probs.size(); ++k) {
    if (probs[k] > probs[best]) best = k;
  }
  return best;
}

std::vector<std::size_t> ArgmaxTags(const Chunk& chunk) {
  std::vector<std::size_t> tags;
  tags.reserve(chunk.size());
  for (const auto& token : chunk.tokens) tags.push_back(Argmax(token.probs));
  return tags;
}

const Chunk& ValidateChunk(const Chunk& chunk) {
  if (chunk.tokens.empty()) {
    throw Error(ErrorCode::kInvalidChunk, "chunk \"" + chunk.id + "\" has no tokens");
  }
  const std::size_t num_classes = chunk.schema.num_classes();
  for (std::size_t t = 0; t < chunk.tokens.size(); ++t) {
    const TokenPrediction& token = chunk.tokens[t];
    if (token.position != t) {
      std::ostringstream msg;
      msg << "chunk \"" << chunk.id << "\" token " << t << " has position "
          << token.position;
      throw Error(ErrorCode::kInvalidChunk, msg.str());
    }
    if (token.probs.size() != num_classes) {
      std::ostringstream msg;
      msg << "chunk \"" << chunk.id << "\" token " << t << " has " << token.probs.size()
          << " probabilities, expected " << num_classes;
      throw Error(ErrorCode::kInvalidChunk, msg.str());
    }
    double sum = 0.0;
    for (double p : token.probs) {
      if (!(p >= 0.0 && p <= 1.0)) {
        std::ostringstream msg;
        msg << "chunk \"" << chunk.id << "\" token " << t << " probability " << p;
        throw Error(ErrorCode::kProbabilityOutOfRange, msg.str());
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kProbabilitySumTolerance) {
      std::ostringstream msg;
      msg << "chunk \"" << chunk.id << "\" token " << t << " probabilities sum to " << sum;
      throw Error(ErrorCode::kProbabilitySumViolation, msg.str());
    }
  }
  return chunk;
}

std::string JoinTokens(const Chunk& chunk, std::size_t start, std::size_t end) {
  std::string out;
  for (std::size_t t = start; t <= end && t < chunk.size(); ++t) {
    std::string_view piece = chunk.tokens[t].text;
    if (piece.starts_with("##") && !out.empty()) {
      out.append(piece.substr(2));
      continue;
    }
    if (!out.empty()) out.push_back(' ');
    out.append(piece);
  }
  return out;
}

std::vector<EntitySpan> DecodeSpans(const Chunk& chunk, OrphanPolicy policy) {
  std::vector<EntitySpan> spans;
  const auto tags = ArgmaxTags(chunk);
  std::optional<EntitySpan> open;
  auto close = [&] {
    if (open) {
      open->text = JoinTokens(chunk, open->start, open->end);
      spans.push_back(std::move(*open));
      open.reset();
    }
  };
  auto start_at = [&](std::size_t t, std::size_t entity) {
    EntitySpan span;
    span.chunk_id = chunk.id;
    span.entity_index = entity;
    span.entity_type = chunk.schema.entity_names()[entity];
    span.start = span.end = span.anchor = t;
    open = std::move(span);
  };

  for (std::size_t t = 0; t < tags.size(); ++t) {
    const std::size_t k = tags[t];
    if (k == ClassSchema::kOutside) {
      close();
    } else if (ClassSchema::IsBegin(k)) {
      close();
      start_at(t, ClassSchema::EntityOf(k));
    } else if (open && open->entity_index == ClassSchema::EntityOf(k)) {
      open->end = t;
    } else {
      close();
      if (policy == OrphanPolicy::kPromote) start_at(t, ClassSchema::EntityOf(k));
    }
  }
  close();
  return spans;
}

}  // namespace nrf
