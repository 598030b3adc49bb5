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

#ifndef NRF_CORE_MODEL_H_
#define NRF_CORE_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nrf {

// Probability vectors arrive rounded from upstream; sums are accepted within
// this tolerance of 1.
inline constexpr double kProbabilitySumTolerance = 1e-4;

// Class layout for E entity types: index 0 is O, entity e owns B at 1 + 2e
// and I at 2 + 2e, so K = 2E + 1.
class ClassSchema {
 public:
  static constexpr std::size_t kOutside = 0;

  ClassSchema() = default;
  explicit ClassSchema(std::vector<std::string> entity_names);

  // Builds a schema from a record's class list, e.g. {"B", "I", "O"} or
  // {"O", "B-Drug", "I-Drug"}. canonical_index[i] receives the canonical
  // class index of names[i]. Throws kParseError on malformed lists.
  static ClassSchema FromClassNames(std::span<const std::string> names,
                                    std::vector<std::size_t>* canonical_index);

  std::size_t num_entities() const { return entity_names_.size(); }
  std::size_t num_classes() const { return 2 * entity_names_.size() + 1; }
  const std::vector<std::string>& entity_names() const { return entity_names_; }

  static std::size_t BeginIndex(std::size_t entity) { return 1 + 2 * entity; }
  static std::size_t InsideIndex(std::size_t entity) { return 2 + 2 * entity; }
  static bool IsBegin(std::size_t k) { return k != kOutside && k % 2 == 1; }
  static bool IsInside(std::size_t k) { return k != kOutside && k % 2 == 0; }
  static std::size_t EntityOf(std::size_t k) { return (k - 1) / 2; }

  std::optional<std::size_t> EntityIndex(std::string_view name) const;

  // "O", "B", "I-Drug", ...: the name used in input records.
  std::string ClassName(std::size_t k) const;
  // "O-tag", "B-tag", "I-Drug-tag": the name used in feature names. A single
  // entity schema uses the unqualified form.
  std::string TagName(std::size_t k) const;

  bool operator==(const ClassSchema&) const = default;

 private:
  std::vector<std::string> entity_names_;
};

struct TokenPrediction {
  std::string text;
  std::size_t position = 0;
  std::vector<double> probs;  // canonical class order
  std::optional<std::int64_t> word_id;
};

enum class Label { kStrong, kWeak };

std::string_view LabelName(Label label);
std::optional<Label> ParseLabel(std::string_view text);

struct GoldSpan {
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive
  std::string entity_type;

  bool operator==(const GoldSpan&) const = default;
};

struct Chunk {
  std::string id;
  std::vector<TokenPrediction> tokens;
  ClassSchema schema;
  std::optional<Label> label;
  std::optional<std::vector<GoldSpan>> gold_spans;

  std::size_t size() const { return tokens.size(); }
};

struct EntitySpan {
  std::string chunk_id;
  std::size_t entity_index = 0;
  std::string entity_type;
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive
  std::size_t anchor = 0;
  std::string text;

  std::size_t length() const { return end - start + 1; }
  bool operator==(const EntitySpan&) const = default;
};

// Ties go to the lowest class index.
std::size_t Argmax(std::span<const double> probs);

std::vector<std::size_t> ArgmaxTags(const Chunk& chunk);

// Throws kInvalidChunk, kProbabilityOutOfRange or kProbabilitySumViolation.
const Chunk& ValidateChunk(const Chunk& chunk);

enum class OrphanPolicy {
  kPromote,  // an I without a same-entity predecessor opens a new span
  kDrop,     // such tokens are treated as O
};

std::vector<EntitySpan> DecodeSpans(const Chunk& chunk,
                                    OrphanPolicy policy = OrphanPolicy::kPromote);

// Surface form of tokens [start, end]; "##" pieces attach to the previous token.
std::string JoinTokens(const Chunk& chunk, std::size_t start, std::size_t end);

}  // namespace nrf

#endif  // NRF_CORE_MODEL_H_
