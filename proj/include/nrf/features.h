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

#ifndef NRF_FEATURES_H_
#define NRF_FEATURES_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nrf/core_model.h"
#include "nrf/pdm.h"

namespace nrf {

enum class ScopeKind { kToken, kWord, kPhrase, kNeighbor, kContext };

inline constexpr std::array<ScopeKind, 5> kAllScopes = {
    ScopeKind::kToken, ScopeKind::kWord, ScopeKind::kPhrase, ScopeKind::kNeighbor,
    ScopeKind::kContext};

// Leading sub-word of statistical feature names: Token, Word, Phrase,
// Neighbor, Context.
std::string_view ScopePrefix(ScopeKind kind);
std::optional<ScopeKind> ParseScope(std::string_view prefix);

struct SpanScope {
  ScopeKind kind = ScopeKind::kToken;
  std::vector<std::size_t> tokens;
};

// Token       the anchor
// Word        anchor plus adjacent phrase tokens sharing its word_id
// Phrase      [start, end]
// Neighbor    `window` tokens on each side of the phrase
// Context     every token outside the phrase
SpanScope MakeScope(const Chunk& chunk, const EntitySpan& span, ScopeKind kind,
                    std::size_t neighbor_window);

struct FeatureConfig {
  DecayConfig decay;
  std::size_t neighbor_window = 1;
  std::array<bool, 5> scopes = {true, true, true, true, true};
  PdmExclusion exclusion = PdmExclusion::kPhrase;

  bool enabled(ScopeKind kind) const { return scopes[static_cast<std::size_t>(kind)]; }
  void Validate() const;
};

// Ordered, immutable list of canonical feature names.
class FeatureSchema {
 public:
  explicit FeatureSchema(std::vector<std::string> names);

  static std::shared_ptr<const FeatureSchema> Build(const ClassSchema& classes,
                                                    const FeatureConfig& config);

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t i) const { return names_[i]; }

  // Accepts the SPD_ spelling of density features as an alias for PDM_.
  std::optional<std::size_t> IndexOf(std::string_view name) const;

  // FNV-1a over the newline-joined names.
  std::uint64_t hash() const { return hash_; }
  std::string HashHex() const;

  bool operator==(const FeatureSchema& other) const { return names_ == other.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
  std::uint64_t hash_ = 0;
};

std::string BucketLabel(std::size_t bin, std::size_t bins);
std::string DensityFeatureName(const ClassSchema& classes, std::size_t k, std::size_t bin,
                               std::size_t bins);

struct FeatureVector {
  std::shared_ptr<const FeatureSchema> schema;
  std::vector<double> values;

  // Throws kSchemaMismatch for unknown names.
  double Get(std::string_view name) const;
};

double MaxProbability(const Chunk& chunk, const SpanScope& scope, std::size_t k);

// Natural-log Shannon entropy with 0 ln 0 = 0.
double Entropy(std::span<const double> probs);

// Number of values the statistical block of one scope emits.
std::size_t StatisticalBlockSize(std::size_t num_classes);

// Writes one scope's statistics in schema order. Empty scopes yield zeros.
void WriteStatisticalBlock(const Chunk& chunk, std::span<const std::size_t> tokens,
                           std::span<double> out);

FeatureVector StatisticalFeatures(const Chunk& chunk, const SpanScope& scope);

// Buffers reused across AssembleFeaturesInto calls.
struct FeatureScratch {
  std::vector<std::size_t> tokens;
  std::vector<double> grid;
};

// Fills density cells followed by each enabled scope's statistics. `out`
// must have schema size.
void AssembleFeaturesInto(const Chunk& chunk, const EntitySpan& span,
                          const FeatureConfig& config, std::span<double> out,
                          FeatureScratch& scratch);

FeatureVector AssembleFeatures(const Chunk& chunk, const EntitySpan& span,
                               const FeatureConfig& config);

// Caches the schema for the most recent class layout.
class Featurizer {
 public:
  explicit Featurizer(FeatureConfig config);

  const FeatureConfig& config() const { return config_; }
  const std::shared_ptr<const FeatureSchema>& SchemaFor(const ClassSchema& classes);
  FeatureVector Assemble(const Chunk& chunk, const EntitySpan& span);

 private:
  FeatureConfig config_;
  ClassSchema cached_classes_;
  std::shared_ptr<const FeatureSchema> cached_schema_;
  FeatureScratch scratch_;
};

}  // namespace nrf

#endif  // NRF_FEATURES_H_
