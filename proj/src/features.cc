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

#include "nrf/features.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "nrf/error.h"

namespace nrf {
namespace {

constexpr std::size_t kStatsPerClass = 5;
constexpr std::size_t kClassAgnosticStats = 7;  // size, B_I count, 5 token statistics

struct TopThree {
  double first = 0.0;
  double second = 0.0;
  double third = 0.0;
};

TopThree TopProbabilities(std::span<const double> probs) {
  TopThree top;
  for (double p : probs) {
    if (p > top.first) {
      top.third = top.second;
      top.second = top.first;
      top.first = p;
    } else if (p > top.second) {
      top.third = top.second;
      top.second = p;
    } else if (p > top.third) {
      top.third = p;
    }
  }
  return top;
}

void AppendStatisticalNames(const ClassSchema& classes, std::string_view prefix,
                            std::vector<std::string>& names) {
  const std::string p(prefix);
  names.push_back(p + "_size");
  for (std::size_t k = 0; k < classes.num_classes(); ++k) {
    const std::string tag = p + "_" + classes.TagName(k);
    names.push_back(tag + "_count");
    names.push_back(p + "_prob_" + classes.TagName(k) + "_ratio");
    names.push_back(tag + "_max_prob");
    names.push_back(tag + "_mean_prob");
    names.push_back(tag + "_cov_prob");
  }
  names.push_back(p + "_B_I-tag_count");
  names.push_back(p + "_prob_diff_mean");
  names.push_back(p + "_prob_diff_max");
  names.push_back(p + "_prob_class_ratio_2_by_1");
  names.push_back(p + "_prob_class_ratio_3_by_2");
  names.push_back(p + "_entropy");
}

void CollectScope(const Chunk& chunk, const EntitySpan& span, ScopeKind kind,
                  std::size_t window, std::vector<std::size_t>& tokens) {
  tokens.clear();
  switch (kind) {
    case ScopeKind::kToken:
      tokens.push_back(span.anchor);
      break;
    case ScopeKind::kWord: {
      const auto& word = chunk.tokens[span.anchor].word_id;
      std::size_t first = span.anchor;
      std::size_t last = span.anchor;
      if (word) {
        while (first > span.start && chunk.tokens[first - 1].word_id == word) --first;
        while (last < span.end && chunk.tokens[last + 1].word_id == word) ++last;
      }
      for (std::size_t t = first; t <= last; ++t) tokens.push_back(t);
      break;
    }
    case ScopeKind::kPhrase:
      for (std::size_t t = span.start; t <= span.end; ++t) tokens.push_back(t);
      break;
    case ScopeKind::kNeighbor: {
      const std::size_t before = std::min(window, span.start);
      for (std::size_t t = span.start - before; t < span.start; ++t) tokens.push_back(t);
      for (std::size_t t = span.end + 1; t <= span.end + window && t < chunk.size(); ++t) {
        tokens.push_back(t);
      }
      break;
    }
    case ScopeKind::kContext:
      for (std::size_t t = 0; t < chunk.size(); ++t) {
        if (t < span.start || t > span.end) tokens.push_back(t);
      }
      break;
  }
}

}  // namespace

std::string_view ScopePrefix(ScopeKind kind) {
  switch (kind) {
    case ScopeKind::kToken: return "Token";
    case ScopeKind::kWord: return "Word";
    case ScopeKind::kPhrase: return "Phrase";
    case ScopeKind::kNeighbor: return "Neighbor";
    case ScopeKind::kContext: return "Context";
  }
  return "";
}

std::optional<ScopeKind> ParseScope(std::string_view prefix) {
  for (ScopeKind kind : kAllScopes) {
    if (ScopePrefix(kind) == prefix) return kind;
  }
  return std::nullopt;
}

SpanScope MakeScope(const Chunk& chunk, const EntitySpan& span, ScopeKind kind,
                    std::size_t neighbor_window) {
  SpanScope scope{kind, {}};
  CollectScope(chunk, span, kind, neighbor_window, scope.tokens);
  return scope;
}

void FeatureConfig::Validate() const { decay.Validate(); }

FeatureSchema::FeatureSchema(std::vector<std::string> names) : names_(std::move(names)) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    index_.emplace(names_[i], i);
    for (unsigned char c : names_[i]) {
      hash ^= c;
      hash *= 1099511628211ULL;
    }
    hash ^= static_cast<unsigned char>('\n');
    hash *= 1099511628211ULL;
  }
  hash_ = hash;
}

std::shared_ptr<const FeatureSchema> FeatureSchema::Build(const ClassSchema& classes,
                                                          const FeatureConfig& config) {
  std::vector<std::string> names;
  const std::size_t bins = config.decay.bins;
  for (std::size_t k = 0; k < classes.num_classes(); ++k) {
    for (std::size_t b = 0; b < bins; ++b) {
      names.push_back(DensityFeatureName(classes, k, b, bins));
    }
  }
  for (ScopeKind kind : kAllScopes) {
    if (config.enabled(kind)) AppendStatisticalNames(classes, ScopePrefix(kind), names);
  }
  return std::make_shared<const FeatureSchema>(std::move(names));
}

std::optional<std::size_t> FeatureSchema::IndexOf(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it != index_.end()) return it->second;
  if (name.starts_with("SPD_")) {
    it = index_.find("PDM_" + std::string(name.substr(4)));
    if (it != index_.end()) return it->second;
  }
  return std::nullopt;
}

std::string FeatureSchema::HashHex() const {
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(hash_));
  return buffer;
}

std::string BucketLabel(std::size_t bin, std::size_t bins) {
  const int precision = 10 % bins == 0 ? 1 : 100 % bins == 0 ? 2 : 4;
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*f-%.*f", precision,
                static_cast<double>(bin) / static_cast<double>(bins), precision,
                static_cast<double>(bin + 1) / static_cast<double>(bins));
  return buffer;
}

std::string DensityFeatureName(const ClassSchema& classes, std::size_t k, std::size_t bin,
                               std::size_t bins) {
  return "PDM_" + classes.TagName(k) + "_WCount_bkt_" + BucketLabel(bin, bins);
}

double FeatureVector::Get(std::string_view name) const {
  const auto index = schema->IndexOf(name);
  if (!index) {
    throw Error(ErrorCode::kSchemaMismatch, "unknown feature \"" + std::string(name) + "\"");
  }
  return values[*index];
}

double MaxProbability(const Chunk& chunk, const SpanScope& scope, std::size_t k) {
  double best = 0.0;
  for (std::size_t t : scope.tokens) best = std::max(best, chunk.tokens[t].probs[k]);
  return best;
}

double Entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

std::size_t StatisticalBlockSize(std::size_t num_classes) {
  return kStatsPerClass * num_classes + kClassAgnosticStats;
}

void WriteStatisticalBlock(const Chunk& chunk, std::span<const std::size_t> tokens,
                           std::span<double> out) {
  const std::size_t num_classes = chunk.schema.num_classes();
  std::fill(out.begin(), out.end(), 0.0);
  const double n = static_cast<double>(tokens.size());
  out[0] = n;
  if (tokens.empty()) return;

  std::size_t entity_count = 0;
  double diff_sum = 0.0;
  double diff_max = 0.0;
  double ratio21_sum = 0.0;
  double ratio32_sum = 0.0;
  double entropy_sum = 0.0;
  for (std::size_t t : tokens) {
    const auto& probs = chunk.tokens[t].probs;
    const std::size_t top = Argmax(probs);
    out[1 + kStatsPerClass * top] += 1.0;
    if (top != ClassSchema::kOutside) ++entity_count;
    const TopThree best = TopProbabilities(probs);
    const double diff = best.first - best.second;
    diff_sum += diff;
    diff_max = std::max(diff_max, diff);
    ratio21_sum += best.first > 0.0 ? best.second / best.first : 0.0;
    ratio32_sum += best.second > 0.0 ? best.third / best.second : 0.0;
    entropy_sum += Entropy(probs);
  }

  for (std::size_t k = 0; k < num_classes; ++k) {
    double* cell = &out[1 + kStatsPerClass * k];
    double max_p = 0.0;
    double sum = 0.0;
    for (std::size_t t : tokens) {
      const double p = chunk.tokens[t].probs[k];
      max_p = std::max(max_p, p);
      sum += p;
    }
    const double mean = sum / n;
    double sq = 0.0;
    for (std::size_t t : tokens) {
      const double d = chunk.tokens[t].probs[k] - mean;
      sq += d * d;
    }
    cell[1] = cell[0] / n;
    cell[2] = max_p;
    cell[3] = mean;
    cell[4] = mean > 0.0 ? std::sqrt(sq / n) / mean : 0.0;
  }

  double* tail = &out[1 + kStatsPerClass * num_classes];
  tail[0] = static_cast<double>(entity_count);
  tail[1] = diff_sum / n;
  tail[2] = diff_max;
  tail[3] = ratio21_sum / n;
  tail[4] = ratio32_sum / n;
  tail[5] = entropy_sum / n;
}

FeatureVector StatisticalFeatures(const Chunk& chunk, const SpanScope& scope) {
  std::vector<std::string> names;
  AppendStatisticalNames(chunk.schema, ScopePrefix(scope.kind), names);
  FeatureVector fv;
  fv.schema = std::make_shared<const FeatureSchema>(std::move(names));
  fv.values.assign(fv.schema->size(), 0.0);
  WriteStatisticalBlock(chunk, scope.tokens, fv.values);
  return fv;
}

void AssembleFeaturesInto(const Chunk& chunk, const EntitySpan& span,
                          const FeatureConfig& config, std::span<double> out,
                          FeatureScratch& scratch) {
  if (span.anchor >= chunk.size() || span.end >= chunk.size()) {
    throw Error(ErrorCode::kAnchorOutOfRange,
                "span [" + std::to_string(span.start) + ", " + std::to_string(span.end) +
                    "] outside chunk \"" + chunk.id + "\"");
  }
  const std::size_t num_classes = chunk.schema.num_classes();
  const std::size_t bins = config.decay.bins;
  const std::size_t density_cells = bins * num_classes;

  // The kernel writes bin-major; feature order is class-major.
  auto& grid = scratch.grid;
  grid.assign(density_cells, 0.0);
  AccumulatePdm(chunk, span.anchor, PdmExcludedTokens(span, config.exclusion), config.decay,
                grid);
  for (std::size_t k = 0; k < num_classes; ++k) {
    for (std::size_t b = 0; b < bins; ++b) out[k * bins + b] = grid[b * num_classes + k];
  }

  std::size_t offset = density_cells;
  const std::size_t block = StatisticalBlockSize(num_classes);
  for (ScopeKind kind : kAllScopes) {
    if (!config.enabled(kind)) continue;
    CollectScope(chunk, span, kind, config.neighbor_window, scratch.tokens);
    WriteStatisticalBlock(chunk, scratch.tokens, out.subspan(offset, block));
    offset += block;
  }
}

FeatureVector AssembleFeatures(const Chunk& chunk, const EntitySpan& span,
                               const FeatureConfig& config) {
  Featurizer featurizer(config);
  return featurizer.Assemble(chunk, span);
}

Featurizer::Featurizer(FeatureConfig config) : config_(std::move(config)) {
  config_.Validate();
}

const std::shared_ptr<const FeatureSchema>& Featurizer::SchemaFor(const ClassSchema& classes) {
  if (!cached_schema_ || !(classes == cached_classes_)) {
    cached_classes_ = classes;
    cached_schema_ = FeatureSchema::Build(classes, config_);
  }
  return cached_schema_;
}

FeatureVector Featurizer::Assemble(const Chunk& chunk, const EntitySpan& span) {
  FeatureVector fv;
  fv.schema = SchemaFor(chunk.schema);
  fv.values.assign(fv.schema->size(), 0.0);
  AssembleFeaturesInto(chunk, span, config_, fv.values, scratch_);
  return fv;
}

}  // namespace nrf
