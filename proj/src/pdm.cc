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

#include "nrf/pdm.h"

#include <cmath>
#include <numeric>
#include <string>

#include "nrf/error.h"

namespace nrf {
namespace {

void CheckAnchor(const Chunk& chunk, std::size_t anchor) {
  if (anchor >= chunk.size()) {
    throw Error(ErrorCode::kAnchorOutOfRange,
                "anchor " + std::to_string(anchor) + " outside chunk \"" + chunk.id +
                    "\" of " + std::to_string(chunk.size()) + " tokens");
  }
}

}  // namespace

void DecayConfig::Validate() const {
  if (!(decay_rate > 0.0) || !std::isfinite(decay_rate)) {
    throw Error(ErrorCode::kNonPositiveDecayRate,
                "decay rate must be positive, got " + std::to_string(decay_rate));
  }
  if (bins < 1) throw Error(ErrorCode::kInvalidConfig, "bin count must be at least 1");
}

double DecayWeight(std::size_t t, std::size_t anchor, double decay_rate) {
  if (!(decay_rate > 0.0)) {
    throw Error(ErrorCode::kNonPositiveDecayRate,
                "decay rate must be positive, got " + std::to_string(decay_rate));
  }
  const double d = t > anchor ? static_cast<double>(t - anchor) : static_cast<double>(anchor - t);
  return std::exp(-(d * d) / (2.0 * decay_rate * decay_rate));
}

double BinGrid::Total() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

ExcludedTokens PdmExcludedTokens(const EntitySpan& span, PdmExclusion exclusion) {
  if (exclusion == PdmExclusion::kAnchorOnly) return {span.anchor, span.anchor};
  return {span.start, span.end};
}

void AccumulatePdm(const Chunk& chunk, std::size_t anchor, ExcludedTokens excluded,
                   const DecayConfig& config, std::span<double> out) {
  const std::size_t num_classes = chunk.schema.num_classes();
  const double num_tokens = static_cast<double>(chunk.size());
  const double two_r2 = 2.0 * config.decay_rate * config.decay_rate;
  for (std::size_t t = 0; t < chunk.size(); ++t) {
    if (t >= excluded.first && t <= excluded.last) continue;
    const double d = t > anchor ? static_cast<double>(t - anchor)
                                : static_cast<double>(anchor - t);
    const double scale = std::exp(-(d * d) / two_r2) / num_tokens;
    const auto& probs = chunk.tokens[t].probs;
    for (std::size_t k = 0; k < num_classes; ++k) {
      const double p = probs[k];
      out[BinIndex(p, config.bins) * num_classes + k] += scale * p;
    }
  }
}

ProbabilityDensityMap ComputePdm(const Chunk& chunk, std::size_t anchor,
                                 const DecayConfig& config) {
  config.Validate();
  CheckAnchor(chunk, anchor);
  ProbabilityDensityMap pdm{BinGrid(config.bins, chunk.schema.num_classes()), config, anchor};
  AccumulatePdm(chunk, anchor, {anchor, anchor}, config, pdm.grid.values());
  return pdm;
}

ProbabilityDensityMap ComputePdm(const Chunk& chunk, const EntitySpan& span,
                                 const DecayConfig& config, PdmExclusion exclusion) {
  config.Validate();
  CheckAnchor(chunk, span.anchor);
  ProbabilityDensityMap pdm{BinGrid(config.bins, chunk.schema.num_classes()), config,
                            span.anchor};
  AccumulatePdm(chunk, span.anchor, PdmExcludedTokens(span, exclusion), config,
                pdm.grid.values());
  return pdm;
}

BinGrid CumulativeBins(const Chunk& chunk, std::size_t anchor, std::size_t bins) {
  if (bins < 1) throw Error(ErrorCode::kInvalidConfig, "bin count must be at least 1");
  CheckAnchor(chunk, anchor);
  const std::size_t num_classes = chunk.schema.num_classes();
  BinGrid grid(bins, num_classes);
  for (std::size_t t = 0; t < chunk.size(); ++t) {
    if (t == anchor) continue;
    for (std::size_t k = 0; k < num_classes; ++k) {
      const double p = chunk.tokens[t].probs[k];
      grid.at(BinIndex(p, bins), k) += p;
    }
  }
  return grid;
}

nlohmann::json PdmToJson(const ProbabilityDensityMap& pdm, const ClassSchema& schema) {
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t k = 0; k < pdm.grid.classes(); ++k) classes.push_back(schema.ClassName(k));
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t b = 0; b < pdm.grid.bins(); ++b) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t k = 0; k < pdm.grid.classes(); ++k) row.push_back(pdm.at(b, k));
    rows.push_back(std::move(row));
  }
  return {{"anchor", pdm.anchor},
          {"decay_rate", pdm.config.decay_rate},
          {"bins", pdm.config.bins},
          {"classes", std::move(classes)},
          {"values", std::move(rows)}};
}

}  // namespace nrf
