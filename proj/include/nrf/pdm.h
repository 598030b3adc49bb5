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

#ifndef NRF_PDM_H_
#define NRF_PDM_H_

#include <cstddef>
#include <span>
#include <vector>

#include "json.hpp"
#include "nrf/core_model.h"

namespace nrf {

struct DecayConfig {
  double decay_rate = 1.0;  // R
  std::size_t bins = 10;    // B

  // Throws kNonPositiveDecayRate or kInvalidConfig.
  void Validate() const;
};

// exp(-d^2 / (2 R^2)) with d = |t - anchor|. Throws kNonPositiveDecayRate.
double DecayWeight(std::size_t t, std::size_t anchor, double decay_rate);

// floor(prob * bins), with prob == 1 folded into the last bin.
inline std::size_t BinIndex(double prob, std::size_t bins) {
  const auto bin = static_cast<std::size_t>(prob * static_cast<double>(bins));
  return bin < bins ? bin : bins - 1;
}

// Row-major bins x classes grid.
class BinGrid {
 public:
  BinGrid() = default;
  BinGrid(std::size_t bins, std::size_t classes)
      : bins_(bins), classes_(classes), values_(bins * classes, 0.0) {}

  std::size_t bins() const { return bins_; }
  std::size_t classes() const { return classes_; }
  double at(std::size_t bin, std::size_t k) const { return values_[bin * classes_ + k]; }
  double& at(std::size_t bin, std::size_t k) { return values_[bin * classes_ + k]; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double Total() const;

 private:
  std::size_t bins_ = 0;
  std::size_t classes_ = 0;
  std::vector<double> values_;
};

struct ProbabilityDensityMap {
  BinGrid grid;
  DecayConfig config;
  std::size_t anchor = 0;

  double at(std::size_t bin, std::size_t k) const { return grid.at(bin, k); }
};

// Inclusive token range left out of the density sums.
struct ExcludedTokens {
  std::size_t first = 0;
  std::size_t last = 0;
};

enum class PdmExclusion {
  kPhrase,      // every token of the predicted span
  kAnchorOnly,  // only the anchor token
};

ExcludedTokens PdmExcludedTokens(const EntitySpan& span, PdmExclusion exclusion);

// Allocation-free kernel: adds W_t * prob / T into out[bin * K + k] for every
// token outside `excluded`. `out` must hold bins * K cells.
void AccumulatePdm(const Chunk& chunk, std::size_t anchor, ExcludedTokens excluded,
                   const DecayConfig& config, std::span<double> out);

// Density map around a single predicted token; only the anchor is excluded.
// Throws kAnchorOutOfRange, kNonPositiveDecayRate.
ProbabilityDensityMap ComputePdm(const Chunk& chunk, std::size_t anchor,
                                 const DecayConfig& config);

// Density map around a decoded span, anchored at its B token.
ProbabilityDensityMap ComputePdm(const Chunk& chunk, const EntitySpan& span,
                                 const DecayConfig& config,
                                 PdmExclusion exclusion = PdmExclusion::kPhrase);

// Same binning with unweighted, undivided sums.
BinGrid CumulativeBins(const Chunk& chunk, std::size_t anchor, std::size_t bins);

// {"anchor", "decay_rate", "bins", "classes": [...], "values": [[...] per bin]}
nlohmann::json PdmToJson(const ProbabilityDensityMap& pdm, const ClassSchema& schema);

}  // namespace nrf

#endif  // NRF_PDM_H_
