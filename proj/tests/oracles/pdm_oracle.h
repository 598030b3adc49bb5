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


// Brute-force density map used as an independent reference in tests. It walks
// every (bin, class) cell and scans all tokens for contributions, using
// interval membership instead of bin arithmetic and pow() for the weight.

#ifndef NRF_TESTS_ORACLES_PDM_ORACLE_H_
#define NRF_TESTS_ORACLES_PDM_ORACLE_H_

#include <cmath>
#include <cstddef>
#include <vector>

#include "nrf/core_model.h"

namespace nrf::oracle {

inline bool InBin(double prob, std::size_t bin, std::size_t bins) {
  const double scaled = prob * static_cast<double>(bins);
  if (bin + 1 == bins) return scaled >= static_cast<double>(bin);
  return scaled >= static_cast<double>(bin) && scaled < static_cast<double>(bin + 1);
}

// Cells indexed [bin][k]. Tokens in [first, last] do not contribute.
inline std::vector<std::vector<double>> Pdm(const Chunk& chunk, std::size_t anchor,
                                            std::size_t first, std::size_t last,
                                            double decay_rate, std::size_t bins) {
  const std::size_t k_count = chunk.schema.num_classes();
  const double n = static_cast<double>(chunk.size());
  const double e = std::exp(1.0);
  std::vector<std::vector<double>> cells(bins, std::vector<double>(k_count, 0.0));
  for (std::size_t b = 0; b < bins; ++b) {
    for (std::size_t k = 0; k < k_count; ++k) {
      double sum = 0.0;
      for (std::size_t t = 0; t < chunk.size(); ++t) {
        if (t >= first && t <= last) continue;
        const double p = chunk.tokens[t].probs[k];
        if (!InBin(p, b, bins)) continue;
        const double d = static_cast<double>(t) - static_cast<double>(anchor);
        sum += std::pow(e, -(d * d) / (2.0 * decay_rate * decay_rate)) * p / n;
      }
      cells[b][k] = sum;
    }
  }
  return cells;
}

// Unweighted, undivided sums with only the anchor left out.
inline std::vector<std::vector<double>> Cumulative(const Chunk& chunk, std::size_t anchor,
                                                   std::size_t bins) {
  const std::size_t k_count = chunk.schema.num_classes();
  std::vector<std::vector<double>> cells(bins, std::vector<double>(k_count, 0.0));
  for (std::size_t b = 0; b < bins; ++b) {
    for (std::size_t k = 0; k < k_count; ++k) {
      for (std::size_t t = 0; t < chunk.size(); ++t) {
        if (t == anchor) continue;
        if (InBin(chunk.tokens[t].probs[k], b, bins)) cells[b][k] += chunk.tokens[t].probs[k];
      }
    }
  }
  return cells;
}

}  // namespace nrf::oracle

#endif  // NRF_TESTS_ORACLES_PDM_ORACLE_H_
