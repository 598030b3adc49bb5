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

#ifndef NRF_SYNTH_H_
#define NRF_SYNTH_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "nrf/core_model.h"

namespace nrf {

// Generator for labeled chunks with one confidently predicted span each.
// Strong chunks leak small I mass onto 1-3 tokens next to the span; Weak
// chunks keep every context B/I probability below 0.001.
struct SynthConfig {
  std::size_t n_strong = 2000;
  std::size_t n_weak = 2000;
  std::size_t min_length = 6;
  std::size_t max_length = 24;
  double pull_strength = 0.03;
  double noise_sigma = 0.0003;
  double label_flip_rate = 0.02;
  double multi_token_rate = 0.25;
  std::uint64_t seed = 42;
  std::string entity = "Biomarker";

  // Throws kInvalidConfig.
  void Validate() const;
};

nlohmann::json SynthConfigToJson(const SynthConfig& config);
SynthConfig SynthConfigFromJson(const nlohmann::json& j, SynthConfig defaults = {});

// Relative I mass at distances 1, 2, 3 from the span.
inline constexpr double kPullProfile[3] = {1.0, 0.003 / 0.048, 0.002 / 0.048};
// Relative B mass at distance 1.
inline constexpr double kPullBeginShare = 0.001 / 0.048;

// Context B/I probabilities of Weak chunks stay below this.
inline constexpr double kWeakContextCeiling = 0.001;

// Chunk `index` of the corpus; indices below n_strong are Strong cases
// before label flipping. Deterministic in (config, index).
Chunk GenerateChunk(const SynthConfig& config, std::size_t index);

// Whether chunk `index` was generated as a Strong case (before flipping).
bool IsStrongCase(const SynthConfig& config, std::size_t index);

std::vector<Chunk> Generate(const SynthConfig& config);

}  // namespace nrf

#endif  // NRF_SYNTH_H_
