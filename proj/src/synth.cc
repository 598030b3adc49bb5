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

#include "nrf/synth.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "nrf/error.h"

namespace nrf {
namespace {

constexpr std::array<const char*, 24> kLexicon = {
    "patient", "reported", "with",    "history", "of",      "the",       "and",    "was",
    "noted",   "on",       "exam",    "treated", "for",     "admitted",  "to",     "clinic",
    "follow",  "up",       "stable",  "scan",    "showed",  "no",        "change", "today"};
constexpr std::array<const char*, 8> kEntityWords = {"ER",  "PR",   "HER2", "ALK",
                                                     "MET", "EGFR", "KRAS", "PDL1"};
constexpr std::array<const char*, 4> kInsideWords = {"receptor", "status", "mutation", "fusion"};

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Token whose predicted class holds `top` and whose remainder is split
// between the other two classes.
std::vector<double> ConfidentToken(std::size_t num_classes, std::size_t top, double top_prob,
                                   std::size_t minor, double minor_share) {
  std::vector<double> probs(num_classes, 0.0);
  const double rest = 1.0 - top_prob;
  probs[top] = top_prob;
  probs[minor] = rest * minor_share;
  probs[ClassSchema::kOutside] += rest * (1.0 - minor_share);
  return probs;
}

}  // namespace

void SynthConfig::Validate() const {
  if (n_strong + n_weak == 0) throw Error(ErrorCode::kInvalidConfig, "empty corpus");
  if (min_length < 2 || max_length < min_length) {
    throw Error(ErrorCode::kInvalidConfig, "chunk length range must satisfy 2 <= min <= max");
  }
  if (!(pull_strength > 0.0 && pull_strength < 0.1)) {
    throw Error(ErrorCode::kInvalidConfig, "pull_strength must lie in (0, 0.1)");
  }
  if (!(noise_sigma >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "noise_sigma must be >= 0");
  if (!(label_flip_rate >= 0.0 && label_flip_rate <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "label_flip_rate must lie in [0, 1]");
  }
  if (!(multi_token_rate >= 0.0 && multi_token_rate <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "multi_token_rate must lie in [0, 1]");
  }
}

nlohmann::json SynthConfigToJson(const SynthConfig& c) {
  return {{"n_strong", c.n_strong},
          {"n_weak", c.n_weak},
          {"min_length", c.min_length},
          {"max_length", c.max_length},
          {"pull_strength", c.pull_strength},
          {"noise_sigma", c.noise_sigma},
          {"label_flip_rate", c.label_flip_rate},
          {"multi_token_rate", c.multi_token_rate},
          {"seed", c.seed},
          {"entity", c.entity}};
}

SynthConfig SynthConfigFromJson(const nlohmann::json& j, SynthConfig c) {
  try {
    c.n_strong = j.value("n_strong", c.n_strong);
    c.n_weak = j.value("n_weak", c.n_weak);
    c.min_length = j.value("min_length", c.min_length);
    c.max_length = j.value("max_length", c.max_length);
    c.pull_strength = j.value("pull_strength", c.pull_strength);
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.label_flip_rate = j.value("label_flip_rate", c.label_flip_rate);
    c.multi_token_rate = j.value("multi_token_rate", c.multi_token_rate);
    c.seed = j.value("seed", c.seed);
    c.entity = j.value("entity", c.entity);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("synth config: ") + e.what());
  }
  return c;
}

bool IsStrongCase(const SynthConfig& config, std::size_t index) { return index < config.n_strong; }

Chunk GenerateChunk(const SynthConfig& config, std::size_t index) {
  std::mt19937_64 rng(SplitMix64(config.seed ^ SplitMix64(index + 1)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(unit(rng) * n) % n; };

  const bool strong = IsStrongCase(config, index);
  Chunk chunk;
  chunk.id = "synth-" + std::to_string(index);
  chunk.schema = ClassSchema({config.entity});
  const std::size_t num_classes = chunk.schema.num_classes();
  const std::size_t begin = ClassSchema::BeginIndex(0);
  const std::size_t inside = ClassSchema::InsideIndex(0);

  const std::size_t length = config.min_length + pick(config.max_length - config.min_length + 1);
  const std::size_t span_len = (length >= 3 && unit(rng) < config.multi_token_rate) ? 2 : 1;
  const std::size_t start = pick(length - span_len + 1);
  const std::size_t end = start + span_len - 1;

  // Context tokens: O-dominant with sub-ceiling B/I noise.
  const double ceiling = 0.9 * kWeakContextCeiling;
  for (std::size_t t = 0; t < length; ++t) {
    TokenPrediction token;
    token.position = t;
    token.text = kLexicon[pick(kLexicon.size())];
    token.probs.assign(num_classes, 0.0);
    if (t >= start && t <= end) {
      const bool is_anchor = t == start;
      token.text = is_anchor ? kEntityWords[pick(kEntityWords.size())]
                             : kInsideWords[pick(kInsideWords.size())];
      token.probs = ConfidentToken(num_classes, is_anchor ? begin : inside, uniform(0.9, 0.999),
                                   is_anchor ? inside : begin, uniform(0.0, 0.5));
    } else {
      double mass = 0.0;
      for (std::size_t k = 1; k < num_classes; ++k) {
        const double p = std::min(std::abs(noise(rng)) * config.noise_sigma, ceiling);
        token.probs[k] = p;
        mass += p;
      }
      token.probs[ClassSchema::kOutside] = 1.0 - mass;
    }
    chunk.tokens.push_back(std::move(token));
  }

  if (strong) {
    const std::size_t pulled = 1 + pick(3);
    // Tokens following the span, or preceding it when the span ends the chunk.
    const bool after = end + 1 < length;
    for (std::size_t d = 1; d <= pulled; ++d) {
      std::size_t t = 0;
      if (after) {
        if (end + d >= length) break;
        t = end + d;
      } else {
        if (d > start) break;
        t = start - d;
      }
      auto& probs = chunk.tokens[t].probs;
      probs[inside] = config.pull_strength * kPullProfile[d - 1] * uniform(0.75, 1.25);
      if (d == 1) probs[begin] = config.pull_strength * kPullBeginShare * uniform(0.75, 1.25);
      double mass = 0.0;
      for (std::size_t k = 1; k < num_classes; ++k) mass += probs[k];
      probs[ClassSchema::kOutside] = 1.0 - mass;
    }
  }

  const bool flipped = unit(rng) < config.label_flip_rate;
  chunk.label = (strong != flipped) ? Label::kStrong : Label::kWeak;
  return chunk;
}

std::vector<Chunk> Generate(const SynthConfig& config) {
  config.Validate();
  const std::size_t total = config.n_strong + config.n_weak;
  std::vector<Chunk> chunks(total);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < total; ++i) chunks[i] = GenerateChunk(config, i);
  return chunks;
}

}  // namespace nrf
