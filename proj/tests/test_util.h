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


#ifndef NRF_TESTS_TEST_UTIL_H_
#define NRF_TESTS_TEST_UTIL_H_

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "nrf/core_model.h"
#include "nrf/record_io.h"

namespace nrf::testing {

inline std::string FixturePath(const std::string& name) {
  return std::string(NRF_FIXTURE_DIR) + "/" + name;
}

inline Chunk FixtureChunk(const std::string& name) { return ReadChunks(FixturePath(name)).at(0); }

// Inclusive tolerance check with slack for binary rounding of decimal literals.
inline bool Within(double value, double expect, double tol) {
  return std::abs(value - expect) <= tol + 1e-12;
}

inline std::vector<std::string> EntityNames(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t e = 0; e < n; ++e) names.push_back("E" + std::to_string(e));
  return names;
}

// Random normalized vector; with probability `one_hot` a one-hot vector.
inline std::vector<double> RandomProbs(std::mt19937_64& rng, std::size_t k, double one_hot = 0.1) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(k, 0.0);
  if (u(rng) < one_hot) {
    p[std::uniform_int_distribution<std::size_t>(0, k - 1)(rng)] = 1.0;
    return p;
  }
  double sum = 0.0;
  for (auto& x : p) {
    x = std::pow(u(rng), 3.0);
    sum += x;
  }
  if (sum == 0.0) {
    p[0] = 1.0;
    return p;
  }
  for (auto& x : p) x /= sum;
  return p;
}

inline Chunk RandomChunk(std::mt19937_64& rng, std::size_t length, std::size_t entities,
                         const std::string& id = "r") {
  Chunk chunk;
  chunk.id = id;
  chunk.schema = ClassSchema(EntityNames(entities));
  for (std::size_t t = 0; t < length; ++t) {
    TokenPrediction token;
    token.text = "w" + std::to_string(t);
    token.position = t;
    token.probs = RandomProbs(rng, chunk.schema.num_classes());
    chunk.tokens.push_back(std::move(token));
  }
  return chunk;
}

// Chunk whose argmax tags are exactly `tags` (canonical class indices).
inline Chunk ChunkWithTags(const std::vector<std::size_t>& tags, std::size_t entities = 1) {
  Chunk chunk;
  chunk.id = "tags";
  chunk.schema = ClassSchema(EntityNames(entities));
  const std::size_t k = chunk.schema.num_classes();
  for (std::size_t t = 0; t < tags.size(); ++t) {
    TokenPrediction token;
    token.text = "w" + std::to_string(t);
    token.position = t;
    token.probs.assign(k, 0.1 / static_cast<double>(k - 1));
    token.probs[tags[t]] = 0.9;
    chunk.tokens.push_back(std::move(token));
  }
  return chunk;
}

}  // namespace nrf::testing

#endif  // NRF_TESTS_TEST_UTIL_H_
