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


#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "nrf/baselines.h"
#include "nrf/core_model.h"
#include "nrf/error.h"
#include "test_util.h"

namespace nrf {
namespace {

Chunk Tokens(std::vector<std::vector<double>> probs, const std::string& id = "c") {
  Chunk chunk;
  chunk.id = id;
  chunk.schema = ClassSchema({"Drug"});
  for (std::size_t t = 0; t < probs.size(); ++t) {
    chunk.tokens.push_back({"w" + std::to_string(t), t, probs[t], std::nullopt});
  }
  return chunk;
}

EntitySpan Span(std::size_t start, std::size_t end) {
  EntitySpan span;
  span.chunk_id = "c";
  span.start = start;
  span.end = end;
  span.anchor = start;
  return span;
}

TEST_CASE("temperature scaling reference values") {
  const auto scaled = TemperatureScale(std::vector<double>{0.9, 0.05, 0.05}, 2.0);
  CHECK(std::abs(scaled[0] - 0.6796227589829593) < 1e-12);
  CHECK(std::abs(scaled[1] - 0.1601886205085204) < 1e-12);
  CHECK(std::abs(scaled[2] - 0.1601886205085204) < 1e-12);
  const auto one_hot = TemperatureScale(std::vector<double>{0.0, 1.0, 0.0}, 5.0);
  CHECK(one_hot == std::vector<double>{0.0, 1.0, 0.0});
  CHECK_THROWS_AS(TemperatureScale(std::vector<double>{0.5, 0.5}, 0.0), Error);
  CHECK_THROWS_AS(TemperatureScale(std::vector<double>{0.5, 0.5}, -1.0), Error);
}

TEST_CASE("temperature scaling identities on random vectors") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> temp(1e-3, 100.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto p = testing::RandomProbs(rng, 3 + 2 * (trial % 3), 0.0);
    const auto same = TemperatureScale(p, 1.0);
    double sum = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      REQUIRE(std::abs(same[k] - p[k]) <= 1e-12);
    }
    const auto scaled = TemperatureScale(p, temp(rng));
    for (double v : scaled) sum += v;
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    CHECK(Argmax(scaled) == Argmax(p));
  }
}

TEST_CASE("softmax threshold drops on the weakest span token") {
  const Chunk chunk = Tokens({{0.0, 0.95, 0.05}, {0.3, 0.0, 0.7}, {1.0, 0.0, 0.0}});
  CHECK(SpanMinMaxProbability(chunk, Span(0, 1)) == doctest::Approx(0.7));
  CHECK(SoftmaxThresholdFilter(chunk, Span(0, 1), 0.7) == Decision::kKeep);
  CHECK(SoftmaxThresholdFilter(chunk, Span(0, 1), 0.71) == Decision::kDrop);
  CHECK(SoftmaxThresholdFilter(chunk, Span(0, 0), 0.9) == Decision::kKeep);
}

TEST_CASE("softmax kept set shrinks as tau grows") {
  std::mt19937_64 rng(4);
  std::vector<Chunk> chunks;
  for (int i = 0; i < 200; ++i) chunks.push_back(testing::RandomChunk(rng, 1 + rng() % 4, 1));
  std::vector<bool> kept_before(chunks.size(), true);
  for (double tau = 0.0; tau <= 1.0; tau += 0.02) {
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      const bool kept = SoftmaxThresholdFilter(chunks[i], Span(0, chunks[i].size() - 1), tau) ==
                        Decision::kKeep;
      if (kept) CHECK(kept_before[i]);
      kept_before[i] = kept;
    }
  }
}

TEST_CASE("entropy filter") {
  const Chunk chunk = Tokens({{0.25, 0.5, 0.25}, {0.0, 1.0, 0.0}});
  CHECK(MeanSpanEntropy(chunk, Span(0, 1)) == doctest::Approx(1.0397207708399179 / 2));
  CHECK(EntropyFilter(chunk, Span(0, 1), 0.5) == Decision::kDrop);
  CHECK(EntropyFilter(chunk, Span(0, 1), 0.6) == Decision::kKeep);
}

TEST_CASE("mc dropout statistics") {
  std::vector<Chunk> passes;
  for (double p : {0.9, 0.8, 0.95, 0.85, 0.9}) passes.push_back(Tokens({{1.0 - p, p, 0.0}}));
  const auto stats = McDropoutAggregate(passes, Span(0, 0));
  CHECK(stats.predicted_class == 1);
  CHECK(std::abs(stats.mean - 0.88) < 1e-12);
  CHECK(std::abs(stats.variance - 0.0026) < 1e-12);
  CHECK(McDropoutFilter(stats, 0.9, 1.0) == Decision::kDrop);
  CHECK(McDropoutFilter(stats, 0.5, 0.001) == Decision::kDrop);
  CHECK(McDropoutFilter(stats, 0.5, 0.01) == Decision::kKeep);
}

TEST_CASE("mc dropout variance is zero iff passes agree") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.5, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double base = u(rng);
    const bool agree = trial % 2 == 0;
    std::vector<Chunk> passes;
    for (int p = 0; p < 4; ++p) {
      const double prob = agree || p == 0 ? base : base - 0.01 * (1 + p);
      passes.push_back(Tokens({{1.0 - prob, prob, 0.0}}));
    }
    const double var = McDropoutAggregate(passes, Span(0, 0)).variance;
    if (agree) {
      CHECK(var <= 1e-12);
    } else {
      CHECK(var > 1e-12);
    }
  }
}

TEST_CASE("mc dropout rejects misaligned or too few passes") {
  const std::vector<Chunk> one = {Tokens({{0.1, 0.9, 0.0}})};
  CHECK_THROWS_AS(McDropoutAggregate(one, Span(0, 0)), Error);
  std::vector<Chunk> mismatched = {Tokens({{0.1, 0.9, 0.0}}), Tokens({{0.1, 0.9, 0.0}, {1, 0, 0}})};
  try {
    McDropoutAggregate(mismatched, Span(0, 0));
    FAIL("expected PassMisalignment");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kPassMisalignment);
  }
}

TEST_CASE("grid parsing") {
  const auto grid = BaselineGrid::Parse(BaselineMethod::kTemperature, "T=0.5,2;tau=0.5:0.7:0.1");
  CHECK(grid.temperatures == std::vector<double>{0.5, 2.0});
  REQUIRE(grid.thresholds.size() == 3);
  CHECK(grid.thresholds[2] == doctest::Approx(0.7));
  CHECK(grid.Points(BaselineMethod::kTemperature).size() == 6);
  CHECK(BaselineGrid::Parse(BaselineMethod::kSoftmax, "0.2,0.4").thresholds ==
        std::vector<double>{0.2, 0.4});
  CHECK_THROWS_AS(BaselineGrid::Parse(BaselineMethod::kSoftmax, "tau=abc"), Error);
  CHECK_THROWS_AS(BaselineGrid::Parse(BaselineMethod::kSoftmax, "tau=0:1:0"), Error);
  CHECK(ParseMethod("temp") == BaselineMethod::kTemperature);
  CHECK_FALSE(ParseMethod("bogus").has_value());
}

TEST_CASE("grid search counts kept and dropped spans") {
  const Chunk a = Tokens({{0.05, 0.95, 0.0}});
  const Chunk b = Tokens({{0.4, 0.6, 0.0}});
  std::vector<CandidateSpan> spans = {{&a, Span(0, 0), true, std::nullopt},
                                      {&b, Span(0, 0), false, std::nullopt}};
  const auto results = GridSearch(BaselineMethod::kSoftmax, spans,
                                  BaselineGrid::Parse(BaselineMethod::kSoftmax, "0.5,0.7,0.99"), 1);
  REQUIRE(results.size() == 3);
  CHECK(results[0].counts.tp == 1);
  CHECK(results[0].counts.fp == 1);
  CHECK(results[0].counts.fn == 1);
  CHECK(results[1].counts.fp == 0);
  CHECK(results[1].drops.fp_drop_pct == 100.0);
  CHECK(results[2].drops.tp_drop_pct == 100.0);
  CHECK(&BestByF1(results) == &results[1]);
  const GridResult* best = BestUnderTpBudget(results, 6.0);
  REQUIRE(best != nullptr);
  CHECK(best == &results[1]);
}

}  // namespace
}  // namespace nrf
