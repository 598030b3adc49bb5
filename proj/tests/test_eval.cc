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


#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "nrf/error.h"
#include "nrf/eval.h"

namespace nrf {
namespace {

// Ten gold spans; eight predicted exactly, two predicted with a shifted end.
void EightTwoTwo(std::vector<ChunkSpans>& pred, std::vector<ChunkSpans>& gold) {
  for (std::size_t i = 0; i < 10; ++i) {
    const std::string id = "c" + std::to_string(i);
    gold.push_back({id, {{0, 1, "Drug"}}});
    pred.push_back({id, {{0, i < 8 ? std::size_t{1} : std::size_t{2}, "Drug"}}});
  }
}

TEST_CASE("eight-two-two gives F1 0.8 exactly") {
  std::vector<ChunkSpans> pred, gold;
  EightTwoTwo(pred, gold);
  const EvalReport report = EntityF1(pred, gold);
  CHECK(report.overall.counts.tp == 8);
  CHECK(report.overall.counts.fp == 2);
  CHECK(report.overall.counts.fn == 2);
  CHECK(report.overall.precision == 0.8);
  CHECK(report.overall.recall == 0.8);
  CHECK(report.overall.f1 == 0.8);
  CHECK(report.per_type.at("Drug").f1 == 0.8);
}

TEST_CASE("matching is exact on start, end and type") {
  const std::vector<ChunkSpans> gold = {{"a", {{2, 3, "Drug"}}}};
  CHECK(EntityF1({{"a", {{2, 3, "Tumor"}}}}, gold).overall.counts.tp == 0);
  CHECK(EntityF1({{"a", {{2, 2, "Drug"}}}}, gold).overall.counts.tp == 0);
  CHECK(EntityF1({{"a", {{2, 3, "Drug"}}}}, gold).overall.counts.tp == 1);
  // A gold chunk with no prediction counts as missed.
  CHECK(EntityF1({}, gold).overall.counts.fn == 1);
}

TEST_CASE("zero denominators give zero") {
  const EvalRow row = RowFromCounts({});
  CHECK(row.precision == 0.0);
  CHECK(row.recall == 0.0);
  CHECK(row.f1 == 0.0);
}

TEST_CASE("chunk id mismatches are rejected") {
  const std::vector<ChunkSpans> gold = {{"a", {}}};
  for (const auto& pred : {std::vector<ChunkSpans>{{"b", {}}}, std::vector<ChunkSpans>{{"a", {}}, {"a", {}}}}) {
    try {
      EntityF1(pred, gold);
      FAIL("expected ChunkIdMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kChunkIdMismatch);
    }
  }
}

TEST_CASE("drop rates") {
  const DropRates r = ComputeDropRates({100, 100, 0}, {94, 12, 6});
  CHECK(r.tp_drop_pct == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(r.fp_drop_pct == doctest::Approx(88.0).epsilon(1e-12));
  CHECK(FormatDropPair(r) == "(6%, 88%)");
  const DropRates half = ComputeDropRates({50, 20, 0}, {50, 10, 0});
  CHECK(half.tp_drop_pct == 0.0);
  CHECK(half.fp_drop_pct == 50.0);
  CHECK(FormatDropPair(half) == "(0%, 50%)");
  CHECK(ComputeDropRates({0, 0, 0}, {0, 0, 0}).fp_drop_pct == 0.0);
  try {
    ComputeDropRates({10, 10, 0}, {11, 10, 0});
    FAIL("expected CountInflation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kCountInflation);
  }
}

TEST_CASE("F1 stays within its bounds on random counts") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 5000; ++i) {
    const Counts c{rng() % 50, rng() % 50, rng() % 50};
    const EvalRow row = RowFromCounts(c);
    CHECK(row.f1 <= 1.0);
    CHECK(row.f1 <= 2.0 * row.precision + 1e-15);
    CHECK(row.f1 <= 2.0 * row.recall + 1e-15);
    CHECK(row.f1 >= std::max(0.0, row.precision + row.recall - 1.0) - 1e-15);
  }
}

TEST_CASE("table rows per type plus overall") {
  std::vector<ChunkSpans> pred, gold;
  EightTwoTwo(pred, gold);
  const EvalReport base = EntityF1(pred, gold);
  EvalReport filtered = EntityF1(pred, gold);
  ApplyDropRates(base, filtered);
  const std::string table = FormatDropTable(base, filtered);
  CHECK(table.find("Drug") != std::string::npos);
  CHECK(table.find("overall") != std::string::npos);
  CHECK(table.find("(0%, 0%)") != std::string::npos);
  const auto j = filtered.ToJson();
  CHECK(j.contains("overall"));
}

}  // namespace
}  // namespace nrf
