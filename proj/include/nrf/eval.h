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

#ifndef NRF_EVAL_H_
#define NRF_EVAL_H_

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nrf/core_model.h"

namespace nrf {

struct ChunkSpans {
  std::string chunk_id;
  std::vector<GoldSpan> spans;
};

struct Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  Counts& operator+=(const Counts& other) {
    tp += other.tp;
    fp += other.fp;
    fn += other.fn;
    return *this;
  }
};

struct EvalRow {
  Counts counts;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double tp_drop_pct = 0.0;
  double fp_drop_pct = 0.0;
};

EvalRow RowFromCounts(const Counts& counts);

struct EvalReport {
  std::map<std::string, EvalRow> per_type;
  EvalRow overall;

  nlohmann::json ToJson() const;
};

// Exact (start, end, type) matching. Every predicted chunk id must appear in
// `gold`; duplicated ids are rejected. Throws kChunkIdMismatch.
EvalReport EntityF1(const std::vector<ChunkSpans>& predicted,
                    const std::vector<ChunkSpans>& gold);

struct DropRates {
  double tp_drop_pct = 0.0;
  double fp_drop_pct = 0.0;
};

// 100 * (base - filtered) / base, 0 when base is 0. Throws kCountInflation
// when filtered exceeds base.
DropRates ComputeDropRates(const Counts& base, const Counts& filtered);

// Fills drop percentages per type and overall in `filtered`.
void ApplyDropRates(const EvalReport& base, EvalReport& filtered);

// "(6%, 88%)"
std::string FormatDropPair(const DropRates& rates);

// Table with one row per entity type plus "overall".
std::string FormatDropTable(const EvalReport& base, const EvalReport& filtered);

// Gold spans of a chunk: its gold_spans when present, otherwise the decoded
// spans of a chunk labeled strong and none for one labeled weak.
std::optional<std::vector<GoldSpan>> GoldSpansOf(const Chunk& chunk,
                                                 const std::vector<EntitySpan>& decoded);

GoldSpan ToGoldSpan(const EntitySpan& span);

}  // namespace nrf

#endif  // NRF_EVAL_H_
