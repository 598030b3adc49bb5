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

#include "nrf/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "nrf/error.h"

namespace nrf {
namespace {

std::string DisplayType(const std::string& type) { return type.empty() ? "entity" : type; }

nlohmann::json RowToJson(const EvalRow& row) {
  return {{"tp", row.counts.tp},
          {"fp", row.counts.fp},
          {"fn", row.counts.fn},
          {"precision", row.precision},
          {"recall", row.recall},
          {"f1", row.f1},
          {"tp_drop_pct", row.tp_drop_pct},
          {"fp_drop_pct", row.fp_drop_pct}};
}

std::string FormatPercent(double value) {
  char buffer[32];
  const double rounded = std::round(value);
  if (std::abs(value - rounded) < 1e-9) {
    std::snprintf(buffer, sizeof(buffer), "%.0f%%", rounded);
  } else {
    std::snprintf(buffer, sizeof(buffer), "%.1f%%", value);
  }
  return buffer;
}

}  // namespace

EvalRow RowFromCounts(const Counts& counts) {
  EvalRow row;
  row.counts = counts;
  const double tp = static_cast<double>(counts.tp);
  if (counts.tp + counts.fp > 0) row.precision = tp / static_cast<double>(counts.tp + counts.fp);
  if (counts.tp + counts.fn > 0) row.recall = tp / static_cast<double>(counts.tp + counts.fn);
  // 2PR / (P + R) in count form.
  const std::size_t denom = 2 * counts.tp + counts.fp + counts.fn;
  if (counts.tp > 0) row.f1 = 2.0 * tp / static_cast<double>(denom);
  return row;
}

nlohmann::json EvalReport::ToJson() const {
  nlohmann::json types = nlohmann::json::object();
  for (const auto& [type, row] : per_type) types[DisplayType(type)] = RowToJson(row);
  return {{"overall", RowToJson(overall)}, {"per_type", std::move(types)}};
}

EvalReport EntityF1(const std::vector<ChunkSpans>& predicted,
                    const std::vector<ChunkSpans>& gold) {
  std::unordered_map<std::string, const ChunkSpans*> gold_by_id;
  for (const auto& chunk : gold) {
    if (!gold_by_id.emplace(chunk.chunk_id, &chunk).second) {
      throw Error(ErrorCode::kChunkIdMismatch, "duplicate gold chunk \"" + chunk.chunk_id + "\"");
    }
  }
  std::set<std::string> seen;
  std::map<std::string, Counts> per_type;
  using Key = std::tuple<std::size_t, std::size_t, std::string>;

  auto score = [&](const std::vector<GoldSpan>& pred, const std::vector<GoldSpan>& truth) {
    std::multiset<Key> remaining;
    for (const auto& g : truth) remaining.emplace(g.start, g.end, g.entity_type);
    for (const auto& p : pred) {
      auto it = remaining.find(Key{p.start, p.end, p.entity_type});
      if (it != remaining.end()) {
        remaining.erase(it);
        per_type[p.entity_type].tp += 1;
      } else {
        per_type[p.entity_type].fp += 1;
      }
    }
    for (const auto& [start, end, type] : remaining) per_type[type].fn += 1;
  };

  for (const auto& chunk : predicted) {
    auto it = gold_by_id.find(chunk.chunk_id);
    if (it == gold_by_id.end()) {
      throw Error(ErrorCode::kChunkIdMismatch,
                  "predicted chunk \"" + chunk.chunk_id + "\" has no gold record");
    }
    if (!seen.insert(chunk.chunk_id).second) {
      throw Error(ErrorCode::kChunkIdMismatch,
                  "duplicate predicted chunk \"" + chunk.chunk_id + "\"");
    }
    score(chunk.spans, it->second->spans);
  }
  for (const auto& chunk : gold) {
    if (!seen.contains(chunk.chunk_id)) score({}, chunk.spans);
  }

  EvalReport report;
  Counts total;
  for (const auto& [type, counts] : per_type) {
    report.per_type[type] = RowFromCounts(counts);
    total += counts;
  }
  report.overall = RowFromCounts(total);
  return report;
}

DropRates ComputeDropRates(const Counts& base, const Counts& filtered) {
  if (filtered.tp > base.tp || filtered.fp > base.fp) {
    std::ostringstream msg;
    msg << "filtered counts (" << filtered.tp << " TP, " << filtered.fp
        << " FP) exceed base counts (" << base.tp << " TP, " << base.fp << " FP)";
    throw Error(ErrorCode::kCountInflation, msg.str());
  }
  DropRates rates;
  if (base.tp > 0) {
    rates.tp_drop_pct = 100.0 * static_cast<double>(base.tp - filtered.tp) / static_cast<double>(base.tp);
  }
  if (base.fp > 0) {
    rates.fp_drop_pct = 100.0 * static_cast<double>(base.fp - filtered.fp) / static_cast<double>(base.fp);
  }
  return rates;
}

void ApplyDropRates(const EvalReport& base, EvalReport& filtered) {
  for (auto& [type, row] : filtered.per_type) {
    auto it = base.per_type.find(type);
    const Counts base_counts = it == base.per_type.end() ? Counts{} : it->second.counts;
    const DropRates rates = ComputeDropRates(base_counts, row.counts);
    row.tp_drop_pct = rates.tp_drop_pct;
    row.fp_drop_pct = rates.fp_drop_pct;
  }
  const DropRates rates = ComputeDropRates(base.overall.counts, filtered.overall.counts);
  filtered.overall.tp_drop_pct = rates.tp_drop_pct;
  filtered.overall.fp_drop_pct = rates.fp_drop_pct;
}

std::string FormatDropPair(const DropRates& rates) {
  return "(" + FormatPercent(rates.tp_drop_pct) + ", " + FormatPercent(rates.fp_drop_pct) + ")";
}

std::string FormatDropTable(const EvalReport& base, const EvalReport& filtered) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-16s %8s %12s  %s\n", "Element", "Base F1", "Filtered F1",
                "(%TP Drop, %FP Drop)");
  out << line;
  auto emit = [&](const std::string& name, const EvalRow& b, const EvalRow& f) {
    std::snprintf(line, sizeof(line), "%-16s %8.3f %12.3f  %s\n", name.c_str(), b.f1, f.f1,
                  FormatDropPair({f.tp_drop_pct, f.fp_drop_pct}).c_str());
    out << line;
  };
  for (const auto& [type, row] : base.per_type) {
    auto it = filtered.per_type.find(type);
    emit(DisplayType(type), row, it == filtered.per_type.end() ? EvalRow{} : it->second);
  }
  emit("overall", base.overall, filtered.overall);
  return out.str();
}

GoldSpan ToGoldSpan(const EntitySpan& span) { return {span.start, span.end, span.entity_type}; }

std::optional<std::vector<GoldSpan>> GoldSpansOf(const Chunk& chunk,
                                                 const std::vector<EntitySpan>& decoded) {
  if (chunk.gold_spans) return *chunk.gold_spans;
  if (!chunk.label) return std::nullopt;
  std::vector<GoldSpan> gold;
  if (*chunk.label == Label::kStrong) {
    for (const auto& span : decoded) gold.push_back(ToGoldSpan(span));
  }
  return gold;
}

}  // namespace nrf
