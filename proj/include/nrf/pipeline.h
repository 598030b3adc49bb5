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

#ifndef NRF_PIPELINE_H_
#define NRF_PIPELINE_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "nrf/baselines.h"
#include "nrf/batch.h"
#include "nrf/core_model.h"
#include "nrf/eval.h"
#include "nrf/features.h"
#include "nrf/tree.h"

namespace nrf {

struct PipelineConfig {
  FeatureConfig features;
  TrainConfig tree;
  OrphanPolicy orphan_policy = OrphanPolicy::kPromote;
  double validation_fraction = 0.2;
  int threads = 0;
  std::size_t batch_size = 0;  // records per streaming batch; 0 = one per thread
  std::map<std::string, std::string> baseline_grids;  // method name -> grid text
  std::string input;
  std::string output_dir = "nrf_out";

  // Throws kInvalidConfig and the nested configs' errors.
  void Validate() const;
};

nlohmann::json FeatureConfigToJson(const FeatureConfig& config);
FeatureConfig FeatureConfigFromJson(const nlohmann::json& j, FeatureConfig defaults = {});
nlohmann::json PipelineConfigToJson(const PipelineConfig& config);
PipelineConfig PipelineConfigFromJson(const nlohmann::json& j);
PipelineConfig LoadPipelineConfig(const std::string& path);

// Feature settings stored in a model's metadata, or `fallback` when absent.
FeatureConfig FeatureConfigOf(const TreeModel& model, const FeatureConfig& fallback);

// Strong/Weak for each decoded span: exact gold match when the chunk lists
// gold spans, else the chunk label, else unknown.
std::vector<std::optional<Label>> SpanLabels(const Chunk& chunk,
                                             std::span<const EntitySpan> spans);

struct LabeledCorpus {
  std::vector<Chunk> chunks;
  std::vector<SpanJob> jobs;
  std::vector<std::optional<Label>> labels;  // per job
  FeatureMatrix features;
};

LabeledCorpus BuildCorpus(std::vector<Chunk> chunks, const PipelineConfig& config);

// Chunk-level split from a seeded shuffle; true marks validation chunks.
std::vector<bool> ValidationMask(std::size_t num_chunks, double validation_fraction,
                                 std::uint64_t seed);

// Labeled jobs of the chunks where `mask` equals `want`.
Dataset DatasetFor(const LabeledCorpus& corpus, const std::vector<bool>& mask, bool want);

// Train with the pipeline's tree settings and record the feature settings in
// the model metadata.
TreeModel TrainModel(const Dataset& data, const PipelineConfig& config);

struct FilterEvaluation {
  EvalReport base;
  EvalReport filtered;
};

// Evaluates the chunks where `mask` is true; `keep[j]` says whether job j
// survives the filter.
FilterEvaluation EvaluateFilter(const LabeledCorpus& corpus, const std::vector<bool>& mask,
                                const std::vector<bool>& keep);

struct StreamOptions {
  double threshold = 0.5;
  int threads = 0;
  std::size_t batch_size = 0;  // 0 = one record per thread
  OrphanPolicy orphan_policy = OrphanPolicy::kPromote;
  bool explain = true;
};

struct StreamStats {
  std::size_t records = 0;
  std::size_t spans = 0;
  std::size_t weak = 0;
  std::size_t max_line_bytes = 0;
};

// Reads records batch by batch, featurizes with the model's feature
// settings and writes one filtered record per input line, in input order:
//   {"id", "spans": [{"type", "start", "end", "anchor", "text",
//                     "verdict", "p_weak", "path"}]}
// Weak spans stay in the output, flagged.
StreamStats StreamClassify(const TreeModel& model, const std::string& input_path,
                           std::ostream& out, const StreamOptions& options);

// Feature CSV: chunk_id,span_start,span_end,label,<feature names...>
void WriteFeatureCsvHeader(std::ostream& out, const FeatureSchema& schema);
void WriteFeatureCsvRow(std::ostream& out, const std::string& chunk_id, const EntitySpan& span,
                        const std::optional<Label>& label, std::span<const double> values);

struct FeatureTable {
  std::shared_ptr<const FeatureSchema> schema;
  std::vector<std::string> chunk_ids;
  std::vector<std::optional<Label>> labels;
  std::vector<double> values;
  std::size_t rows = 0;

  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * schema->size(), schema->size()};
  }
};

// Throws kIoError, kParseError (with line number).
FeatureTable ReadFeatureCsv(const std::string& path);

// One label per line ("strong"/"weak"); throws kParseError.
std::vector<Label> ReadLabels(const std::string& path);

// Rows with a label; `override_labels`, when non-empty, replaces the table's.
Dataset DatasetFromTable(const FeatureTable& table, const std::vector<Label>& override_labels);

struct PredictionSets {
  std::vector<ChunkSpans> all;   // every predicted span
  std::vector<ChunkSpans> kept;  // spans not flagged weak
};

// Reads decode or classify output.
PredictionSets ReadPredictions(const std::string& path);

// Gold spans of every record in a corpus file (see GoldSpansOf).
std::vector<ChunkSpans> ReadGold(const std::string& path, OrphanPolicy policy);

struct PipelineResult {
  FilterEvaluation validation;
  TuneResult tune;
  std::vector<GridResult> baselines;  // best under the TP budget per method
  nlohmann::json report;
};

// Featurize, split, train, tune, classify, evaluate and compare baselines.
// Writes features.csv, model.json, filtered.jsonl, report.json and
// report.txt into output_dir.
PipelineResult RunPipeline(const PipelineConfig& config);

}  // namespace nrf

#endif  // NRF_PIPELINE_H_
