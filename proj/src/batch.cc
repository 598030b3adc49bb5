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

#include "nrf/batch.h"

#include <omp.h>

#include "nrf/error.h"

namespace nrf {
namespace {

std::shared_ptr<const FeatureSchema> CheckBatch(std::span<const Chunk> chunks,
                                                std::span<const SpanJob> jobs,
                                                const FeatureConfig& config,
                                                std::shared_ptr<const FeatureSchema> schema) {
  config.Validate();
  if (chunks.empty()) {
    if (!schema) throw Error(ErrorCode::kSchemaMismatch, "empty batch has no class layout");
    return schema;
  }
  const ClassSchema& classes = chunks.front().schema;
  for (const Chunk& chunk : chunks) {
    if (!(chunk.schema == classes)) {
      throw Error(ErrorCode::kSchemaMismatch,
                  "chunk \"" + chunk.id + "\" has a different class layout from the batch");
    }
  }
  auto built = FeatureSchema::Build(classes, config);
  if (schema && !(*schema == *built)) {
    throw Error(ErrorCode::kSchemaMismatch, "batch features do not match the expected schema");
  }
  for (const SpanJob& job : jobs) {
    if (job.chunk >= chunks.size() || job.span.end >= chunks[job.chunk].size() ||
        job.span.anchor > job.span.end || job.span.start > job.span.anchor) {
      throw Error(ErrorCode::kAnchorOutOfRange, "span job outside its chunk");
    }
  }
  return schema ? schema : built;
}

}  // namespace

std::vector<SpanJob> CollectJobs(std::span<const Chunk> chunks, OrphanPolicy policy) {
  std::vector<SpanJob> jobs;
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    for (auto& span : DecodeSpans(chunks[c], policy)) jobs.push_back({c, std::move(span)});
  }
  return jobs;
}

FeatureVector FeatureMatrix::Vector(std::size_t i) const {
  auto r = row(i);
  return {schema, std::vector<double>(r.begin(), r.end())};
}

FeatureMatrix FeaturizeSerial(std::span<const Chunk> chunks, std::span<const SpanJob> jobs,
                              const FeatureConfig& config,
                              std::shared_ptr<const FeatureSchema> schema) {
  FeatureMatrix matrix;
  matrix.schema = CheckBatch(chunks, jobs, config, std::move(schema));
  const std::size_t width = matrix.schema->size();
  matrix.rows = jobs.size();
  matrix.values.assign(matrix.rows * width, 0.0);
  FeatureScratch scratch;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    AssembleFeaturesInto(chunks[jobs[i].chunk], jobs[i].span, config,
                         std::span<double>(matrix.values).subspan(i * width, width), scratch);
  }
  return matrix;
}

FeatureMatrix FeaturizeParallel(std::span<const Chunk> chunks, std::span<const SpanJob> jobs,
                                const FeatureConfig& config, int threads,
                                std::shared_ptr<const FeatureSchema> schema) {
  FeatureMatrix matrix;
  matrix.schema = CheckBatch(chunks, jobs, config, std::move(schema));
  const std::size_t width = matrix.schema->size();
  matrix.rows = jobs.size();
  matrix.values.assign(matrix.rows * width, 0.0);
  const int team = threads > 0 ? threads : omp_get_max_threads();
  const auto n = static_cast<long>(jobs.size());
  double* base = matrix.values.data();
#pragma omp parallel num_threads(team)
  {
    FeatureScratch scratch;
#pragma omp for schedule(dynamic, 64)
    for (long i = 0; i < n; ++i) {
      AssembleFeaturesInto(chunks[jobs[i].chunk], jobs[i].span, config,
                           std::span<double>(base + i * width, width), scratch);
    }
  }
  return matrix;
}

std::vector<Classification> ClassifySerial(const TreeModel& model, const FeatureMatrix& matrix,
                                           double threshold) {
  if (!(*matrix.schema == model.schema())) {
    throw Error(ErrorCode::kSchemaMismatch, "feature matrix does not match the model schema");
  }
  std::vector<Classification> out(matrix.rows);
  for (std::size_t i = 0; i < matrix.rows; ++i) out[i] = ClassifyRow(model, matrix.row(i), threshold);
  return out;
}

std::vector<Classification> ClassifyParallel(const TreeModel& model,
                                             const FeatureMatrix& matrix, double threshold,
                                             int threads) {
  if (!(*matrix.schema == model.schema())) {
    throw Error(ErrorCode::kSchemaMismatch, "feature matrix does not match the model schema");
  }
  std::vector<Classification> out(matrix.rows);
  const int team = threads > 0 ? threads : omp_get_max_threads();
  const auto n = static_cast<long>(matrix.rows);
#pragma omp parallel for num_threads(team) schedule(static)
  for (long i = 0; i < n; ++i) out[i] = ClassifyRow(model, matrix.row(i), threshold);
  return out;
}

}  // namespace nrf
