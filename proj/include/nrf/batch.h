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

#ifndef NRF_BATCH_H_
#define NRF_BATCH_H_

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "nrf/core_model.h"
#include "nrf/features.h"
#include "nrf/tree.h"

namespace nrf {

// Batch kernels over many spans. Each operation has a serial reference and an
// OpenMP version that must produce identical output.

struct SpanJob {
  std::size_t chunk = 0;  // index into the chunk batch
  EntitySpan span;
};

std::vector<SpanJob> CollectJobs(std::span<const Chunk> chunks,
                                 OrphanPolicy policy = OrphanPolicy::kPromote);

struct FeatureMatrix {
  std::shared_ptr<const FeatureSchema> schema;
  std::vector<double> values;  // rows x schema->size(), row-major
  std::size_t rows = 0;

  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * schema->size(), schema->size()};
  }
  FeatureVector Vector(std::size_t i) const;
};

// All chunks must share one class layout (kSchemaMismatch otherwise). An
// explicit `schema` must equal the one the layout produces.
FeatureMatrix FeaturizeSerial(std::span<const Chunk> chunks, std::span<const SpanJob> jobs,
                              const FeatureConfig& config,
                              std::shared_ptr<const FeatureSchema> schema = nullptr);

// threads == 0 uses the OpenMP default.
FeatureMatrix FeaturizeParallel(std::span<const Chunk> chunks, std::span<const SpanJob> jobs,
                                const FeatureConfig& config, int threads = 0,
                                std::shared_ptr<const FeatureSchema> schema = nullptr);

std::vector<Classification> ClassifySerial(const TreeModel& model, const FeatureMatrix& matrix,
                                           double threshold);
std::vector<Classification> ClassifyParallel(const TreeModel& model,
                                             const FeatureMatrix& matrix, double threshold,
                                             int threads = 0);

}  // namespace nrf

#endif  // NRF_BATCH_H_
