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


// Serial reference vs OpenMP batch kernels.

#include <benchmark/benchmark.h>

#include <optional>
#include <vector>

#include "nrf/batch.h"
#include "nrf/pdm.h"
#include "nrf/synth.h"
#include "nrf/tree.h"

namespace {

struct Fixture {
  std::vector<nrf::Chunk> chunks;
  std::vector<nrf::SpanJob> jobs;
  nrf::FeatureMatrix matrix;
  std::optional<nrf::TreeModel> model;

  Fixture() {
    nrf::SynthConfig config;
    config.n_strong = 1000;
    config.n_weak = 1000;
    chunks = nrf::Generate(config);
    jobs = nrf::CollectJobs(chunks);
    matrix = nrf::FeaturizeSerial(chunks, jobs, nrf::FeatureConfig{});
    nrf::Dataset data(matrix.schema);
    for (std::size_t j = 0; j < jobs.size(); ++j) data.Add(matrix.row(j), *chunks[jobs[j].chunk].label);
    model = nrf::Train(data, nrf::TrainConfig{});
  }
};

const Fixture& Data() {
  static const Fixture fixture;
  return fixture;
}

void BM_FeaturizeSerial(benchmark::State& state) {
  const Fixture& f = Data();
  for (auto _ : state) {
    benchmark::DoNotOptimize(nrf::FeaturizeSerial(f.chunks, f.jobs, nrf::FeatureConfig{}));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(f.jobs.size()));
}
BENCHMARK(BM_FeaturizeSerial)->Unit(benchmark::kMillisecond);

void BM_FeaturizeParallel(benchmark::State& state) {
  const Fixture& f = Data();
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(nrf::FeaturizeParallel(f.chunks, f.jobs, nrf::FeatureConfig{}, threads));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(f.jobs.size()));
}
BENCHMARK(BM_FeaturizeParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_ClassifySerial(benchmark::State& state) {
  const Fixture& f = Data();
  for (auto _ : state) benchmark::DoNotOptimize(nrf::ClassifySerial(*f.model, f.matrix, 0.5));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(f.matrix.rows));
}
BENCHMARK(BM_ClassifySerial);

void BM_ClassifyParallel(benchmark::State& state) {
  const Fixture& f = Data();
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(nrf::ClassifyParallel(*f.model, f.matrix, 0.5, threads));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(f.matrix.rows));
}
BENCHMARK(BM_ClassifyParallel)->Arg(1)->Arg(2)->Arg(4);

void BM_ComputePdm(benchmark::State& state) {
  const Fixture& f = Data();
  std::size_t j = 0;
  for (auto _ : state) {
    const auto& job = f.jobs[j++ % f.jobs.size()];
    benchmark::DoNotOptimize(nrf::ComputePdm(f.chunks[job.chunk], job.span, nrf::DecayConfig{}));
  }
}
BENCHMARK(BM_ComputePdm);

void BM_Train(benchmark::State& state) {
  const Fixture& f = Data();
  nrf::Dataset data(f.matrix.schema);
  for (std::size_t j = 0; j < f.jobs.size(); ++j) data.Add(f.matrix.row(j), *f.chunks[f.jobs[j].chunk].label);
  for (auto _ : state) benchmark::DoNotOptimize(nrf::Train(data, nrf::TrainConfig{}));
}
BENCHMARK(BM_Train)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
