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

#ifndef NRF_BASELINES_H_
#define NRF_BASELINES_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nrf/core_model.h"
#include "nrf/eval.h"

namespace nrf {

enum class Decision { kKeep, kDrop };

struct BaselineConfig {
  double threshold = 0.5;       // tau in [0, 1]
  double temperature = 1.0;     // > 0
  double entropy_cutoff = 1.0;  // >= 0
  double mc_mean_cutoff = 0.0;  // >= 0
  double mc_var_cutoff = 1.0;   // >= 0; 1.0 never binds for probabilities

  void Validate() const;
};

// Lowest max-class probability over the span's tokens.
double SpanMinMaxProbability(const Chunk& chunk, const EntitySpan& span);

// Drop iff some span token's max-class probability is below tau.
Decision SoftmaxThresholdFilter(const Chunk& chunk, const EntitySpan& span, double tau);

// SoftMax(ln p / T); zero probabilities stay zero. Throws kNonPositiveTemperature.
std::vector<double> TemperatureScale(std::span<const double> probs, double temperature);

// SoftMax thresholding applied to temperature-scaled probabilities.
Decision TemperatureThresholdFilter(const Chunk& chunk, const EntitySpan& span,
                                    double temperature, double tau);

double MeanSpanEntropy(const Chunk& chunk, const EntitySpan& span);

// Drop iff mean token entropy over the span exceeds h.
Decision EntropyFilter(const Chunk& chunk, const EntitySpan& span, double h);

struct McDropoutStats {
  double mean = 0.0;
  double variance = 0.0;  // population
  std::size_t predicted_class = 0;
};

// Statistics of the anchor's predicted-class probability (argmax in the first
// pass) across passes. Throws kPassMisalignment or kInvalidConfig (< 2 passes).
McDropoutStats McDropoutAggregate(std::span<const Chunk> passes, const EntitySpan& span);

Decision McDropoutFilter(const McDropoutStats& stats, double mean_cutoff, double var_cutoff);

enum class BaselineMethod { kSoftmax, kTemperature, kEntropy, kMcDropout };

std::string_view MethodName(BaselineMethod method);
std::optional<BaselineMethod> ParseMethod(std::string_view name);

struct BaselineGrid {
  std::vector<double> thresholds;
  std::vector<double> temperatures;
  std::vector<double> entropy_cutoffs;
  std::vector<double> mc_mean_cutoffs;
  std::vector<double> mc_var_cutoffs;

  // Defaults for the axes `method` uses.
  static BaselineGrid Default(BaselineMethod method);

  // "tau=0.5,0.9;T=0.5:4:0.5" with keys tau, T, h, mean, var. A bare list
  // sets the method's primary axis (tau, T, h, mean). Axes left unset keep
  // their defaults. Throws kInvalidConfig.
  static BaselineGrid Parse(BaselineMethod method, std::string_view text);

  std::vector<BaselineConfig> Points(BaselineMethod method) const;
};

struct CandidateSpan {
  const Chunk* chunk = nullptr;
  EntitySpan span;
  bool is_tp = false;
  std::optional<McDropoutStats> mc;
};

Decision ApplyBaseline(BaselineMethod method, const BaselineConfig& config,
                       const CandidateSpan& candidate);

struct GridResult {
  BaselineMethod method = BaselineMethod::kSoftmax;
  BaselineConfig config;
  Counts counts;  // kept TP, kept FP, fn = missed gold + dropped TP
  DropRates drops;
  EvalRow row;
};

// Evaluates every grid point; results follow grid order. `missed_gold` is
// the base model's false-negative count.
std::vector<GridResult> GridSearch(BaselineMethod method, std::span<const CandidateSpan> spans,
                                   const BaselineGrid& grid, std::size_t missed_gold = 0);

// Highest F1, earliest point on ties.
const GridResult& BestByF1(std::span<const GridResult> results);

// Highest FP drop among points within the TP budget (percent), or nullptr.
const GridResult* BestUnderTpBudget(std::span<const GridResult> results, double max_tp_drop_pct);

std::string GridCsvHeader();
std::string GridCsvRow(const GridResult& result);

}  // namespace nrf

#endif  // NRF_BASELINES_H_
