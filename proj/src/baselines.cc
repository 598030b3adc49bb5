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

#include "nrf/baselines.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "nrf/error.h"
#include "nrf/features.h"
#include "nrf/tree.h"

namespace nrf {
namespace {

std::vector<double> Range(double start, double stop, double step) {
  std::vector<double> values;
  const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
  for (long i = 0; i <= n; ++i) values.push_back(start + static_cast<double>(i) * step);
  return values;
}

double ParseDouble(std::string_view text) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::kInvalidConfig, "bad grid value \"" + std::string(text) + "\"");
  }
  return value;
}

// "a,b,c" or "start:stop:step", or a mix separated by commas.
std::vector<double> ParseAxis(std::string_view text) {
  std::vector<double> values;
  while (!text.empty()) {
    const auto comma = text.find(',');
    std::string_view item = text.substr(0, comma);
    if (item.find(':') != std::string_view::npos) {
      const auto a = item.find(':');
      const auto b = item.find(':', a + 1);
      if (b == std::string_view::npos) {
        throw Error(ErrorCode::kInvalidConfig, "range needs start:stop:step");
      }
      const double step = ParseDouble(item.substr(b + 1));
      if (!(step > 0.0)) throw Error(ErrorCode::kInvalidConfig, "range step must be positive");
      auto range = Range(ParseDouble(item.substr(0, a)), ParseDouble(item.substr(a + 1, b - a - 1)), step);
      values.insert(values.end(), range.begin(), range.end());
    } else if (!item.empty()) {
      values.push_back(ParseDouble(item));
    }
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  if (values.empty()) throw Error(ErrorCode::kInvalidConfig, "empty grid axis");
  return values;
}

double TemperatureMinMax(const Chunk& chunk, const EntitySpan& span, double temperature) {
  double lowest = 1.0;
  for (std::size_t t = span.start; t <= span.end; ++t) {
    const auto scaled = TemperatureScale(chunk.tokens[t].probs, temperature);
    lowest = std::min(lowest, *std::max_element(scaled.begin(), scaled.end()));
  }
  return lowest;
}

}  // namespace

void BaselineConfig::Validate() const {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "threshold must lie in [0, 1]");
  }
  if (!(temperature > 0.0)) {
    throw Error(ErrorCode::kNonPositiveTemperature, "temperature must be positive");
  }
  if (!(entropy_cutoff >= 0.0) || !(mc_mean_cutoff >= 0.0) || !(mc_var_cutoff >= 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "cutoffs must be non-negative");
  }
}

double SpanMinMaxProbability(const Chunk& chunk, const EntitySpan& span) {
  double lowest = 1.0;
  for (std::size_t t = span.start; t <= span.end; ++t) {
    const auto& probs = chunk.tokens[t].probs;
    lowest = std::min(lowest, *std::max_element(probs.begin(), probs.end()));
  }
  return lowest;
}

Decision SoftmaxThresholdFilter(const Chunk& chunk, const EntitySpan& span, double tau) {
  return SpanMinMaxProbability(chunk, span) < tau ? Decision::kDrop : Decision::kKeep;
}

std::vector<double> TemperatureScale(std::span<const double> probs, double temperature) {
  if (!(temperature > 0.0)) {
    throw Error(ErrorCode::kNonPositiveTemperature,
                "temperature must be positive, got " + FormatNumber(temperature));
  }
  std::vector<double> out(probs.size());
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < probs.size(); ++i) {
    // ln 0 = -inf keeps zero probabilities at exactly zero.
    out[i] = probs[i] > 0.0 ? std::log(probs[i]) / temperature
                            : -std::numeric_limits<double>::infinity();
    peak = std::max(peak, out[i]);
  }
  if (peak == -std::numeric_limits<double>::infinity()) {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(out.size()));
    return out;
  }
  double sum = 0.0;
  for (double& v : out) {
    v = std::exp(v - peak);
    sum += v;
  }
  for (double& v : out) v /= sum;
  return out;
}

Decision TemperatureThresholdFilter(const Chunk& chunk, const EntitySpan& span,
                                    double temperature, double tau) {
  return TemperatureMinMax(chunk, span, temperature) < tau ? Decision::kDrop : Decision::kKeep;
}

double MeanSpanEntropy(const Chunk& chunk, const EntitySpan& span) {
  double sum = 0.0;
  for (std::size_t t = span.start; t <= span.end; ++t) sum += Entropy(chunk.tokens[t].probs);
  return sum / static_cast<double>(span.length());
}

Decision EntropyFilter(const Chunk& chunk, const EntitySpan& span, double h) {
  return MeanSpanEntropy(chunk, span) > h ? Decision::kDrop : Decision::kKeep;
}

McDropoutStats McDropoutAggregate(std::span<const Chunk> passes, const EntitySpan& span) {
  if (passes.size() < 2) {
    throw Error(ErrorCode::kInvalidConfig, "MC dropout needs at least two passes");
  }
  const Chunk& first = passes.front();
  for (std::size_t p = 1; p < passes.size(); ++p) {
    const Chunk& pass = passes[p];
    if (pass.size() != first.size()) {
      throw Error(ErrorCode::kPassMisalignment,
                  "pass " + std::to_string(p) + " has " + std::to_string(pass.size()) +
                      " tokens, first pass has " + std::to_string(first.size()));
    }
    for (std::size_t t = 0; t < first.size(); ++t) {
      if (pass.tokens[t].text != first.tokens[t].text) {
        throw Error(ErrorCode::kPassMisalignment,
                    "pass " + std::to_string(p) + " token " + std::to_string(t) + " is \"" +
                        pass.tokens[t].text + "\", expected \"" + first.tokens[t].text + "\"");
      }
    }
  }
  if (span.anchor >= first.size()) {
    throw Error(ErrorCode::kAnchorOutOfRange, "anchor outside the passes");
  }
  McDropoutStats stats;
  stats.predicted_class = Argmax(first.tokens[span.anchor].probs);
  const double n = static_cast<double>(passes.size());
  for (const Chunk& pass : passes) stats.mean += pass.tokens[span.anchor].probs[stats.predicted_class];
  stats.mean /= n;
  for (const Chunk& pass : passes) {
    const double d = pass.tokens[span.anchor].probs[stats.predicted_class] - stats.mean;
    stats.variance += d * d;
  }
  stats.variance /= n;
  return stats;
}

Decision McDropoutFilter(const McDropoutStats& stats, double mean_cutoff, double var_cutoff) {
  return stats.mean < mean_cutoff || stats.variance > var_cutoff ? Decision::kDrop
                                                                 : Decision::kKeep;
}

std::string_view MethodName(BaselineMethod method) {
  switch (method) {
    case BaselineMethod::kSoftmax: return "softmax";
    case BaselineMethod::kTemperature: return "temp";
    case BaselineMethod::kEntropy: return "entropy";
    case BaselineMethod::kMcDropout: return "mcdropout";
  }
  return "";
}

std::optional<BaselineMethod> ParseMethod(std::string_view name) {
  for (auto method : {BaselineMethod::kSoftmax, BaselineMethod::kTemperature,
                      BaselineMethod::kEntropy, BaselineMethod::kMcDropout}) {
    if (MethodName(method) == name) return method;
  }
  return std::nullopt;
}

BaselineGrid BaselineGrid::Default(BaselineMethod method) {
  BaselineGrid grid;
  grid.thresholds = Range(0.0, 1.0, 0.01);
  grid.temperatures = {1.0};
  grid.entropy_cutoffs = {1e9};
  grid.mc_mean_cutoffs = {0.0};
  grid.mc_var_cutoffs = {1.0};
  switch (method) {
    case BaselineMethod::kSoftmax:
      break;
    case BaselineMethod::kTemperature:
      grid.temperatures = Range(0.25, 4.0, 0.25);
      break;
    case BaselineMethod::kEntropy:
      grid.thresholds = {0.0};
      grid.entropy_cutoffs = Range(0.0, 1.1, 0.01);
      break;
    case BaselineMethod::kMcDropout:
      grid.thresholds = {0.0};
      grid.mc_mean_cutoffs = Range(0.0, 1.0, 0.05);
      grid.mc_var_cutoffs = {0.0005, 0.001, 0.005, 0.01, 0.05, 1.0};
      break;
  }
  return grid;
}

BaselineGrid BaselineGrid::Parse(BaselineMethod method, std::string_view text) {
  BaselineGrid grid = Default(method);
  while (!text.empty()) {
    const auto semi = text.find(';');
    std::string_view part = text.substr(0, semi);
    const auto eq = part.find('=');
    std::string key;
    std::string_view values = part;
    if (eq != std::string_view::npos) {
      key = std::string(part.substr(0, eq));
      values = part.substr(eq + 1);
    } else {
      switch (method) {
        case BaselineMethod::kSoftmax: key = "tau"; break;
        case BaselineMethod::kTemperature: key = "T"; break;
        case BaselineMethod::kEntropy: key = "h"; break;
        case BaselineMethod::kMcDropout: key = "mean"; break;
      }
    }
    if (!part.empty()) {
      auto axis = ParseAxis(values);
      if (key == "tau") grid.thresholds = std::move(axis);
      else if (key == "T") grid.temperatures = std::move(axis);
      else if (key == "h") grid.entropy_cutoffs = std::move(axis);
      else if (key == "mean") grid.mc_mean_cutoffs = std::move(axis);
      else if (key == "var") grid.mc_var_cutoffs = std::move(axis);
      else throw Error(ErrorCode::kInvalidConfig, "unknown grid axis \"" + key + "\"");
    }
    if (semi == std::string_view::npos) break;
    text.remove_prefix(semi + 1);
  }
  return grid;
}

std::vector<BaselineConfig> BaselineGrid::Points(BaselineMethod method) const {
  std::vector<BaselineConfig> points;
  BaselineConfig base;
  switch (method) {
    case BaselineMethod::kSoftmax:
      for (double tau : thresholds) {
        base.threshold = tau;
        points.push_back(base);
      }
      break;
    case BaselineMethod::kTemperature:
      for (double temp : temperatures) {
        for (double tau : thresholds) {
          base.temperature = temp;
          base.threshold = tau;
          points.push_back(base);
        }
      }
      break;
    case BaselineMethod::kEntropy:
      for (double h : entropy_cutoffs) {
        base.entropy_cutoff = h;
        points.push_back(base);
      }
      break;
    case BaselineMethod::kMcDropout:
      for (double mean : mc_mean_cutoffs) {
        for (double var : mc_var_cutoffs) {
          base.mc_mean_cutoff = mean;
          base.mc_var_cutoff = var;
          points.push_back(base);
        }
      }
      break;
  }
  for (const auto& p : points) p.Validate();
  return points;
}

Decision ApplyBaseline(BaselineMethod method, const BaselineConfig& config,
                       const CandidateSpan& candidate) {
  const Chunk& chunk = *candidate.chunk;
  switch (method) {
    case BaselineMethod::kSoftmax:
      return SoftmaxThresholdFilter(chunk, candidate.span, config.threshold);
    case BaselineMethod::kTemperature:
      return TemperatureThresholdFilter(chunk, candidate.span, config.temperature,
                                        config.threshold);
    case BaselineMethod::kEntropy:
      return EntropyFilter(chunk, candidate.span, config.entropy_cutoff);
    case BaselineMethod::kMcDropout:
      if (!candidate.mc) {
        throw Error(ErrorCode::kInvalidConfig, "MC dropout needs multi-pass statistics");
      }
      return McDropoutFilter(*candidate.mc, config.mc_mean_cutoff, config.mc_var_cutoff);
  }
  return Decision::kKeep;
}

std::vector<GridResult> GridSearch(BaselineMethod method, std::span<const CandidateSpan> spans,
                                   const BaselineGrid& grid, std::size_t missed_gold) {
  const auto points = grid.Points(method);
  if (method == BaselineMethod::kMcDropout) {
    for (const auto& s : spans) {
      if (!s.mc) throw Error(ErrorCode::kInvalidConfig, "MC dropout needs multi-pass statistics");
    }
  }
  Counts base{0, 0, missed_gold};
  for (const auto& s : spans) (s.is_tp ? base.tp : base.fp) += 1;

  std::vector<GridResult> results(points.size());
  const auto n = static_cast<long>(points.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    GridResult& r = results[i];
    r.method = method;
    r.config = points[i];
    Counts kept{0, 0, missed_gold};
    for (const auto& s : spans) {
      const bool keep = ApplyBaseline(method, r.config, s) == Decision::kKeep;
      if (s.is_tp) {
        (keep ? kept.tp : kept.fn) += 1;
      } else if (keep) {
        kept.fp += 1;
      }
    }
    r.counts = kept;
    r.drops = ComputeDropRates(base, kept);
    r.row = RowFromCounts(kept);
    r.row.tp_drop_pct = r.drops.tp_drop_pct;
    r.row.fp_drop_pct = r.drops.fp_drop_pct;
  }
  return results;
}

const GridResult& BestByF1(std::span<const GridResult> results) {
  if (results.empty()) throw Error(ErrorCode::kInvalidConfig, "empty grid");
  std::size_t best = 0;
  for (std::size_t i = 1; i < results.size(); ++i) {
    if (results[i].row.f1 > results[best].row.f1) best = i;
  }
  return results[best];
}

const GridResult* BestUnderTpBudget(std::span<const GridResult> results, double max_tp_drop_pct) {
  const GridResult* best = nullptr;
  for (const auto& r : results) {
    if (r.drops.tp_drop_pct > max_tp_drop_pct) continue;
    if (best == nullptr || r.drops.fp_drop_pct > best->drops.fp_drop_pct) best = &r;
  }
  return best;
}

std::string GridCsvHeader() {
  return "method,tau,temperature,entropy_cutoff,mc_mean_cutoff,mc_var_cutoff,kept_tp,kept_fp,fn,"
         "tp_drop_pct,fp_drop_pct,precision,recall,f1";
}

std::string GridCsvRow(const GridResult& r) {
  std::ostringstream out;
  out << MethodName(r.method) << ',' << FormatNumber(r.config.threshold) << ','
      << FormatNumber(r.config.temperature) << ',' << FormatNumber(r.config.entropy_cutoff) << ','
      << FormatNumber(r.config.mc_mean_cutoff) << ',' << FormatNumber(r.config.mc_var_cutoff) << ','
      << r.counts.tp << ',' << r.counts.fp << ',' << r.counts.fn << ','
      << FormatNumber(r.drops.tp_drop_pct) << ',' << FormatNumber(r.drops.fp_drop_pct) << ','
      << FormatNumber(r.row.precision) << ',' << FormatNumber(r.row.recall) << ','
      << FormatNumber(r.row.f1);
  return out.str();
}

}  // namespace nrf
