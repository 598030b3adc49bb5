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

#include "nrf/pipeline.h"

#include <omp.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <tuple>

#include "nrf/error.h"
#include "nrf/log.h"
#include "nrf/record_io.h"

namespace nrf {
namespace {

using nlohmann::json;

std::string_view ExclusionName(PdmExclusion e) {
  return e == PdmExclusion::kPhrase ? "phrase" : "anchor";
}

std::string CsvField(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

constexpr std::size_t kCsvMetaColumns = 4;

json FilteredSpanJson(const EntitySpan& span, const Classification& c, const std::string& path) {
  json entry = SpanToJson(span);
  entry["verdict"] = LabelName(c.verdict);
  entry["p_weak"] = c.p_weak;
  if (!path.empty()) entry["path"] = path;
  return entry;
}

std::size_t ResolveThreads(int threads) {
  return static_cast<std::size_t>(threads > 0 ? threads : omp_get_max_threads());
}

}  // namespace

void PipelineConfig::Validate() const {
  features.Validate();
  tree.Validate();
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "validation_fraction must lie in (0, 1)");
  }
  for (const auto& [method, grid] : baseline_grids) {
    if (!ParseMethod(method)) {
      throw Error(ErrorCode::kInvalidConfig, "unknown baseline method \"" + method + "\"");
    }
  }
}

json FeatureConfigToJson(const FeatureConfig& config) {
  json scopes = json::array();
  for (ScopeKind kind : kAllScopes) {
    if (config.enabled(kind)) scopes.push_back(ScopePrefix(kind));
  }
  return {{"decay_rate", config.decay.decay_rate},
          {"bins", config.decay.bins},
          {"neighbor_window", config.neighbor_window},
          {"scopes", std::move(scopes)},
          {"pdm_exclusion", ExclusionName(config.exclusion)}};
}

FeatureConfig FeatureConfigFromJson(const json& j, FeatureConfig c) {
  try {
    c.decay.decay_rate = j.value("decay_rate", c.decay.decay_rate);
    c.decay.bins = j.value("bins", c.decay.bins);
    c.neighbor_window = j.value("neighbor_window", c.neighbor_window);
    if (auto it = j.find("scopes"); it != j.end()) {
      c.scopes.fill(false);
      for (const auto& name : it->get<std::vector<std::string>>()) {
        const auto kind = ParseScope(name);
        if (!kind) throw Error(ErrorCode::kInvalidConfig, "unknown scope \"" + name + "\"");
        c.scopes[static_cast<std::size_t>(*kind)] = true;
      }
    }
    if (auto it = j.find("pdm_exclusion"); it != j.end()) {
      const auto name = it->get<std::string>();
      if (name == "phrase") c.exclusion = PdmExclusion::kPhrase;
      else if (name == "anchor") c.exclusion = PdmExclusion::kAnchorOnly;
      else throw Error(ErrorCode::kInvalidConfig, "unknown pdm_exclusion \"" + name + "\"");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("feature config: ") + e.what());
  }
  return c;
}

json PipelineConfigToJson(const PipelineConfig& config) {
  return {{"features", FeatureConfigToJson(config.features)},
          {"tree", TrainConfigToJson(config.tree)},
          {"orphan_policy", config.orphan_policy == OrphanPolicy::kPromote ? "promote" : "drop"},
          {"validation_fraction", config.validation_fraction},
          {"threads", config.threads},
          {"batch_size", config.batch_size},
          {"baseline_grids", config.baseline_grids},
          {"input", config.input},
          {"output_dir", config.output_dir}};
}

PipelineConfig PipelineConfigFromJson(const json& j) {
  PipelineConfig c;
  try {
    if (auto it = j.find("features"); it != j.end()) c.features = FeatureConfigFromJson(*it);
    if (auto it = j.find("tree"); it != j.end()) c.tree = TrainConfigFromJson(*it);
    const auto orphan = j.value("orphan_policy", std::string("promote"));
    if (orphan == "promote") c.orphan_policy = OrphanPolicy::kPromote;
    else if (orphan == "drop") c.orphan_policy = OrphanPolicy::kDrop;
    else throw Error(ErrorCode::kInvalidConfig, "unknown orphan_policy \"" + orphan + "\"");
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
    c.threads = j.value("threads", c.threads);
    c.batch_size = j.value("batch_size", c.batch_size);
    if (auto it = j.find("baseline_grids"); it != j.end()) {
      c.baseline_grids = it->get<std::map<std::string, std::string>>();
    }
    c.input = j.value("input", c.input);
    c.output_dir = j.value("output_dir", c.output_dir);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("pipeline config: ") + e.what());
  }
  return c;
}

PipelineConfig LoadPipelineConfig(const std::string& path) {
  const std::string text = ReadFile(path);
  try {
    return PipelineConfigFromJson(json::parse(text));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParseError, path + ": " + e.what());
  }
}

FeatureConfig FeatureConfigOf(const TreeModel& model, const FeatureConfig& fallback) {
  auto it = model.metadata().find("feature_config");
  if (it == model.metadata().end()) return fallback;
  return FeatureConfigFromJson(*it, fallback);
}

std::vector<std::optional<Label>> SpanLabels(const Chunk& chunk,
                                             std::span<const EntitySpan> spans) {
  std::vector<std::optional<Label>> labels;
  labels.reserve(spans.size());
  for (const auto& span : spans) {
    if (chunk.gold_spans) {
      const GoldSpan key = ToGoldSpan(span);
      const bool hit = std::find(chunk.gold_spans->begin(), chunk.gold_spans->end(), key) !=
                       chunk.gold_spans->end();
      labels.push_back(hit ? Label::kStrong : Label::kWeak);
    } else {
      labels.push_back(chunk.label);
    }
  }
  return labels;
}

LabeledCorpus BuildCorpus(std::vector<Chunk> chunks, const PipelineConfig& config) {
  LabeledCorpus corpus;
  corpus.chunks = std::move(chunks);
  corpus.jobs = CollectJobs(corpus.chunks, config.orphan_policy);
  corpus.labels.reserve(corpus.jobs.size());
  for (std::size_t j = 0; j < corpus.jobs.size();) {
    const std::size_t c = corpus.jobs[j].chunk;
    std::vector<EntitySpan> spans;
    while (j < corpus.jobs.size() && corpus.jobs[j].chunk == c) spans.push_back(corpus.jobs[j++].span);
    for (auto& label : SpanLabels(corpus.chunks[c], spans)) corpus.labels.push_back(label);
  }
  corpus.features = FeaturizeParallel(corpus.chunks, corpus.jobs, config.features, config.threads);
  return corpus;
}

std::vector<bool> ValidationMask(std::size_t num_chunks, double validation_fraction,
                                 std::uint64_t seed) {
  std::vector<std::size_t> order(num_chunks);
  for (std::size_t i = 0; i < num_chunks; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto held_out = static_cast<std::size_t>(
      std::llround(validation_fraction * static_cast<double>(num_chunks)));
  std::vector<bool> mask(num_chunks, false);
  for (std::size_t i = 0; i < held_out && i < num_chunks; ++i) mask[order[i]] = true;
  return mask;
}

Dataset DatasetFor(const LabeledCorpus& corpus, const std::vector<bool>& mask, bool want) {
  Dataset data(corpus.features.schema);
  for (std::size_t j = 0; j < corpus.jobs.size(); ++j) {
    if (mask[corpus.jobs[j].chunk] != want || !corpus.labels[j]) continue;
    data.Add(corpus.features.row(j), *corpus.labels[j]);
  }
  return data;
}

TreeModel TrainModel(const Dataset& data, const PipelineConfig& config) {
  TreeModel model = Train(data, config.tree);
  model.set_metadata({{"feature_config", FeatureConfigToJson(config.features)}});
  return model;
}

FilterEvaluation EvaluateFilter(const LabeledCorpus& corpus, const std::vector<bool>& mask,
                                const std::vector<bool>& keep) {
  std::vector<ChunkSpans> all;
  std::vector<ChunkSpans> kept;
  std::vector<ChunkSpans> gold;
  std::size_t j = 0;
  for (std::size_t c = 0; c < corpus.chunks.size(); ++c) {
    std::vector<EntitySpan> decoded;
    std::vector<bool> survives;
    while (j < corpus.jobs.size() && corpus.jobs[j].chunk == c) {
      decoded.push_back(corpus.jobs[j].span);
      survives.push_back(keep[j]);
      ++j;
    }
    if (!mask[c]) continue;
    const Chunk& chunk = corpus.chunks[c];
    auto truth = GoldSpansOf(chunk, decoded);
    if (!truth) continue;
    ChunkSpans a{chunk.id, {}};
    ChunkSpans k{chunk.id, {}};
    for (std::size_t i = 0; i < decoded.size(); ++i) {
      a.spans.push_back(ToGoldSpan(decoded[i]));
      if (survives[i]) k.spans.push_back(ToGoldSpan(decoded[i]));
    }
    all.push_back(std::move(a));
    kept.push_back(std::move(k));
    gold.push_back({chunk.id, std::move(*truth)});
  }
  FilterEvaluation result{EntityF1(all, gold), EntityF1(kept, gold)};
  ApplyDropRates(result.base, result.filtered);
  return result;
}

StreamStats StreamClassify(const TreeModel& model, const std::string& input_path,
                           std::ostream& out, const StreamOptions& options) {
  const FeatureConfig features = FeatureConfigOf(model, FeatureConfig{});
  const std::size_t batch_size =
      options.batch_size > 0 ? options.batch_size : ResolveThreads(options.threads);
  StreamStats stats;
  JsonlReader reader(input_path);
  std::vector<Chunk> batch;
  batch.reserve(batch_size);
  std::string line;

  auto flush = [&] {
    if (batch.empty()) return;
    const auto jobs = CollectJobs(batch, options.orphan_policy);
    FeatureMatrix matrix;
    std::vector<Classification> verdicts;
    if (!jobs.empty()) {
      matrix = FeaturizeParallel(batch, jobs, features, options.threads, model.schema_ptr());
      verdicts = ClassifyParallel(model, matrix, options.threshold, options.threads);
    }
    std::size_t j = 0;
    for (std::size_t c = 0; c < batch.size(); ++c) {
      json spans = json::array();
      for (; j < jobs.size() && jobs[j].chunk == c; ++j) {
        std::string path;
        if (options.explain) path = Explain(model, matrix.Vector(j), options.threshold).Format();
        spans.push_back(FilteredSpanJson(jobs[j].span, verdicts[j], path));
        ++stats.spans;
        if (verdicts[j].verdict == Label::kWeak) ++stats.weak;
      }
      out << json{{"id", batch[c].id}, {"spans", std::move(spans)}}.dump() << '\n';
    }
    batch.clear();
  };

  while (reader.Next(&line)) {
    stats.max_line_bytes = std::max(stats.max_line_bytes, line.size());
    Chunk chunk = ParseChunkLine(line, reader.line_number());
    try {
      ValidateChunk(chunk);
    } catch (const Error& e) {
      throw Error(e.code(), input_path + ":" + std::to_string(reader.line_number()) + ": " +
                                e.detail());
    }
    batch.push_back(std::move(chunk));
    ++stats.records;
    if (batch.size() >= batch_size) flush();
  }
  flush();
  if (!out) throw Error(ErrorCode::kIoError, "failed writing filtered predictions");
  return stats;
}

void WriteFeatureCsvHeader(std::ostream& out, const FeatureSchema& schema) {
  out << "chunk_id,span_start,span_end,label";
  for (const auto& name : schema.names()) out << ',' << name;
  out << '\n';
}

void WriteFeatureCsvRow(std::ostream& out, const std::string& chunk_id, const EntitySpan& span,
                        const std::optional<Label>& label, std::span<const double> values) {
  out << CsvField(chunk_id) << ',' << span.start << ',' << span.end << ','
      << (label ? LabelName(*label) : "");
  for (double v : values) out << ',' << FormatNumber(v);
  out << '\n';
}

FeatureTable ReadFeatureCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open \"" + path + "\"");
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParseError, path + ": empty feature file");
  auto header = SplitCsvLine(line);
  if (header.size() < kCsvMetaColumns || header[0] != "chunk_id" || header[3] != "label") {
    throw Error(ErrorCode::kParseError, path + ":1: unexpected feature header");
  }
  FeatureTable table;
  table.schema = std::make_shared<const FeatureSchema>(
      std::vector<std::string>(header.begin() + kCsvMetaColumns, header.end()));
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    auto fields = SplitCsvLine(line);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::kParseError, path + ":" + std::to_string(line_number) + ": expected " +
                                              std::to_string(header.size()) + " fields, got " +
                                              std::to_string(fields.size()));
    }
    table.chunk_ids.push_back(fields[0]);
    if (fields[3].empty()) {
      table.labels.push_back(std::nullopt);
    } else {
      auto label = ParseLabel(fields[3]);
      if (!label) {
        throw Error(ErrorCode::kParseError,
                    path + ":" + std::to_string(line_number) + ": unknown label \"" + fields[3] + "\"");
      }
      table.labels.push_back(label);
    }
    for (std::size_t i = kCsvMetaColumns; i < fields.size(); ++i) {
      try {
        std::size_t used = 0;
        table.values.push_back(std::stod(fields[i], &used));
        if (used != fields[i].size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw Error(ErrorCode::kParseError, path + ":" + std::to_string(line_number) +
                                                ": bad number \"" + fields[i] + "\"");
      }
    }
    ++table.rows;
  }
  return table;
}

std::vector<Label> ReadLabels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open \"" + path + "\"");
  std::vector<Label> labels;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto label = ParseLabel(line);
    if (!label) {
      throw Error(ErrorCode::kParseError,
                  path + ":" + std::to_string(line_number) + ": unknown label \"" + line + "\"");
    }
    labels.push_back(*label);
  }
  return labels;
}

Dataset DatasetFromTable(const FeatureTable& table, const std::vector<Label>& override_labels) {
  if (!override_labels.empty() && override_labels.size() != table.rows) {
    throw Error(ErrorCode::kSchemaMismatch, std::to_string(override_labels.size()) +
                                                " labels for " + std::to_string(table.rows) +
                                                " feature rows");
  }
  Dataset data(table.schema);
  for (std::size_t i = 0; i < table.rows; ++i) {
    if (!override_labels.empty()) {
      data.Add(table.row(i), override_labels[i]);
    } else if (table.labels[i]) {
      data.Add(table.row(i), *table.labels[i]);
    }
  }
  return data;
}

PredictionSets ReadPredictions(const std::string& path) {
  PredictionSets sets;
  JsonlReader reader(path);
  std::string line;
  while (reader.Next(&line)) {
    try {
      const json record = json::parse(line);
      ChunkSpans all{record.at("id").get<std::string>(), {}};
      ChunkSpans kept{all.chunk_id, {}};
      for (const json& s : record.at("spans")) {
        GoldSpan span{s.at("start").get<std::size_t>(), s.at("end").get<std::size_t>(),
                      s.value("type", std::string())};
        all.spans.push_back(span);
        if (s.value("verdict", std::string("strong")) != "weak") kept.spans.push_back(span);
      }
      sets.all.push_back(std::move(all));
      sets.kept.push_back(std::move(kept));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParseError,
                  path + ":" + std::to_string(reader.line_number()) + ": " + e.what());
    }
  }
  return sets;
}

std::vector<ChunkSpans> ReadGold(const std::string& path, OrphanPolicy policy) {
  std::vector<ChunkSpans> gold;
  ForEachChunk(path, [&](Chunk&& chunk) {
    auto truth = GoldSpansOf(chunk, DecodeSpans(chunk, policy));
    if (!truth) {
      throw Error(ErrorCode::kParseError,
                  "record \"" + chunk.id + "\" has neither gold_spans nor a label");
    }
    gold.push_back({chunk.id, std::move(*truth)});
  });
  return gold;
}

PipelineResult RunPipeline(const PipelineConfig& config) {
  config.Validate();
  if (config.input.empty()) throw Error(ErrorCode::kInvalidConfig, "pipeline input is not set");
  LabeledCorpus corpus = BuildCorpus(ReadChunks(config.input), config);
  const auto mask = ValidationMask(corpus.chunks.size(), config.validation_fraction, config.tree.seed);
  const Dataset train = DatasetFor(corpus, mask, false);
  const Dataset validation = DatasetFor(corpus, mask, true);
  Log(LogLevel::kInfo, "training on " + std::to_string(train.rows()) + " spans, validating on " +
                           std::to_string(validation.rows()));

  PipelineResult result;
  TreeModel model = TrainModel(train, config);
  result.tune = TuneThreshold(model, validation, config.tree.max_tp_drop);
  if (!result.tune.feasible) {
    Log(LogLevel::kWarn, "no threshold drops a false positive within the TP-drop budget");
  }
  model.set_decision_threshold(result.tune.threshold);
  const double theta = model.decision_threshold();

  const auto verdicts = ClassifyParallel(model, corpus.features, theta, config.threads);
  std::vector<bool> keep(verdicts.size());
  for (std::size_t j = 0; j < verdicts.size(); ++j) keep[j] = verdicts[j].verdict == Label::kStrong;
  result.validation = EvaluateFilter(corpus, mask, keep);

  const EvalRow& base_row = result.validation.base.overall;
  std::size_t validation_jobs = 0;
  for (const auto& job : corpus.jobs) validation_jobs += mask[job.chunk] ? 1 : 0;
  if (base_row.counts.tp + base_row.counts.fp > validation_jobs) {
    throw Error(ErrorCode::kCountInflation, "evaluation counted more predictions than decoded");
  }

  std::vector<CandidateSpan> candidates;
  for (std::size_t j = 0; j < corpus.jobs.size(); ++j) {
    if (!mask[corpus.jobs[j].chunk] || !corpus.labels[j]) continue;
    candidates.push_back({&corpus.chunks[corpus.jobs[j].chunk], corpus.jobs[j].span,
                          *corpus.labels[j] == Label::kStrong, std::nullopt});
  }
  json baselines = json::array();
  for (auto method : {BaselineMethod::kSoftmax, BaselineMethod::kTemperature, BaselineMethod::kEntropy}) {
    auto it = config.baseline_grids.find(std::string(MethodName(method)));
    const BaselineGrid grid = it == config.baseline_grids.end()
                                  ? BaselineGrid::Default(method)
                                  : BaselineGrid::Parse(method, it->second);
    const auto results = GridSearch(method, candidates, grid, base_row.counts.fn);
    const GridResult* best = BestUnderTpBudget(results, 100.0 * config.tree.max_tp_drop);
    if (best == nullptr) continue;
    result.baselines.push_back(*best);
    baselines.push_back({{"method", MethodName(method)},
                         {"params", GridCsvRow(*best)},
                         {"tp_drop_pct", best->drops.tp_drop_pct},
                         {"fp_drop_pct", best->drops.fp_drop_pct},
                         {"f1", best->row.f1}});
  }

  std::filesystem::create_directories(config.output_dir);
  const std::filesystem::path dir(config.output_dir);
  {
    auto out = OpenOutput((dir / "features.csv").string());
    WriteFeatureCsvHeader(out, *corpus.features.schema);
    for (std::size_t j = 0; j < corpus.jobs.size(); ++j) {
      WriteFeatureCsvRow(out, corpus.chunks[corpus.jobs[j].chunk].id, corpus.jobs[j].span,
                         corpus.labels[j], corpus.features.row(j));
    }
  }
  model.Save((dir / "model.json").string());
  {
    auto out = OpenOutput((dir / "filtered.jsonl").string());
    std::size_t j = 0;
    for (std::size_t c = 0; c < corpus.chunks.size(); ++c) {
      json spans = json::array();
      for (; j < corpus.jobs.size() && corpus.jobs[j].chunk == c; ++j) {
        const auto path = Explain(model, corpus.features.Vector(j), theta).Format();
        spans.push_back(FilteredSpanJson(corpus.jobs[j].span, verdicts[j], path));
      }
      out << json{{"id", corpus.chunks[c].id}, {"spans", std::move(spans)}}.dump() << '\n';
    }
  }

  result.report = {
      {"validation",
       {{"base", result.validation.base.ToJson()}, {"filtered", result.validation.filtered.ToJson()}}},
      {"tune",
       {{"threshold", result.tune.threshold},
        {"feasible", result.tune.feasible},
        {"tp_drop", result.tune.tp_drop},
        {"fp_drop", result.tune.fp_drop},
        {"tp_total", result.tune.tp_total},
        {"fp_total", result.tune.fp_total}}},
      {"model", {{"nodes", model.nodes().size()}, {"leaves", model.LeafCount()}, {"depth", model.Depth()}}},
      {"counts",
       {{"chunks", corpus.chunks.size()},
        {"spans", corpus.jobs.size()},
        {"train_rows", train.rows()},
        {"validation_rows", validation.rows()}}},
      {"baselines", std::move(baselines)},
      {"config", PipelineConfigToJson(config)}};
  {
    auto out = OpenOutput((dir / "report.json").string());
    out << result.report.dump(2) << '\n';
  }
  {
    auto out = OpenOutput((dir / "report.txt").string());
    out << FormatDropTable(result.validation.base, result.validation.filtered);
  }
  return result;
}

}  // namespace nrf
