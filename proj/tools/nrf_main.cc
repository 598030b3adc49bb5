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

// nrf: noise-removal filtering for token-level NER output.

#include <omp.h>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nrf/baselines.h"
#include "nrf/batch.h"
#include "nrf/core_model.h"
#include "nrf/error.h"
#include "nrf/eval.h"
#include "nrf/features.h"
#include "nrf/log.h"
#include "nrf/pdm.h"
#include "nrf/pipeline.h"
#include "nrf/record_io.h"
#include "nrf/synth.h"
#include "nrf/tree.h"

namespace {

using nlohmann::json;
using namespace nrf;

struct GlobalFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> decay_rate;
  std::optional<std::size_t> bins;
  std::optional<double> max_tp_drop;
  std::optional<int> threads;
};

PipelineConfig EffectiveConfig(const GlobalFlags& flags) {
  PipelineConfig config;
  if (!flags.config_path.empty()) config = LoadPipelineConfig(flags.config_path);
  if (flags.seed) config.tree.seed = *flags.seed;
  if (flags.decay_rate) config.features.decay.decay_rate = *flags.decay_rate;
  if (flags.bins) config.features.decay.bins = *flags.bins;
  if (flags.max_tp_drop) config.tree.max_tp_drop = *flags.max_tp_drop;
  if (flags.threads) config.threads = *flags.threads;
  if (config.threads > 0) omp_set_num_threads(config.threads);
  config.Validate();
  return config;
}

// Writes to `path`, or stdout when it is empty or "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") file_ = OpenOutput(path);
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }
  void Finish(const std::string& path) {
    stream().flush();
    if (!stream()) throw Error(ErrorCode::kIoError, "failed writing \"" + path + "\"");
  }

 private:
  std::ofstream file_;
};

OrphanPolicy ParseOrphan(const std::string& name) {
  if (name == "promote") return OrphanPolicy::kPromote;
  if (name == "drop") return OrphanPolicy::kDrop;
  throw Error(ErrorCode::kInvalidConfig, "unknown orphan policy \"" + name + "\"");
}

int RunValidate(const std::string& input) {
  std::size_t records = 0;
  ForEachChunk(input, [&](Chunk&&) { ++records; });
  std::cout << "ok: " << records << " records\n";
  return 0;
}

int RunDecode(const PipelineConfig& config, const std::string& input, const std::string& out_path) {
  Output out(out_path);
  ForEachChunk(input, [&](Chunk&& chunk) {
    json spans = json::array();
    for (const auto& span : DecodeSpans(chunk, config.orphan_policy)) spans.push_back(SpanToJson(span));
    out.stream() << json{{"id", chunk.id}, {"spans", std::move(spans)}}.dump() << '\n';
  });
  out.Finish(out_path);
  return 0;
}

int RunFeaturize(const PipelineConfig& config, const std::string& input, const std::string& out_path,
                 const std::string& format, const std::string& pdm_path) {
  if (format != "csv" && format != "jsonl") {
    throw Error(ErrorCode::kInvalidConfig, "unknown feature format \"" + format + "\"");
  }
  Output out(out_path);
  std::ofstream pdm_out;
  if (!pdm_path.empty()) pdm_out = OpenOutput(pdm_path);
  std::shared_ptr<const FeatureSchema> schema;
  std::vector<Chunk> batch;
  const std::size_t batch_size = 256;

  auto flush = [&] {
    if (batch.empty()) return;
    const auto jobs = CollectJobs(batch, config.orphan_policy);
    const auto matrix = FeaturizeParallel(batch, jobs, config.features, config.threads, schema);
    if (!schema) {
      schema = matrix.schema;
      if (format == "csv") WriteFeatureCsvHeader(out.stream(), *schema);
    }
    std::size_t j = 0;
    for (std::size_t c = 0; c < batch.size(); ++c) {
      std::vector<EntitySpan> spans;
      for (std::size_t k = j; k < jobs.size() && jobs[k].chunk == c; ++k) spans.push_back(jobs[k].span);
      const auto labels = SpanLabels(batch[c], spans);
      for (std::size_t i = 0; i < spans.size(); ++i, ++j) {
        if (format == "csv") {
          WriteFeatureCsvRow(out.stream(), batch[c].id, spans[i], labels[i], matrix.row(j));
        } else {
          json features = json::object();
          const auto row = matrix.row(j);
          for (std::size_t f = 0; f < schema->size(); ++f) features[schema->name(f)] = row[f];
          json record{{"chunk_id", batch[c].id}, {"span", SpanToJson(spans[i])}, {"features", std::move(features)}};
          if (labels[i]) record["label"] = LabelName(*labels[i]);
          out.stream() << record.dump() << '\n';
        }
        if (pdm_out.is_open()) {
          const auto pdm = ComputePdm(batch[c], spans[i], config.features.decay, config.features.exclusion);
          pdm_out << json{{"chunk_id", batch[c].id}, {"span", SpanToJson(spans[i])},
                          {"pdm", PdmToJson(pdm, batch[c].schema)}}.dump()
                  << '\n';
        }
      }
    }
    batch.clear();
  };
  ForEachChunk(input, [&](Chunk&& chunk) {
    batch.push_back(std::move(chunk));
    if (batch.size() >= batch_size) flush();
  });
  flush();
  out.Finish(out_path);
  return 0;
}

int RunSynth(const GlobalFlags& flags, const std::string& out_path, std::optional<std::size_t> n_strong,
             std::optional<std::size_t> n_weak, std::optional<double> flip_rate) {
  SynthConfig config;
  if (!flags.config_path.empty()) {
    json j;
    try {
      j = json::parse(ReadFile(flags.config_path));
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kParseError, flags.config_path + ": " + e.what());
    }
    config = SynthConfigFromJson(j.contains("synth") ? j["synth"] : j);
  }
  if (flags.seed) config.seed = *flags.seed;
  if (n_strong) config.n_strong = *n_strong;
  if (n_weak) config.n_weak = *n_weak;
  if (flip_rate) config.label_flip_rate = *flip_rate;
  config.Validate();
  Output out(out_path);
  const std::size_t total = config.n_strong + config.n_weak;
  for (std::size_t i = 0; i < total; ++i) {
    out.stream() << ChunkToJson(GenerateChunk(config, i)).dump() << '\n';
  }
  out.Finish(out_path);
  Log(LogLevel::kInfo, "wrote " + std::to_string(total) + " synthetic records");
  return 0;
}

int RunTrain(const PipelineConfig& config, const std::string& features_path,
             const std::string& labels_path, const std::string& model_path) {
  const FeatureTable table = ReadFeatureCsv(features_path);
  const auto labels = labels_path.empty() ? std::vector<Label>{} : ReadLabels(labels_path);
  const Dataset data = DatasetFromTable(table, labels);
  TreeModel model = TrainModel(data, config);
  model.Save(model_path);
  std::cout << "trained tree: " << model.nodes().size() << " nodes, " << model.LeafCount()
            << " leaves, depth " << model.Depth() << " on " << data.rows() << " rows\n";
  return 0;
}

int RunTune(const PipelineConfig& config, const std::string& model_path,
            const std::string& features_path, const std::string& labels_path,
            const std::string& out_path) {
  TreeModel model = TreeModel::Load(model_path);
  const FeatureTable table = ReadFeatureCsv(features_path);
  if (!(*table.schema == model.schema())) {
    throw Error(ErrorCode::kSchemaMismatch, "validation features do not match the model schema");
  }
  const auto labels = labels_path.empty() ? std::vector<Label>{} : ReadLabels(labels_path);
  Dataset data = DatasetFromTable(table, labels);
  Dataset aligned(model.schema_ptr());
  for (std::size_t i = 0; i < data.rows(); ++i) aligned.Add(data.row(i), data.label(i));
  const TuneResult result = TuneThreshold(model, aligned, config.tree.max_tp_drop);
  if (!result.feasible) {
    Log(LogLevel::kWarn, "NoFeasibleThreshold: no threshold drops a false positive within the TP-drop budget");
  }
  model.set_decision_threshold(result.threshold);
  model.Save(out_path.empty() ? model_path : out_path);
  std::cout << "threshold " << FormatNumber(result.threshold) << ": TP drop "
            << FormatNumber(100.0 * result.tp_drop) << "%, FP drop " << FormatNumber(100.0 * result.fp_drop)
            << "% (" << result.tp_dropped << "/" << result.tp_total << " TP, " << result.fp_dropped << "/"
            << result.fp_total << " FP)\n";
  return 0;
}

int RunClassify(const PipelineConfig& config, const std::string& model_path, const std::string& input,
                const std::string& out_path, std::optional<double> threshold, bool no_paths) {
  const TreeModel model = TreeModel::Load(model_path);
  StreamOptions options;
  options.threshold = threshold.value_or(model.decision_threshold());
  options.threads = config.threads;
  options.batch_size = config.batch_size;
  options.orphan_policy = config.orphan_policy;
  options.explain = !no_paths;
  Output out(out_path);
  const StreamStats stats = StreamClassify(model, input, out.stream(), options);
  out.Finish(out_path);
  Log(LogLevel::kInfo, std::to_string(stats.records) + " records, " + std::to_string(stats.spans) +
                           " spans, " + std::to_string(stats.weak) + " weak");
  return 0;
}

int RunExplain(const PipelineConfig& config, const std::string& model_path, const std::string& record_path,
               std::optional<double> threshold) {
  const TreeModel model = TreeModel::Load(model_path);
  Featurizer featurizer(FeatureConfigOf(model, config.features));
  const double theta = threshold.value_or(model.decision_threshold());
  ForEachChunk(record_path, [&](Chunk&& chunk) {
    for (const auto& span : DecodeSpans(chunk, config.orphan_policy)) {
      const auto path = Explain(model, featurizer.Assemble(chunk, span), theta);
      std::cout << "Record " << chunk.id << ", prediction \"" << span.text << "\" [" << span.start << ", "
                << span.end << "]\n"
                << path.FormatBlock() << "\n";
    }
  });
  return 0;
}

int RunEvaluate(const PipelineConfig& config, const std::string& pred_path, const std::string& gold_path,
                const std::string& base_path, const std::string& out_path) {
  const PredictionSets predictions = ReadPredictions(pred_path);
  const auto gold = ReadGold(gold_path, config.orphan_policy);
  const auto base_spans = base_path.empty() ? predictions.all : ReadPredictions(base_path).all;
  const EvalReport base = EntityF1(base_spans, gold);
  EvalReport filtered = EntityF1(predictions.kept, gold);
  ApplyDropRates(base, filtered);
  const json report{{"base", base.ToJson()}, {"filtered", filtered.ToJson()}};
  if (!out_path.empty()) {
    auto out = OpenOutput(out_path);
    out << report.dump(2) << '\n';
  } else {
    std::cout << report.dump(2) << '\n';
  }
  std::cout << FormatDropTable(base, filtered);
  return 0;
}

std::vector<std::string> SplitList(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

int RunBaseline(const PipelineConfig& config, const std::string& method_name, const std::string& input,
                const std::string& grid_text, const std::string& passes_text, const std::string& out_path) {
  const auto method = ParseMethod(method_name);
  if (!method) throw Error(ErrorCode::kInvalidConfig, "unknown baseline method \"" + method_name + "\"");
  std::string grid_spec = grid_text;
  if (grid_spec.empty()) {
    auto it = config.baseline_grids.find(method_name);
    if (it != config.baseline_grids.end()) grid_spec = it->second;
  }
  const BaselineGrid grid = grid_spec.empty() ? BaselineGrid::Default(*method) : BaselineGrid::Parse(*method, grid_spec);

  // The first pass (or --input) supplies the predictions under evaluation.
  std::vector<std::vector<Chunk>> passes;
  if (*method == BaselineMethod::kMcDropout) {
    const auto files = SplitList(passes_text);
    if (files.size() < 2) throw Error(ErrorCode::kInvalidConfig, "mcdropout needs --passes with at least two files");
    for (const auto& file : files) passes.push_back(ReadChunks(file));
    for (std::size_t p = 1; p < passes.size(); ++p) {
      if (passes[p].size() != passes[0].size()) {
        throw Error(ErrorCode::kPassMisalignment, "pass files hold different record counts");
      }
    }
  } else {
    if (input.empty()) throw Error(ErrorCode::kInvalidConfig, "--input is required");
    passes.push_back(ReadChunks(input));
  }
  const std::vector<Chunk>& chunks = passes.front();

  std::vector<CandidateSpan> candidates;
  std::size_t missed_gold = 0;
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    const auto spans = DecodeSpans(chunks[c], config.orphan_policy);
    const auto labels = SpanLabels(chunks[c], spans);
    if (chunks[c].gold_spans) {
      for (const auto& g : *chunks[c].gold_spans) {
        bool found = false;
        for (const auto& s : spans) found = found || ToGoldSpan(s) == g;
        missed_gold += found ? 0 : 1;
      }
    }
    std::vector<Chunk> aligned;
    if (passes.size() > 1) {
      for (const auto& pass : passes) {
        if (pass[c].id != chunks[c].id) {
          throw Error(ErrorCode::kPassMisalignment, "pass records are not in the same order");
        }
        aligned.push_back(pass[c]);
      }
    }
    for (std::size_t i = 0; i < spans.size(); ++i) {
      if (!labels[i]) continue;
      CandidateSpan candidate{&chunks[c], spans[i], *labels[i] == Label::kStrong, std::nullopt};
      if (!aligned.empty()) candidate.mc = McDropoutAggregate(aligned, spans[i]);
      candidates.push_back(std::move(candidate));
    }
  }
  const auto results = GridSearch(*method, candidates, grid, missed_gold);
  Output out(out_path);
  out.stream() << GridCsvHeader() << '\n';
  for (const auto& r : results) out.stream() << GridCsvRow(r) << '\n';
  out.Finish(out_path);
  const GridResult& best = BestByF1(results);
  Log(LogLevel::kInfo, "best F1 " + FormatNumber(best.row.f1) + " at " + GridCsvRow(best));
  return 0;
}

int RunPipelineCommand(PipelineConfig config, const std::string& input, const std::string& out_dir) {
  if (!input.empty()) config.input = input;
  if (!out_dir.empty()) config.output_dir = out_dir;
  const PipelineResult result = RunPipeline(config);
  std::cout << FormatDropTable(result.validation.base, result.validation.filtered);
  for (const auto& b : result.baselines) {
    std::cout << MethodName(b.method) << " baseline within TP budget: "
              << FormatDropPair(b.drops) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noise-removal filtering for token-level NER predictions"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags flags;
  app.add_option("--config", flags.config_path, "Pipeline configuration (JSON)");
  app.add_option("--seed", flags.seed, "Seed for splits, training and generation");
  app.add_option("--decay-rate", flags.decay_rate, "Gaussian decay rate R (default 1.0)");
  app.add_option("--bins", flags.bins, "Probability bins per class (default 10)");
  app.add_option("--max-tp-drop", flags.max_tp_drop, "TP-drop budget for tuning (default 0.06)");
  app.add_option("--threads", flags.threads, "Worker threads (default: all)");

  std::string input, out, model, features, labels, format = "csv", pdm_dump, record, pred, gold, base,
      method, grid, passes, out_dir, orphan;
  std::optional<double> threshold;
  std::optional<std::size_t> n_strong, n_weak;
  std::optional<double> flip_rate;
  bool no_paths = false;

  auto* validate = app.add_subcommand("validate", "Check records against the input format");
  validate->add_option("--input", input, "Records (JSONL)")->required();

  auto* decode = app.add_subcommand("decode", "Decode BIO argmax tags into spans");
  decode->add_option("--input", input, "Records (JSONL)")->required();
  decode->add_option("--out", out, "Span output (JSONL, default stdout)");
  decode->add_option("--orphan", orphan, "Orphan I policy: promote|drop");

  auto* featurize = app.add_subcommand("featurize", "Export the feature matrix");
  featurize->add_option("--input", input, "Records (JSONL)")->required();
  featurize->add_option("--out", out, "Feature output (default stdout)");
  featurize->add_option("--format", format, "csv|jsonl");
  featurize->add_option("--dump-pdm", pdm_dump, "Write each span's full density grid as JSONL");

  auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic corpus");
  synth->add_option("--out", out, "Corpus output (JSONL)")->required();
  synth->add_option("--n-strong", n_strong, "Strong cases");
  synth->add_option("--n-weak", n_weak, "Weak cases");
  synth->add_option("--flip-rate", flip_rate, "Label flip rate");

  auto* train = app.add_subcommand("train", "Train the Strong/Weak tree");
  train->add_option("--features", features, "Feature CSV")->required();
  train->add_option("--labels", labels, "Label file, one strong|weak per row (default: CSV label column)");
  train->add_option("--model", model, "Model output (JSON)")->required();

  auto* tune = app.add_subcommand("tune", "Pick the decision threshold under the TP-drop budget");
  tune->add_option("--model", model, "Model (JSON)")->required();
  tune->add_option("--features", features, "Validation feature CSV")->required();
  tune->add_option("--labels", labels, "Label file (default: CSV label column)");
  tune->add_option("--out", out, "Tuned model output (default: overwrite --model)");

  auto* classify = app.add_subcommand("classify", "Flag predictions Strong or Weak");
  classify->add_option("--model", model, "Model (JSON)")->required();
  classify->add_option("--input", input, "Records (JSONL)")->required();
  classify->add_option("--out", out, "Filtered predictions (JSONL, default stdout)");
  classify->add_option("--threshold", threshold, "Decision threshold (default: model's)");
  classify->add_flag("--no-paths", no_paths, "Omit decision paths");

  auto* explain = app.add_subcommand("explain", "Print decision paths for each prediction");
  explain->add_option("--model", model, "Model (JSON)")->required();
  explain->add_option("--record", record, "Records (JSONL)")->required();
  explain->add_option("--threshold", threshold, "Decision threshold (default: model's)");

  auto* evaluate = app.add_subcommand("evaluate", "Entity-level metrics and drop rates");
  evaluate->add_option("--pred", pred, "Filtered predictions (JSONL)")->required();
  evaluate->add_option("--gold", gold, "Records with gold_spans or labels (JSONL)")->required();
  evaluate->add_option("--base", base, "Unfiltered predictions (default: every span in --pred)");
  evaluate->add_option("--out", out, "Report output (JSON, default stdout)");

  auto* baseline = app.add_subcommand("baseline", "Grid-search a reference filter");
  baseline->add_option("--method", method, "softmax|temp|entropy|mcdropout")->required();
  baseline->add_option("--input", input, "Records (JSONL)");
  baseline->add_option("--grid", grid, "Grid, e.g. \"tau=0.5:1:0.05\" or \"T=0.5,1,2;tau=0.9\"");
  baseline->add_option("--passes", passes, "Comma-separated pass files for mcdropout");
  baseline->add_option("--out", out, "Metrics CSV (default stdout)");

  auto* run = app.add_subcommand("run", "End-to-end pipeline");
  run->add_option("--input", input, "Labeled records (JSONL)");
  run->add_option("--out-dir", out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (synth->parsed()) return RunSynth(flags, out, n_strong, n_weak, flip_rate);
    PipelineConfig config = EffectiveConfig(flags);
    if (!orphan.empty()) config.orphan_policy = ParseOrphan(orphan);
    if (validate->parsed()) return RunValidate(input);
    if (decode->parsed()) return RunDecode(config, input, out);
    if (featurize->parsed()) return RunFeaturize(config, input, out, format, pdm_dump);
    if (train->parsed()) return RunTrain(config, features, labels, model);
    if (tune->parsed()) return RunTune(config, model, features, labels, out);
    if (classify->parsed()) return RunClassify(config, model, input, out, threshold, no_paths);
    if (explain->parsed()) return RunExplain(config, model, record, threshold);
    if (evaluate->parsed()) return RunEvaluate(config, pred, gold, base, out);
    if (baseline->parsed()) return RunBaseline(config, method, input, grid, passes, out);
    if (run->parsed()) return RunPipelineCommand(config, input, out_dir);
  } catch (const Error& e) {
    std::cerr << "nrf: " << e.what() << "\n";
    return ExitCodeFor(e.code());
  } catch (const std::exception& e) {
    std::cerr << "nrf: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
