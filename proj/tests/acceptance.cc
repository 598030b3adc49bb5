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


// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <new>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nrf/baselines.h"
#include "nrf/batch.h"
#include "nrf/error.h"
#include "nrf/eval.h"
#include "nrf/features.h"
#include "nrf/pdm.h"
#include "nrf/pipeline.h"
#include "nrf/record_io.h"
#include "nrf/synth.h"
#include "nrf/tree.h"
#include "oracles/path_parser.h"
#include "oracles/pdm_oracle.h"
#include "test_util.h"

// Heap accounting for the streaming criterion. Every allocation carries a
// 16-byte header holding its size.
namespace {

std::atomic<long long> g_heap_bytes{0};
std::atomic<long long> g_heap_peak{0};

constexpr std::size_t kHeader = 16;

void* CountedAlloc(std::size_t size) {
  void* raw = std::malloc(size + kHeader);
  if (raw == nullptr) return nullptr;
  *static_cast<std::size_t*>(raw) = size;
  const long long now = g_heap_bytes.fetch_add(static_cast<long long>(size)) + static_cast<long long>(size);
  long long peak = g_heap_peak.load();
  while (now > peak && !g_heap_peak.compare_exchange_weak(peak, now)) {
  }
  return static_cast<char*>(raw) + kHeader;
}

void CountedFree(void* p) {
  if (p == nullptr) return;
  void* raw = static_cast<char*>(p) - kHeader;
  g_heap_bytes.fetch_sub(static_cast<long long>(*static_cast<std::size_t*>(raw)));
  std::free(raw);
}

}  // namespace

void* operator new(std::size_t size) {
  if (void* p = CountedAlloc(size)) return p;
  throw std::bad_alloc();
}
void* operator new[](std::size_t size) {
  if (void* p = CountedAlloc(size)) return p;
  throw std::bad_alloc();
}
void* operator new(std::size_t size, const std::nothrow_t&) noexcept { return CountedAlloc(size); }
void* operator new[](std::size_t size, const std::nothrow_t&) noexcept { return CountedAlloc(size); }
void operator delete(void* p) noexcept { CountedFree(p); }
void operator delete[](void* p) noexcept { CountedFree(p); }
void operator delete(void* p, std::size_t) noexcept { CountedFree(p); }
void operator delete[](void* p, std::size_t) noexcept { CountedFree(p); }
void operator delete(void* p, const std::nothrow_t&) noexcept { CountedFree(p); }
void operator delete[](void* p, const std::nothrow_t&) noexcept { CountedFree(p); }

namespace nrf {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using testing::Within;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void Require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail << "failed: ";
      else detail << "; ";
      detail << what;
      pass = false;
    }
  }
};

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

int g_failures = 0;

void Report(int number, const std::string& title, const std::function<void(Outcome&)>& body) {
  Outcome outcome;
  const auto start = Clock::now();
  try {
    body(outcome);
  } catch (const std::exception& e) {
    outcome.pass = false;
    outcome.detail << "exception: " << e.what();
  }
  const double secs = Seconds(start);
  if (!outcome.pass) ++g_failures;
  std::printf("%s AC%d %s (%.2fs) %s\n", outcome.pass ? "PASS" : "FAIL", number, title.c_str(), secs,
              outcome.detail.str().c_str());
  std::fflush(stdout);
}

std::string Fmt(double v) { return FormatNumber(v); }

// State shared between the end-to-end criteria.
struct EndToEnd {
  fs::path dir;
  PipelineConfig config;
  PipelineResult result;
  LabeledCorpus corpus;
  std::vector<bool> mask;
  TreeModel* model = nullptr;
  std::optional<TreeModel> model_storage;
  bool ready = false;
};

EndToEnd g_e2e;

void WriteCorpus(const fs::path& path, const SynthConfig& config) {
  std::ofstream out(path);
  for (std::size_t i = 0; i < config.n_strong + config.n_weak; ++i) {
    out << ChunkToJson(GenerateChunk(config, i)).dump() << '\n';
  }
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path.string());
}

void Criterion1(Outcome& out) {
  const auto start = Clock::now();
  const Chunk s1 = testing::FixtureChunk("sentence1.jsonl");
  const Chunk s2 = testing::FixtureChunk("sentence2.jsonl");
  const std::size_t O = 0, B = 1, I = 2;
  const auto c1 = CumulativeBins(s1, 4, 10);
  const auto c2 = CumulativeBins(s2, 7, 10);
  const auto p1 = ComputePdm(s1, 4, DecayConfig{});
  const auto p2 = ComputePdm(s2, 7, DecayConfig{});
  struct Check {
    const char* name;
    double value, expect, tol;
  };
  const Check checks[] = {
      {"S1 cum Bin-10 O", c1.at(9, O), 6.946, 0.001}, {"S1 cum Bin-1 I", c1.at(0, I), 0.053, 0.001},
      {"S1 cum Bin-1 B", c1.at(0, B), 0.001, 0.001},  {"S2 cum Bin-10 O", c2.at(9, O), 6.999, 0.001},
      {"S1 pdm Bin-1 I", p1.at(0, I), 0.004, 0.0005}, {"S1 pdm Bin-10 O", p1.at(9, O), 0.185, 0.0005},
      {"S2 pdm Bin-10 O", p2.at(9, O), 0.094, 0.0005},
  };
  for (const auto& c : checks) {
    out.Require(Within(c.value, c.expect, c.tol),
                std::string(c.name) + "=" + Fmt(c.value) + " vs " + Fmt(c.expect));
  }
  const double secs = Seconds(start);
  out.Require(secs < 1.0, "runtime " + Fmt(secs) + "s");
  out.detail << "S1 Bin-1 I=" << Fmt(p1.at(0, I)) << " Bin-10 O=" << Fmt(p1.at(9, O))
             << "; S2 cum Bin-10 O=" << Fmt(c2.at(9, O));
}

void Criterion2(Outcome& out) {
  const auto start = Clock::now();
  std::mt19937_64 rng(20240601);
  double worst = 0.0;
  std::size_t cells = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t entities = 1 + trial % 3;  // K = 3, 5, 7
    const std::size_t length = 1 + rng() % 32;
    const Chunk chunk = testing::RandomChunk(rng, length, entities);
    const std::size_t anchor = rng() % length;
    const auto pdm = ComputePdm(chunk, anchor, DecayConfig{});
    const auto expect = oracle::Pdm(chunk, anchor, anchor, anchor, 1.0, 10);
    for (std::size_t b = 0; b < 10; ++b) {
      for (std::size_t k = 0; k < chunk.schema.num_classes(); ++k) {
        worst = std::max(worst, std::abs(pdm.at(b, k) - expect[b][k]));
        ++cells;
      }
    }
  }
  const double secs = Seconds(start);
  out.Require(worst <= 1e-12, "max cell difference " + Fmt(worst));
  out.Require(secs < 10.0, "runtime " + Fmt(secs) + "s");
  out.detail << cells << " cells, max |diff|=" << Fmt(worst);
}

void Criterion3(Outcome& out) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst_identity = 0.0, worst_sum = 0.0;
  std::size_t argmax_changes = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto p = testing::RandomProbs(rng, 3 + 2 * (trial % 3), 0.0);
    const auto same = TemperatureScale(p, 1.0);
    for (std::size_t k = 0; k < p.size(); ++k) worst_identity = std::max(worst_identity, std::abs(same[k] - p[k]));
    // (0, 100]: 1 - unit is in (0, 1].
    const double temp = 100.0 * (1.0 - unit(rng));
    const auto scaled = TemperatureScale(p, temp);
    double sum = 0.0;
    for (double v : scaled) sum += v;
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    if (Argmax(scaled) != Argmax(p)) ++argmax_changes;
  }
  out.Require(worst_identity <= 1e-12, "T=1 identity off by " + Fmt(worst_identity));
  out.Require(worst_sum <= 1e-12, "sum off by " + Fmt(worst_sum));
  out.Require(argmax_changes == 0, std::to_string(argmax_changes) + " argmax changes");
  out.detail << "identity " << Fmt(worst_identity) << ", sum " << Fmt(worst_sum);
}

struct Drop {
  double tp_pct, fp_pct;
};

// Every distinct outcome of SoftMax thresholding over the candidate spans.
std::vector<Drop> SoftmaxSweep(const std::vector<CandidateSpan>& spans) {
  std::vector<double> scores;
  std::size_t tp = 0, fp = 0;
  for (const auto& s : spans) {
    scores.push_back(SpanMinMaxProbability(*s.chunk, s.span));
    (s.is_tp ? tp : fp) += 1;
  }
  std::vector<double> taus = {0.0, std::nextafter(1.0, 2.0)};
  for (double v : scores) {
    taus.push_back(v);
    taus.push_back(std::nextafter(v, 2.0));
  }
  std::sort(taus.begin(), taus.end());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
  std::vector<Drop> drops;
  for (double tau : taus) {
    std::size_t tp_drop = 0, fp_drop = 0;
    for (const auto& s : spans) {
      if (SoftmaxThresholdFilter(*s.chunk, s.span, tau) == Decision::kDrop) (s.is_tp ? tp_drop : fp_drop) += 1;
    }
    drops.push_back({100.0 * tp_drop / tp, 100.0 * fp_drop / fp});
  }
  return drops;
}

std::vector<CandidateSpan> ValidationCandidates(const LabeledCorpus& corpus, const std::vector<bool>& mask) {
  std::vector<CandidateSpan> candidates;
  for (std::size_t j = 0; j < corpus.jobs.size(); ++j) {
    if (!mask[corpus.jobs[j].chunk] || !corpus.labels[j]) continue;
    candidates.push_back({&corpus.chunks[corpus.jobs[j].chunk], corpus.jobs[j].span,
                          *corpus.labels[j] == Label::kStrong, std::nullopt});
  }
  return candidates;
}

void Criterion4(Outcome& out) {
  const auto start = Clock::now();
  g_e2e.dir = fs::temp_directory_path() / "nrf_acceptance";
  fs::remove_all(g_e2e.dir);
  fs::create_directories(g_e2e.dir);
  const SynthConfig synth;  // 2000 Strong + 2000 Weak, seed 42
  const fs::path corpus_path = g_e2e.dir / "corpus.jsonl";
  WriteCorpus(corpus_path, synth);

  PipelineConfig& config = g_e2e.config;
  config.input = corpus_path.string();
  config.output_dir = (g_e2e.dir / "run").string();
  g_e2e.result = RunPipeline(config);
  const PipelineResult& r = g_e2e.result;
  const EvalRow& nr = r.validation.filtered.overall;

  g_e2e.corpus = BuildCorpus(ReadChunks(config.input), config);
  g_e2e.mask = ValidationMask(g_e2e.corpus.chunks.size(), config.validation_fraction, config.tree.seed);
  g_e2e.model_storage = TreeModel::Load((fs::path(config.output_dir) / "model.json").string());
  g_e2e.model = &*g_e2e.model_storage;
  g_e2e.ready = true;

  const auto sweep = SoftmaxSweep(ValidationCandidates(g_e2e.corpus, g_e2e.mask));
  double best_softmax_fp = 0.0;
  for (const auto& d : sweep) {
    if (d.tp_pct <= 6.0) best_softmax_fp = std::max(best_softmax_fp, d.fp_pct);
  }
  out.Require(best_softmax_fp < 10.0, "SoftMax FP drop " + Fmt(best_softmax_fp) + "% within TP budget");
  out.Require(nr.fp_drop_pct >= 50.0, "NR FP drop " + Fmt(nr.fp_drop_pct) + "%");
  out.Require(nr.tp_drop_pct <= 6.0, "NR TP drop " + Fmt(nr.tp_drop_pct) + "%");
  const double secs = Seconds(start);
  out.Require(secs < 60.0, "runtime " + Fmt(secs) + "s");
  char line[256];
  std::snprintf(line, sizeof(line),
                "validation: NR (%.1f%% TP, %.1f%% FP drop), best SoftMax within 6%% TP drop: %.1f%% FP "
                "drop over %zu thresholds",
                nr.tp_drop_pct, nr.fp_drop_pct, best_softmax_fp, sweep.size());
  out.detail << line;
}

// The configured budget binds on this run and on reruns with other seeds and
// budgets.
void Criterion5(Outcome& out) {
  if (!g_e2e.ready) throw Error(ErrorCode::kInvalidConfig, "criterion 4 did not produce a run");
  const double budget = g_e2e.config.tree.max_tp_drop;
  const TuneResult& t = g_e2e.result.tune;
  out.Require(t.tp_drop <= budget, "tuned TP drop " + Fmt(t.tp_drop) + " > " + Fmt(budget));
  out.Require(g_e2e.result.validation.filtered.overall.tp_drop_pct <= 100.0 * budget,
              "evaluated TP drop " + Fmt(g_e2e.result.validation.filtered.overall.tp_drop_pct) + "%");
  out.detail << "seed 42 budget " << Fmt(budget) << ": TP drop " << Fmt(t.tp_drop);

  for (std::uint64_t seed : {7, 8, 9}) {
    for (double max_tp : {0.01, 0.03, 0.06}) {
      SynthConfig synth;
      synth.seed = seed;
      PipelineConfig config;
      config.tree.seed = seed;
      config.tree.max_tp_drop = max_tp;
      const LabeledCorpus corpus = BuildCorpus(Generate(synth), config);
      const auto mask = ValidationMask(corpus.chunks.size(), config.validation_fraction, seed);
      const TreeModel model = TrainModel(DatasetFor(corpus, mask, false), config);
      const Dataset validation = DatasetFor(corpus, mask, true);
      const TuneResult r = TuneThreshold(model, validation, max_tp);
      // Recount independently of the tuner.
      std::size_t tp = 0, tp_dropped = 0;
      for (std::size_t i = 0; i < validation.rows(); ++i) {
        if (validation.label(i) != Label::kStrong) continue;
        ++tp;
        if (ClassifyRow(model, validation.row(i), r.threshold).verdict == Label::kWeak) ++tp_dropped;
      }
      const double drop = static_cast<double>(tp_dropped) / static_cast<double>(tp);
      out.Require(drop <= max_tp, "seed " + std::to_string(seed) + " budget " + Fmt(max_tp) +
                                      ": TP drop " + Fmt(drop));
    }
  }
  out.detail << "; 9 reruns within budget";
}

void Criterion6(Outcome& out) {
  if (!g_e2e.ready) throw Error(ErrorCode::kInvalidConfig, "criterion 4 did not produce a run");
  const TreeModel& model = *g_e2e.model;
  const FeatureMatrix& features = g_e2e.corpus.features;
  std::mt19937_64 rng(606);
  std::size_t predicates = 0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t j = rng() % features.rows;
    const FeatureVector vector = features.Vector(j);
    const DecisionPath path = Explain(model, vector, model.decision_threshold());
    const Classification c = Classify(model, vector);
    out.Require(path.verdict == c.verdict, "verdict differs from classify at row " + std::to_string(j));
    for (const auto& step : path.steps) {
      ++predicates;
      const double value = vector.Get(step.feature);
      const bool holds = step.op == Comparator::kLessEqual ? value <= step.threshold : value > step.threshold;
      out.Require(holds && value == step.observed, "predicate " + step.feature + " fails at row " + std::to_string(j));
    }
    const std::string text = path.Format();
    const auto parsed = oracle::ParsePath(text);
    out.Require(parsed.has_value(), "unparseable path at row " + std::to_string(j));
    if (!parsed) continue;
    bool same = parsed->size() == path.steps.size();
    std::string rebuilt;
    for (std::size_t s = 0; same && s < parsed->size(); ++s) {
      const auto& p = (*parsed)[s];
      const auto& q = path.steps[s];
      same = p.feature == q.feature && p.value == q.threshold &&
             p.op == (q.op == Comparator::kLessEqual ? "<=" : ">");
      rebuilt += (s ? "\n& (" : "(") + p.feature + " " + p.op + " " + FormatNumber(p.value) + ")";
    }
    out.Require(same && rebuilt == text, "path does not round-trip at row " + std::to_string(j));
  }
  out.detail << "100 instances, " << predicates << " predicates";
}

void Criterion7(Outcome& out) {
  if (!g_e2e.ready) throw Error(ErrorCode::kInvalidConfig, "criterion 4 did not produce a run");
  std::string first;
  for (int run = 0; run < 2; ++run) {
    const LabeledCorpus corpus = BuildCorpus(ReadChunks(g_e2e.config.input), g_e2e.config);
    const auto mask = ValidationMask(corpus.chunks.size(), g_e2e.config.validation_fraction, g_e2e.config.tree.seed);
    const std::string bytes = TrainModel(DatasetFor(corpus, mask, false), g_e2e.config).Serialize();
    if (run == 0) first = bytes;
    else out.Require(bytes == first, "serialized models differ");
  }
  out.detail << "model " << first.size() << " bytes, identical";
}

void Criterion8(Outcome& out) {
  const DropRates rates = ComputeDropRates({100, 100, 0}, {94, 12, 6});
  out.Require(std::abs(rates.tp_drop_pct - 6.0) < 1e-9 && std::abs(rates.fp_drop_pct - 88.0) < 1e-9,
              "drop rates " + Fmt(rates.tp_drop_pct) + ", " + Fmt(rates.fp_drop_pct));
  out.Require(FormatDropPair(rates) == "(6%, 88%)", "formatted " + FormatDropPair(rates));
  std::vector<ChunkSpans> pred, gold;
  for (std::size_t i = 0; i < 10; ++i) {
    const std::string id = "c" + std::to_string(i);
    gold.push_back({id, {{0, 1, "Biomarker"}}});
    pred.push_back({id, {{0, i < 8 ? std::size_t{1} : std::size_t{2}, "Biomarker"}}});
  }
  const EvalRow row = EntityF1(pred, gold).overall;
  out.Require(row.counts.tp == 8 && row.counts.fp == 2 && row.counts.fn == 2, "counts");
  out.Require(row.f1 == 0.8, "F1 " + Fmt(row.f1));
  out.detail << FormatDropPair(rates) << ", F1 " << Fmt(row.f1);
}

void Criterion9(Outcome& out) {
  if (!g_e2e.ready) throw Error(ErrorCode::kInvalidConfig, "criterion 4 did not produce a run");
  SynthConfig synth;
  synth.n_strong = 50000;
  synth.n_weak = 50000;
  synth.seed = 9;
  const fs::path path = g_e2e.dir / "stream.jsonl";
  WriteCorpus(path, synth);

  const TreeModel model = TreeModel::Load((fs::path(g_e2e.config.output_dir) / "model.json").string());
  const std::size_t model_bytes = model.Serialize().size();
  StreamOptions options;
  options.threshold = model.decision_threshold();
  options.threads = 1;
  options.batch_size = 1;
  std::ofstream sink("/dev/null");

  const long long before = g_heap_bytes.load();
  g_heap_peak.store(before);
  const StreamStats stats = StreamClassify(model, path.string(), sink, options);
  const long long peak = g_heap_peak.load() - before;
  const long long bound = 10LL * static_cast<long long>(stats.max_line_bytes) + static_cast<long long>(model_bytes);

  out.Require(stats.records == 100000, "streamed " + std::to_string(stats.records) + " records");
  out.Require(peak < bound, "peak heap " + std::to_string(peak) + " >= bound " + std::to_string(bound));
  out.detail << stats.records << " records, peak heap " << peak << " B, bound " << bound
             << " B (largest record " << stats.max_line_bytes << " B, model " << model_bytes << " B)";
  fs::remove(path);
}

}  // namespace
}  // namespace nrf

int main() {
  using namespace nrf;
  Report(1, "worked-example density maps", Criterion1);
  Report(2, "density map oracle equivalence", Criterion2);
  Report(3, "temperature scaling identities", Criterion3);
  Report(4, "SoftMax thresholding fails where the NR model filters", Criterion4);
  Report(5, "tuned threshold honours the TP-drop budget", Criterion5);
  Report(6, "decision-path fidelity", Criterion6);
  Report(7, "tree determinism", Criterion7);
  Report(8, "evaluation arithmetic", Criterion8);
  Report(9, "streaming memory bound", Criterion9);
  std::printf("%d of 9 criteria failed\n", nrf::g_failures);
  return nrf::g_failures == 0 ? 0 : 1;
}
