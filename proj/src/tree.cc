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

#include "nrf/tree.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "nrf/error.h"
#include "nrf/record_io.h"

namespace nrf {
namespace {

using nlohmann::json;

constexpr double kMinGain = 1e-12;

struct SplitCandidate {
  double gain = 0.0;
  double threshold = 0.0;
  bool valid = false;
};

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, const TrainConfig& config) : data_(data), config_(config) {
    const double n = static_cast<double>(data.rows());
    const double strong = static_cast<double>(data.Count(Label::kStrong));
    const double weak = static_cast<double>(data.Count(Label::kWeak));
    if (config.class_weighted) {
      strong_weight_ = n / (2.0 * strong);
      weak_weight_ = n / (2.0 * weak);
    }
  }

  std::vector<TreeNode> Build() {
    std::vector<std::size_t> all(data_.rows());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    Grow(all, 0);
    return std::move(nodes_);
  }

 private:
  std::int32_t Grow(const std::vector<std::size_t>& rows, std::size_t depth) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();
    std::size_t strong = 0;
    for (std::size_t r : rows) strong += data_.label(r) == Label::kStrong ? 1 : 0;
    const std::size_t weak = rows.size() - strong;
    {
      TreeNode& node = nodes_[id];
      node.n_strong = strong;
      node.n_weak = weak;
      node.p_weak = static_cast<double>(weak) / static_cast<double>(rows.size());
    }
    if (depth >= config_.max_depth || strong == 0 || weak == 0 ||
        rows.size() < 2 * config_.min_samples_leaf) {
      return id;
    }

    const double parent = WeightedGini(strong * strong_weight_, weak * weak_weight_);
    const std::size_t num_features = data_.cols();
    std::vector<SplitCandidate> best(num_features);

#pragma omp parallel
    {
      std::vector<std::pair<double, std::size_t>> sorted;
#pragma omp for schedule(dynamic, 8)
      for (std::size_t f = 0; f < num_features; ++f) {
        best[f] = BestSplit(rows, f, parent, strong, weak, sorted);
      }
    }

    // Reduction in feature order: lower index wins ties.
    std::size_t chosen = num_features;
    for (std::size_t f = 0; f < num_features; ++f) {
      if (best[f].valid && (chosen == num_features || best[f].gain > best[chosen].gain)) {
        chosen = f;
      }
    }
    if (chosen == num_features || best[chosen].gain <= kMinGain ||
        best[chosen].gain <= config_.min_impurity_decrease) {
      return id;
    }

    const double threshold = best[chosen].threshold;
    std::vector<std::size_t> left_rows;
    std::vector<std::size_t> right_rows;
    for (std::size_t r : rows) {
      (data_.at(r, chosen) <= threshold ? left_rows : right_rows).push_back(r);
    }
    nodes_[id].leaf = false;
    nodes_[id].feature = chosen;
    nodes_[id].threshold = threshold;
    const std::int32_t left = Grow(left_rows, depth + 1);
    nodes_[id].left = left;
    const std::int32_t right = Grow(right_rows, depth + 1);
    nodes_[id].right = right;
    return id;
  }

  SplitCandidate BestSplit(const std::vector<std::size_t>& rows, std::size_t feature,
                           double parent, std::size_t strong, std::size_t weak,
                           std::vector<std::pair<double, std::size_t>>& sorted) const {
    sorted.clear();
    for (std::size_t r : rows) sorted.emplace_back(data_.at(r, feature), r);
    std::sort(sorted.begin(), sorted.end());

    SplitCandidate best;
    const std::size_t n = sorted.size();
    const double total = strong * strong_weight_ + weak * weak_weight_;
    std::size_t left_strong = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (data_.label(sorted[i].second) == Label::kStrong) ++left_strong;
      const double lo = sorted[i].first;
      const double hi = sorted[i + 1].first;
      if (!(lo < hi)) continue;
      const std::size_t left_n = i + 1;
      if (left_n < config_.min_samples_leaf || n - left_n < config_.min_samples_leaf) continue;
      const std::size_t left_weak = left_n - left_strong;
      const double ls = left_strong * strong_weight_;
      const double lw = left_weak * weak_weight_;
      const double rs = (strong - left_strong) * strong_weight_;
      const double rw = (weak - left_weak) * weak_weight_;
      const double child =
          ((ls + lw) * WeightedGini(ls, lw) + (rs + rw) * WeightedGini(rs, rw)) / total;
      const double gain = parent - child;
      if (!best.valid || gain > best.gain) {
        double mid = lo + (hi - lo) / 2.0;
        if (!(mid < hi)) mid = lo;
        best = {gain, mid, true};
      }
    }
    return best;
  }

  const Dataset& data_;
  const TrainConfig& config_;
  double strong_weight_ = 1.0;
  double weak_weight_ = 1.0;
  std::vector<TreeNode> nodes_;
};

std::string_view ComparatorText(Comparator op) { return op == Comparator::kLessEqual ? "<=" : ">"; }

}  // namespace

double Gini(std::size_t n_strong, std::size_t n_weak) {
  if (n_strong + n_weak == 0) throw Error(ErrorCode::kEmptyNode, "gini of an empty node");
  return WeightedGini(static_cast<double>(n_strong), static_cast<double>(n_weak));
}

double WeightedGini(double strong_weight, double weak_weight) {
  const double total = strong_weight + weak_weight;
  if (!(total > 0.0)) return 0.0;
  const double ps = strong_weight / total;
  const double pw = weak_weight / total;
  return 1.0 - ps * ps - pw * pw;
}

void TrainConfig::Validate() const {
  if (!(max_tp_drop >= 0.0 && max_tp_drop <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "max_tp_drop must lie in [0, 1]");
  }
  if (min_samples_leaf < 1) throw Error(ErrorCode::kInvalidConfig, "min_samples_leaf must be >= 1");
  if (!(min_impurity_decrease >= 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "min_impurity_decrease must be >= 0");
  }
}

json TrainConfigToJson(const TrainConfig& config) {
  return {{"max_depth", config.max_depth},
          {"min_samples_leaf", config.min_samples_leaf},
          {"min_impurity_decrease", config.min_impurity_decrease},
          {"max_tp_drop", config.max_tp_drop},
          {"seed", config.seed},
          {"class_weighted", config.class_weighted}};
}

TrainConfig TrainConfigFromJson(const json& j, TrainConfig c) {
  c.max_depth = j.value("max_depth", c.max_depth);
  c.min_samples_leaf = j.value("min_samples_leaf", c.min_samples_leaf);
  c.min_impurity_decrease = j.value("min_impurity_decrease", c.min_impurity_decrease);
  c.max_tp_drop = j.value("max_tp_drop", c.max_tp_drop);
  c.seed = j.value("seed", c.seed);
  c.class_weighted = j.value("class_weighted", c.class_weighted);
  return c;
}

Dataset::Dataset(std::shared_ptr<const FeatureSchema> schema) : schema_(std::move(schema)) {}

void Dataset::Add(const FeatureVector& features, Label label) {
  if (features.schema != schema_ && !(*features.schema == *schema_)) {
    throw Error(ErrorCode::kSchemaMismatch, "feature vector schema differs from dataset schema");
  }
  Add(features.values, label);
}

void Dataset::Add(std::span<const double> row, Label label) {
  if (row.size() != cols()) {
    throw Error(ErrorCode::kSchemaMismatch, "row has " + std::to_string(row.size()) +
                                                " values, schema has " + std::to_string(cols()));
  }
  values_.insert(values_.end(), row.begin(), row.end());
  labels_.push_back(label);
}

std::size_t Dataset::Count(Label label) const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
}

TreeModel::TreeModel(std::shared_ptr<const FeatureSchema> schema, std::vector<TreeNode> nodes,
                     TrainConfig config, double decision_threshold)
    : schema_(std::move(schema)),
      nodes_(std::move(nodes)),
      config_(config),
      decision_threshold_(decision_threshold) {}

std::size_t TreeModel::LeafIndex(std::span<const double> row) const {
  std::size_t i = 0;
  while (!nodes_[i].leaf) {
    const TreeNode& node = nodes_[i];
    i = static_cast<std::size_t>(row[node.feature] <= node.threshold ? node.left : node.right);
  }
  return i;
}

std::size_t TreeModel::Depth() const {
  std::vector<std::size_t> depth(nodes_.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, depth[i]);
    if (!nodes_[i].leaf) {
      depth[nodes_[i].left] = depth[i] + 1;
      depth[nodes_[i].right] = depth[i] + 1;
    }
  }
  return deepest;
}

std::size_t TreeModel::LeafCount() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.leaf; }));
}

std::vector<double> TreeModel::LeafProbabilities() const {
  std::vector<double> values;
  for (const auto& node : nodes_) {
    if (node.leaf) values.push_back(node.p_weak);
  }
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  return values;
}

void TreeModel::CheckSchema(const FeatureVector& features) const {
  if (features.schema == schema_) return;
  if (!features.schema || features.schema->hash() != schema_->hash() ||
      !(*features.schema == *schema_)) {
    throw Error(ErrorCode::kSchemaMismatch,
                "features do not match the model schema " + schema_->HashHex());
  }
}

json TreeModel::ToJson() const {
  json nodes = json::array();
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const TreeNode& n = nodes_[i];
    json entry{{"id", i}, {"n_strong", n.n_strong}, {"n_weak", n.n_weak}, {"p_weak", n.p_weak}};
    if (n.leaf) {
      entry["leaf"] = true;
    } else {
      entry["leaf"] = false;
      entry["feature"] = n.feature;
      entry["name"] = schema_->name(n.feature);
      entry["threshold"] = n.threshold;
      entry["left"] = n.left;
      entry["right"] = n.right;
    }
    nodes.push_back(std::move(entry));
  }
  return {{"format", "nrf-tree"},
          {"version", kFormatVersion},
          {"schema_hash", schema_->HashHex()},
          {"features", schema_->names()},
          {"decision_threshold", decision_threshold_},
          {"train_config", TrainConfigToJson(config_)},
          {"metadata", metadata_},
          {"nodes", std::move(nodes)}};
}

std::string TreeModel::Serialize() const { return ToJson().dump(2) + "\n"; }

TreeModel TreeModel::FromJson(const json& j) {
  try {
    if (j.at("format") != "nrf-tree" || j.at("version").get<int>() != kFormatVersion) {
      throw Error(ErrorCode::kParseError, "unsupported model format");
    }
    auto schema = std::make_shared<const FeatureSchema>(
        j.at("features").get<std::vector<std::string>>());
    if (schema->HashHex() != j.at("schema_hash").get<std::string>()) {
      throw Error(ErrorCode::kSchemaMismatch, "model schema hash does not match its feature list");
    }
    std::vector<TreeNode> nodes;
    for (const json& entry : j.at("nodes")) {
      TreeNode n;
      n.leaf = entry.at("leaf").get<bool>();
      n.n_strong = entry.at("n_strong").get<std::size_t>();
      n.n_weak = entry.at("n_weak").get<std::size_t>();
      n.p_weak = entry.at("p_weak").get<double>();
      if (!n.leaf) {
        n.feature = entry.at("feature").get<std::size_t>();
        n.threshold = entry.at("threshold").get<double>();
        n.left = entry.at("left").get<std::int32_t>();
        n.right = entry.at("right").get<std::int32_t>();
      }
      nodes.push_back(n);
    }
    const auto count = static_cast<std::int32_t>(nodes.size());
    if (count == 0) throw Error(ErrorCode::kParseError, "model has no nodes");
    for (std::int32_t i = 0; i < count; ++i) {
      const TreeNode& n = nodes[i];
      if (!n.leaf && (n.feature >= schema->size() || n.left <= i || n.right <= i ||
                      n.left >= count || n.right >= count)) {
        throw Error(ErrorCode::kParseError, "malformed node " + std::to_string(i));
      }
    }
    TrainConfig config = TrainConfigFromJson(j.value("train_config", json::object()));
    TreeModel model(std::move(schema), std::move(nodes), config,
                    j.value("decision_threshold", 0.5));
    if (auto it = j.find("metadata"); it != j.end() && it->is_object()) model.set_metadata(*it);
    return model;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("model: ") + e.what());
  }
}

TreeModel TreeModel::Parse(const std::string& text) {
  try {
    return FromJson(json::parse(text));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("model: ") + e.what());
  }
}

void TreeModel::Save(const std::string& path) const {
  auto out = OpenOutput(path);
  out << Serialize();
  if (!out) throw Error(ErrorCode::kIoError, "failed writing \"" + path + "\"");
}

TreeModel TreeModel::Load(const std::string& path) { return Parse(ReadFile(path)); }

TreeModel Train(const Dataset& data, const TrainConfig& config) {
  config.Validate();
  if (data.Count(Label::kStrong) == 0 || data.Count(Label::kWeak) == 0) {
    throw Error(ErrorCode::kSingleClassTrainingSet,
                "training needs at least one Strong and one Weak example");
  }
  TreeBuilder builder(data, config);
  return TreeModel(data.schema(), builder.Build(), config);
}

Classification ClassifyRow(const TreeModel& model, std::span<const double> row,
                           double threshold) {
  const std::size_t leaf = model.LeafIndex(row);
  const double p_weak = model.nodes()[leaf].p_weak;
  return {p_weak >= threshold ? Label::kWeak : Label::kStrong, p_weak, leaf};
}

Classification Classify(const TreeModel& model, const FeatureVector& features,
                        double threshold) {
  model.CheckSchema(features);
  return ClassifyRow(model, features.values, threshold);
}

Classification Classify(const TreeModel& model, const FeatureVector& features) {
  return Classify(model, features, model.decision_threshold());
}

double KeepAllThreshold() { return std::nextafter(1.0, 2.0); }

TuneResult TuneThreshold(const TreeModel& model, const Dataset& validation, double max_tp_drop) {
  if (!(max_tp_drop >= 0.0 && max_tp_drop <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "max_tp_drop must lie in [0, 1]");
  }
  if (validation.schema() != model.schema_ptr() && !(*validation.schema() == model.schema())) {
    throw Error(ErrorCode::kSchemaMismatch, "validation schema differs from model schema");
  }
  TuneResult result;
  result.tp_total = validation.Count(Label::kStrong);
  result.fp_total = validation.Count(Label::kWeak);
  if (result.tp_total == 0 || result.fp_total == 0) {
    throw Error(ErrorCode::kInvalidConfig, "validation set needs at least one TP and one FP");
  }

  std::vector<double> p_weak(validation.rows());
  for (std::size_t i = 0; i < validation.rows(); ++i) {
    p_weak[i] = model.nodes()[model.LeafIndex(validation.row(i))].p_weak;
  }

  result.threshold = KeepAllThreshold();
  result.feasible = false;
  for (double theta : model.LeafProbabilities()) {
    std::size_t tp_dropped = 0;
    std::size_t fp_dropped = 0;
    for (std::size_t i = 0; i < validation.rows(); ++i) {
      if (p_weak[i] < theta) continue;
      (validation.label(i) == Label::kStrong ? tp_dropped : fp_dropped) += 1;
    }
    const double tp_drop = static_cast<double>(tp_dropped) / static_cast<double>(result.tp_total);
    const double fp_drop = static_cast<double>(fp_dropped) / static_cast<double>(result.fp_total);
    if (tp_drop > max_tp_drop || fp_dropped == 0) continue;
    // Ascending sweep with >= keeps the higher threshold on ties.
    if (!result.feasible || fp_drop >= result.fp_drop) {
      result.feasible = true;
      result.threshold = theta;
      result.tp_dropped = tp_dropped;
      result.fp_dropped = fp_dropped;
      result.tp_drop = tp_drop;
      result.fp_drop = fp_drop;
    }
  }
  return result;
}

std::string FormatNumber(double value) {
  char buffer[64];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ec == std::errc() ? end : buffer);
}

std::string DecisionPath::Format() const {
  std::string out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i > 0) out += "\n& ";
    out += "(" + steps[i].feature + " " + std::string(ComparatorText(steps[i].op)) + " " +
           FormatNumber(steps[i].threshold) + ")";
  }
  return out;
}

std::string DecisionPath::FormatBlock() const {
  std::ostringstream out;
  out << "Decision Path:\n" << Format() << "\n";
  out << "Verdict: " << LabelName(verdict) << " (p_weak=" << FormatNumber(p_weak)
      << ", threshold=" << FormatNumber(threshold) << ")\n";
  return out.str();
}

DecisionPath Explain(const TreeModel& model, const FeatureVector& features, double threshold) {
  model.CheckSchema(features);
  DecisionPath path;
  std::size_t i = 0;
  while (!model.nodes()[i].leaf) {
    const TreeNode& node = model.nodes()[i];
    const double observed = features.values[node.feature];
    const bool left = observed <= node.threshold;
    path.steps.push_back({model.schema().name(node.feature),
                          left ? Comparator::kLessEqual : Comparator::kGreater, node.threshold,
                          observed});
    i = static_cast<std::size_t>(left ? node.left : node.right);
  }
  path.p_weak = model.nodes()[i].p_weak;
  path.verdict = path.p_weak >= threshold ? Label::kWeak : Label::kStrong;
  path.threshold = threshold;
  return path;
}

}  // namespace nrf
