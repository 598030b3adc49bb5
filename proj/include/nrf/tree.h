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

#ifndef NRF_TREE_H_
#define NRF_TREE_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "nrf/core_model.h"
#include "nrf/features.h"

namespace nrf {

// 1 - p_s^2 - p_w^2. Throws kEmptyNode when both counts are zero.
double Gini(std::size_t n_strong, std::size_t n_weak);
double WeightedGini(double strong_weight, double weak_weight);

struct TrainConfig {
  std::size_t max_depth = 12;
  std::size_t min_samples_leaf = 5;
  double min_impurity_decrease = 0.0;
  double max_tp_drop = 0.06;
  std::uint64_t seed = 0;
  // Gini on counts scaled inversely to class frequency.
  bool class_weighted = true;

  void Validate() const;
};

nlohmann::json TrainConfigToJson(const TrainConfig& config);
TrainConfig TrainConfigFromJson(const nlohmann::json& j, TrainConfig defaults = {});

// Dense row-major design matrix with Strong/Weak labels.
class Dataset {
 public:
  explicit Dataset(std::shared_ptr<const FeatureSchema> schema);

  // Throws kSchemaMismatch if the vector's schema differs.
  void Add(const FeatureVector& features, Label label);
  void Add(std::span<const double> row, Label label);

  std::size_t rows() const { return labels_.size(); }
  std::size_t cols() const { return schema_->size(); }
  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * cols(), cols()};
  }
  double at(std::size_t i, std::size_t f) const { return values_[i * cols() + f]; }
  Label label(std::size_t i) const { return labels_[i]; }
  const std::shared_ptr<const FeatureSchema>& schema() const { return schema_; }
  std::size_t Count(Label label) const;

 private:
  std::shared_ptr<const FeatureSchema> schema_;
  std::vector<double> values_;
  std::vector<Label> labels_;
};

struct TreeNode {
  bool leaf = true;
  std::size_t feature = 0;
  double threshold = 0.0;  // left: value <= threshold
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::size_t n_strong = 0;
  std::size_t n_weak = 0;
  double p_weak = 0.0;
};

class TreeModel {
 public:
  static constexpr int kFormatVersion = 1;

  TreeModel(std::shared_ptr<const FeatureSchema> schema, std::vector<TreeNode> nodes,
            TrainConfig config, double decision_threshold = 0.5);

  const FeatureSchema& schema() const { return *schema_; }
  const std::shared_ptr<const FeatureSchema>& schema_ptr() const { return schema_; }
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TrainConfig& config() const { return config_; }
  double decision_threshold() const { return decision_threshold_; }
  void set_decision_threshold(double threshold) { decision_threshold_ = threshold; }

  // Free-form object stored alongside the tree (e.g. the feature settings
  // the model was trained with).
  const nlohmann::json& metadata() const { return metadata_; }
  void set_metadata(nlohmann::json metadata) { metadata_ = std::move(metadata); }

  std::size_t LeafIndex(std::span<const double> row) const;
  std::size_t Depth() const;
  std::size_t LeafCount() const;
  // Sorted, unique.
  std::vector<double> LeafProbabilities() const;

  // Throws kSchemaMismatch unless `features` carries this model's schema.
  void CheckSchema(const FeatureVector& features) const;

  nlohmann::json ToJson() const;
  std::string Serialize() const;
  static TreeModel FromJson(const nlohmann::json& j);
  static TreeModel Parse(const std::string& text);
  void Save(const std::string& path) const;
  static TreeModel Load(const std::string& path);

 private:
  std::shared_ptr<const FeatureSchema> schema_;
  std::vector<TreeNode> nodes_;
  TrainConfig config_;
  double decision_threshold_;
  nlohmann::json metadata_ = nlohmann::json::object();
};

// Greedy CART. Throws kSingleClassTrainingSet.
TreeModel Train(const Dataset& data, const TrainConfig& config);

struct Classification {
  Label verdict = Label::kStrong;
  double p_weak = 0.0;
  std::size_t leaf = 0;
};

// Weak iff the leaf's p_weak >= threshold.
Classification ClassifyRow(const TreeModel& model, std::span<const double> row,
                           double threshold);
Classification Classify(const TreeModel& model, const FeatureVector& features,
                        double threshold);
Classification Classify(const TreeModel& model, const FeatureVector& features);

struct TuneResult {
  double threshold = 0.0;
  std::size_t tp_total = 0;
  std::size_t fp_total = 0;
  std::size_t tp_dropped = 0;
  std::size_t fp_dropped = 0;
  double tp_drop = 0.0;  // fraction
  double fp_drop = 0.0;  // fraction
  // False when no threshold drops anything within the TP budget; the
  // returned threshold then keeps every prediction.
  bool feasible = true;
};

// Threshold strictly above every p_weak, so nothing is classified Weak.
double KeepAllThreshold();

// Sweeps every leaf p_weak; picks the highest FP drop with TP drop within
// budget, preferring the higher threshold on ties. Strong rows are TPs.
TuneResult TuneThreshold(const TreeModel& model, const Dataset& validation, double max_tp_drop);

enum class Comparator { kLessEqual, kGreater };

struct PathStep {
  std::string feature;
  Comparator op = Comparator::kLessEqual;
  double threshold = 0.0;
  double observed = 0.0;

  bool Holds() const { return op == Comparator::kLessEqual ? observed <= threshold : observed > threshold; }
};

struct DecisionPath {
  std::vector<PathStep> steps;
  Label verdict = Label::kStrong;
  double p_weak = 0.0;
  double threshold = 0.5;

  // "(name op value)" per step, joined by "\n& ".
  std::string Format() const;
  // Format() under a "Decision Path:" header plus a verdict line.
  std::string FormatBlock() const;
};

DecisionPath Explain(const TreeModel& model, const FeatureVector& features, double threshold);

// Shortest representation that parses back to the same double.
std::string FormatNumber(double value);

}  // namespace nrf

#endif  // NRF_TREE_H_
