#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "fastdad/learn/forest.hpp"
#include "fastdad/learn/gbm.hpp"
#include "fastdad/learn/learner.hpp"
#include "fastdad/learn/mlp.hpp"

namespace fastdad::learn {

// Hyperparameters of the three learner families.
struct LearnerConfigs {
  MLPConfig mlp;
  ForestConfig forest;
  GBMConfig gbm;

  nlohmann::json to_json() const;
  static LearnerConfigs from_json(const nlohmann::json& j);
};

// Registration order of the families: mlp, forest, gbm.
const std::vector<std::string>& learner_kinds();

// Seed a family is trained with for a given run seed. Teacher refits and
// students use the same derivation, so a student fit on the plain labeled
// data is bitwise the teacher's refit of that family.
std::uint64_t learner_seed(std::uint64_t seed, const std::string& kind);

LearnerPtr fit_learner(const std::string& kind, const DistillSet& set, const LearnerConfigs& configs,
                       std::uint64_t seed);

struct StackEnsembleConfig {
  std::size_t folds = 10;
  LearnerConfigs base;
  GBMConfig meta;
  bool blend = true;  // search convex weights on validation; else meta only

  void validate() const;
  nlohmann::json to_json() const;
  static StackEnsembleConfig from_json(const nlohmann::json& j);
};

// One stack layer: out-of-fold predictions of mlp/forest/gbm feed a meta
// boosting model alongside the original features; the output is a convex
// blend of the meta model and the three full-data refits, with weights
// chosen on validation by coordinate descent on the task metric.
class StackEnsemble final : public Learner {
 public:
  static constexpr std::size_t kComponents = 4;  // meta, mlp, forest, gbm

  static std::shared_ptr<StackEnsemble> fit(const data::Table& train, const data::Table& val,
                                            const StackEnsembleConfig& config, std::uint64_t seed);

  std::string type_name() const override { return "stack"; }
  const data::TaskKind& task() const override { return task_; }
  SoftTargets predict(const data::FeatureMatrix& features) const override;
  std::size_t parameter_count() const override;
  nlohmann::json info() const override;
  nlohmann::json to_json() const override;
  static std::shared_ptr<StackEnsemble> from_json(const nlohmann::json& j);

  const std::array<double, kComponents>& blend_weights() const { return weights_; }
  // Validation metric of the blend and of each pure component.
  double validation_metric() const { return val_metric_; }
  const std::array<double, kComponents>& component_validation_metrics() const { return component_metrics_; }
  const std::vector<LearnerPtr>& refits() const { return refits_; }

  static const std::array<std::string, kComponents>& component_names();

 private:
  std::array<SoftTargets, kComponents> component_predictions(const data::FeatureMatrix& features) const;

  StackEnsembleConfig config_;
  data::TaskKind task_;
  std::vector<std::size_t> cardinalities_;
  std::size_t n_train_ = 0;
  std::vector<LearnerPtr> refits_;  // mlp, forest, gbm
  LearnerPtr meta_;
  std::array<double, kComponents> weights_{};
  double val_metric_ = 0.0;
  std::array<double, kComponents> component_metrics_{};
};

// Features with each prediction block appended as numeric columns.
data::FeatureMatrix with_prediction_columns(const data::FeatureMatrix& features,
                                            const std::vector<SoftTargets>& predictions);

// Convex combination of predictions with the given weights.
SoftTargets blend_predictions(std::span<const SoftTargets> predictions, std::span<const double> weights);

// Index of the candidate with the best validation metric; ties go to fewer
// parameters, then to the earlier candidate.
std::size_t select_model(std::span<const LearnerPtr> candidates, const data::FeatureMatrix& val_features,
                         std::span<const double> val_truth);
// Same rule on precomputed metrics.
std::size_t select_by_metric(std::span<const double> metrics, std::span<const std::size_t> parameter_counts);

}  // namespace fastdad::learn
