#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "fastdad/learn/learner.hpp"
#include "fastdad/learn/tree.hpp"

namespace fastdad::learn {

struct GBMConfig {
  std::size_t n_rounds = 200;
  double learning_rate = 0.1;
  std::size_t max_depth = 6;
  double min_leaf_weight = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static GBMConfig from_json(const nlohmann::json& j);
};

// Multiclass: one tree per class and round on the soft cross-entropy
// residual (target - softmax), zero initial logits. Binary and regression:
// least-squares boosting from the target mean; binary output clamped to
// [0, 1].
class GradientBoosting final : public Learner {
 public:
  // `loss_trace`, when given, receives the training loss before the first
  // round and after every round (soft cross-entropy or squared error).
  static std::shared_ptr<GradientBoosting> fit(const DistillSet& set, const GBMConfig& config,
                                               std::vector<double>* loss_trace = nullptr);

  std::string type_name() const override { return "gbm"; }
  const data::TaskKind& task() const override { return task_; }
  SoftTargets predict(const data::FeatureMatrix& features) const override;
  // Prediction using only the first `rounds` boosting rounds.
  SoftTargets predict_rounds(const data::FeatureMatrix& features, std::size_t rounds) const;
  std::size_t parameter_count() const override;
  nlohmann::json info() const override;
  nlohmann::json to_json() const override;
  static std::shared_ptr<GradientBoosting> from_json(const nlohmann::json& j);

  std::size_t n_rounds() const { return trees_.size() / outputs(); }

 private:
  std::size_t outputs() const { return task_.kind == data::TaskKind::Kind::Multiclass ? task_.n_classes : 1; }

  GBMConfig config_;
  data::TaskKind task_;
  std::vector<std::size_t> cardinalities_;
  std::size_t n_train_ = 0;
  double base_ = 0.0;
  std::vector<Tree> trees_;  // round-major, one per output
};

}  // namespace fastdad::learn
