#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "fastdad/learn/learner.hpp"
#include "fastdad/learn/tree.hpp"

namespace fastdad::learn {

struct ForestConfig {
  std::size_t n_trees = 100;
  std::size_t max_depth = 0;  // unlimited
  double min_leaf_weight = 1.0;
  std::size_t max_features = 0;  // 0: ceil(sqrt(d))
  bool bootstrap = true;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static ForestConfig from_json(const nlohmann::json& j);
};

// Bagged multi-output regression trees on the target vectors. Trees average;
// classification rows are renormalized to unit sum.
class RandomForest final : public Learner {
 public:
  static std::shared_ptr<RandomForest> fit(const DistillSet& set, const ForestConfig& config);

  std::string type_name() const override { return "forest"; }
  const data::TaskKind& task() const override { return task_; }
  SoftTargets predict(const data::FeatureMatrix& features) const override;
  std::size_t parameter_count() const override;
  nlohmann::json info() const override;
  nlohmann::json to_json() const override;
  static std::shared_ptr<RandomForest> from_json(const nlohmann::json& j);

  const std::vector<Tree>& trees() const { return trees_; }

 private:
  ForestConfig config_;
  data::TaskKind task_;
  std::vector<std::size_t> cardinalities_;
  std::size_t n_train_ = 0;
  std::vector<Tree> trees_;
};

}  // namespace fastdad::learn
