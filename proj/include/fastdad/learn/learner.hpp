#pragma once

#include <memory>
#include <string>

#include "fastdad/data/table.hpp"
#include "fastdad/learn/targets.hpp"

namespace fastdad::learn {

// A trained predictor. Immutable after fitting and safe to share.
class Learner {
 public:
  virtual ~Learner() = default;

  virtual std::string type_name() const = 0;
  virtual const data::TaskKind& task() const = 0;
  virtual SoftTargets predict(const data::FeatureMatrix& features) const = 0;
  virtual std::size_t parameter_count() const = 0;
  // Hyperparameters and training size.
  virtual nlohmann::json info() const = 0;
  // Versioned checkpoint including the type tag.
  virtual nlohmann::json to_json() const = 0;
};

using LearnerPtr = std::shared_ptr<const Learner>;

LearnerPtr learner_from_json(const nlohmann::json& j);
void save_learner(const Learner& learner, const std::string& path);
LearnerPtr load_learner(const std::string& path);

// Learner-facing matrix checks shared by the implementations.
void check_features(const data::FeatureMatrix& features, const std::vector<std::size_t>& cardinalities);

}  // namespace fastdad::learn
