#include "fastdad/learn/learner.hpp"

#include <fstream>
#include <stdexcept>

#include "fastdad/learn/forest.hpp"
#include "fastdad/learn/gbm.hpp"
#include "fastdad/learn/mlp.hpp"
#include "fastdad/learn/stack.hpp"

namespace fastdad::learn {

void check_features(const data::FeatureMatrix& features, const std::vector<std::size_t>& cardinalities) {
  if (features.n_cols != cardinalities.size()) throw std::invalid_argument("feature count does not match the learner");
  if (features.values.size() != features.n_rows * features.n_cols) throw std::invalid_argument("ragged feature matrix");
  for (std::size_t j = 0; j < features.n_cols; ++j) {
    const std::size_t card = cardinalities[j];
    if (card == 0) continue;
    for (std::size_t r = 0; r < features.n_rows; ++r) {
      const double v = features.at(r, j);
      if (!(v >= 0.0) || v >= static_cast<double>(card) || v != static_cast<double>(static_cast<std::size_t>(v))) {
        throw std::invalid_argument("categorical code out of range in feature " + std::to_string(j));
      }
    }
  }
}

LearnerPtr learner_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string()) != "fastdad.learner") throw std::invalid_argument("not a learner checkpoint");
  if (j.value("version", 0) != 1) throw std::invalid_argument("unsupported learner checkpoint version");
  const std::string type = j.at("type");
  if (type == "mlp") return MLP::from_json(j);
  if (type == "forest") return RandomForest::from_json(j);
  if (type == "gbm") return GradientBoosting::from_json(j);
  if (type == "stack") return StackEnsemble::from_json(j);
  throw std::invalid_argument("unknown learner type: " + type);
}

void save_learner(const Learner& learner, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << learner.to_json().dump();
  if (!out) throw std::runtime_error("failed writing " + path);
}

LearnerPtr load_learner(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return learner_from_json(nlohmann::json::parse(in));
}

}  // namespace fastdad::learn
