#include "fastdad/learn/forest.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fastdad/parallel.hpp"

namespace fastdad::learn {

void ForestConfig::validate() const {
  if (n_trees < 1) throw std::invalid_argument("forest needs at least one tree");
  if (!(min_leaf_weight > 0.0)) throw std::invalid_argument("min_leaf_weight must be positive");
}

nlohmann::json ForestConfig::to_json() const {
  return {{"n_trees", n_trees},       {"max_depth", max_depth}, {"min_leaf_weight", min_leaf_weight},
          {"max_features", max_features}, {"bootstrap", bootstrap}, {"seed", seed}};
}

ForestConfig ForestConfig::from_json(const nlohmann::json& j) {
  ForestConfig c;
  c.n_trees = j.value("n_trees", c.n_trees);
  c.max_depth = j.value("max_depth", c.max_depth);
  c.min_leaf_weight = j.value("min_leaf_weight", c.min_leaf_weight);
  c.max_features = j.value("max_features", c.max_features);
  c.bootstrap = j.value("bootstrap", c.bootstrap);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

std::shared_ptr<RandomForest> RandomForest::fit(const DistillSet& set, const ForestConfig& config) {
  config.validate();
  set.validate();
  const std::size_t n = set.n_rows();
  if (n == 0) throw std::invalid_argument("cannot fit a forest on empty data");
  auto out = std::make_shared<RandomForest>();
  out->config_ = config;
  out->task_ = set.task;
  out->cardinalities_ = set.features.cardinalities;
  out->n_train_ = n;

  TreeParams params;
  params.max_depth = config.max_depth;
  params.min_leaf_weight = config.min_leaf_weight;
  params.max_features = config.max_features != 0
                            ? config.max_features
                            : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(set.features.n_cols))));
  const SortedFeatures sorted = presort(set.features);
  out->trees_.resize(config.n_trees);
  parallel_for(config.n_trees, [&](std::size_t t) {
    Rng rng = make_stream(config.seed, {0xF0E57ULL, t});
    std::vector<double> weights(n, 1.0);
    if (config.bootstrap) {
      std::fill(weights.begin(), weights.end(), 0.0);
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (std::size_t i = 0; i < n; ++i) weights[pick(rng)] += 1.0;
    }
    out->trees_[t] = fit_tree(set.features, sorted, set.targets.values, set.targets.width, weights, params, rng);
  });
  return out;
}

SoftTargets RandomForest::predict(const data::FeatureMatrix& features) const {
  check_features(features, cardinalities_);
  SoftTargets out = empty_targets(task_);
  out.values.assign(features.n_rows * out.width, 0.0);
  const double scale = 1.0 / static_cast<double>(trees_.size());
  for (const auto& t : trees_) t.predict_add(features, scale, out.values);
  if (out.kind == SoftTargets::Kind::ProbVector) {
    for (std::size_t r = 0; r < out.n_rows(); ++r) {
      auto row = out.mutable_row(r);
      double total = 0.0;
      for (double v : row) total += v;
      for (double& v : row) v = total > 0.0 ? v / total : 1.0 / static_cast<double>(row.size());
    }
  } else if (task_.kind == data::TaskKind::Kind::Binary) {
    for (double& v : out.values) v = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

std::size_t RandomForest::parameter_count() const {
  std::size_t total = 0;
  for (const auto& t : trees_) total += t.parameter_count();
  return total;
}

nlohmann::json RandomForest::info() const {
  return {{"type", type_name()}, {"config", config_.to_json()}, {"n_train", n_train_},
          {"parameters", parameter_count()}};
}

nlohmann::json RandomForest::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) trees.push_back(t.to_json());
  return {{"format", "fastdad.learner"}, {"version", 1},           {"type", type_name()},
          {"task", task_.name()},        {"n_classes", task_.n_classes}, {"config", config_.to_json()},
          {"cardinalities", cardinalities_}, {"n_train", n_train_},  {"trees", std::move(trees)}};
}

std::shared_ptr<RandomForest> RandomForest::from_json(const nlohmann::json& j) {
  auto out = std::make_shared<RandomForest>();
  out->config_ = ForestConfig::from_json(j.at("config"));
  out->task_ = data::TaskKind::parse(j.at("task"), j.at("n_classes"));
  out->cardinalities_ = j.at("cardinalities").get<std::vector<std::size_t>>();
  out->n_train_ = j.at("n_train");
  for (const auto& t : j.at("trees")) out->trees_.push_back(Tree::from_json(t));
  if (out->trees_.empty()) throw std::invalid_argument("forest checkpoint has no trees");
  return out;
}

}  // namespace fastdad::learn
