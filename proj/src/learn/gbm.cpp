#include "fastdad/learn/gbm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fastdad::learn {

void GBMConfig::validate() const {
  if (n_rounds < 1) throw std::invalid_argument("gbm needs at least one round");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("gbm learning rate must be positive");
  if (!(min_leaf_weight > 0.0)) throw std::invalid_argument("min_leaf_weight must be positive");
}

nlohmann::json GBMConfig::to_json() const {
  return {{"n_rounds", n_rounds}, {"learning_rate", learning_rate}, {"max_depth", max_depth},
          {"min_leaf_weight", min_leaf_weight}, {"seed", seed}};
}

GBMConfig GBMConfig::from_json(const nlohmann::json& j) {
  GBMConfig c;
  c.n_rounds = j.value("n_rounds", c.n_rounds);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.max_depth = j.value("max_depth", c.max_depth);
  c.min_leaf_weight = j.value("min_leaf_weight", c.min_leaf_weight);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

namespace {

double training_loss(bool multiclass, std::size_t q, const std::vector<double>& scores, const SoftTargets& y) {
  const std::size_t n = y.n_rows();
  double total = 0.0;
  if (multiclass) {
    std::vector<double> p(q);
    for (std::size_t r = 0; r < n; ++r) {
      std::copy(scores.begin() + static_cast<std::ptrdiff_t>(r * q),
                scores.begin() + static_cast<std::ptrdiff_t>((r + 1) * q), p.begin());
      softmax_inplace(p);
      total += soft_cross_entropy(p, y.row(r));
    }
  } else {
    for (std::size_t r = 0; r < n; ++r) total += (scores[r] - y.values[r]) * (scores[r] - y.values[r]);
  }
  return total / static_cast<double>(n);
}

}  // namespace

std::shared_ptr<GradientBoosting> GradientBoosting::fit(const DistillSet& set, const GBMConfig& config,
                                                        std::vector<double>* loss_trace) {
  config.validate();
  set.validate();
  const std::size_t n = set.n_rows();
  if (n == 0) throw std::invalid_argument("cannot fit boosting on empty data");
  auto out = std::make_shared<GradientBoosting>();
  out->config_ = config;
  out->task_ = set.task;
  out->cardinalities_ = set.features.cardinalities;
  out->n_train_ = n;
  const bool multiclass = set.task.kind == data::TaskKind::Kind::Multiclass;
  const std::size_t q = out->outputs();

  std::vector<double> scores(n * q, 0.0);
  if (!multiclass) {
    double mean = 0.0;
    for (double v : set.targets.values) mean += v;
    out->base_ = mean / static_cast<double>(n);
    std::fill(scores.begin(), scores.end(), out->base_);
  }

  TreeParams params;
  params.max_depth = config.max_depth;
  params.min_leaf_weight = config.min_leaf_weight;
  const SortedFeatures sorted = presort(set.features);
  const std::vector<double> weights(n, 1.0);
  Rng rng = make_stream(config.seed, {0x6B3ULL});
  std::vector<double> residual(n), probs(q);
  std::vector<double> all_residuals(n * q);
  if (loss_trace) loss_trace->assign(1, training_loss(multiclass, q, scores, set.targets));

  out->trees_.reserve(config.n_rounds * q);
  for (std::size_t round = 0; round < config.n_rounds; ++round) {
    for (std::size_t r = 0; r < n; ++r) {
      if (multiclass) {
        std::copy(scores.begin() + static_cast<std::ptrdiff_t>(r * q),
                  scores.begin() + static_cast<std::ptrdiff_t>((r + 1) * q), probs.begin());
        softmax_inplace(probs);
        for (std::size_t c = 0; c < q; ++c) all_residuals[r * q + c] = set.targets.values[r * q + c] - probs[c];
      } else {
        all_residuals[r] = set.targets.values[r] - scores[r];
      }
    }
    for (std::size_t c = 0; c < q; ++c) {
      for (std::size_t r = 0; r < n; ++r) residual[r] = all_residuals[r * q + c];
      Tree tree = fit_tree(set.features, sorted, residual, 1, weights, params, rng);
      for (std::size_t r = 0; r < n; ++r) {
        scores[r * q + c] += config.learning_rate * tree.predict_row(set.features.row(r))[0];
      }
      out->trees_.push_back(std::move(tree));
    }
    if (loss_trace) loss_trace->push_back(training_loss(multiclass, q, scores, set.targets));
  }
  return out;
}

SoftTargets GradientBoosting::predict_rounds(const data::FeatureMatrix& features, std::size_t rounds) const {
  check_features(features, cardinalities_);
  rounds = std::min(rounds, n_rounds());
  const std::size_t q = outputs();
  const std::size_t n = features.n_rows;
  std::vector<double> scores(n * q, task_.kind == data::TaskKind::Kind::Multiclass ? 0.0 : base_);
  std::vector<double> column(n);
  for (std::size_t t = 0; t < rounds * q; ++t) {
    const std::size_t c = t % q;
    std::fill(column.begin(), column.end(), 0.0);
    trees_[t].predict_add(features, config_.learning_rate, column);
    for (std::size_t r = 0; r < n; ++r) scores[r * q + c] += column[r];
  }
  SoftTargets out = empty_targets(task_);
  out.values = std::move(scores);
  if (task_.kind == data::TaskKind::Kind::Multiclass) {
    for (std::size_t r = 0; r < n; ++r) softmax_inplace(out.mutable_row(r));
  } else if (task_.kind == data::TaskKind::Kind::Binary) {
    for (double& v : out.values) v = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

SoftTargets GradientBoosting::predict(const data::FeatureMatrix& features) const {
  return predict_rounds(features, n_rounds());
}

std::size_t GradientBoosting::parameter_count() const {
  std::size_t total = 1;
  for (const auto& t : trees_) total += t.parameter_count();
  return total;
}

nlohmann::json GradientBoosting::info() const {
  return {{"type", type_name()}, {"config", config_.to_json()}, {"n_train", n_train_},
          {"parameters", parameter_count()}};
}

nlohmann::json GradientBoosting::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) trees.push_back(t.to_json());
  return {{"format", "fastdad.learner"}, {"version", 1},
          {"type", type_name()},         {"task", task_.name()},
          {"n_classes", task_.n_classes}, {"config", config_.to_json()},
          {"cardinalities", cardinalities_}, {"n_train", n_train_},
          {"base", base_},               {"trees", std::move(trees)}};
}

std::shared_ptr<GradientBoosting> GradientBoosting::from_json(const nlohmann::json& j) {
  auto out = std::make_shared<GradientBoosting>();
  out->config_ = GBMConfig::from_json(j.at("config"));
  out->task_ = data::TaskKind::parse(j.at("task"), j.at("n_classes"));
  out->cardinalities_ = j.at("cardinalities").get<std::vector<std::size_t>>();
  out->n_train_ = j.at("n_train");
  out->base_ = j.at("base");
  for (const auto& t : j.at("trees")) out->trees_.push_back(Tree::from_json(t));
  if (out->trees_.empty() || out->trees_.size() % out->outputs() != 0) {
    throw std::invalid_argument("boosting checkpoint has a partial round");
  }
  return out;
}

}  // namespace fastdad::learn
