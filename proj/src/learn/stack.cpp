#include "fastdad/learn/stack.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "fastdad/rng.hpp"

namespace fastdad::learn {

namespace {

constexpr std::uint64_t kFoldKey = 0xF01DULL;
constexpr std::uint64_t kMetaKey = 0x3E7AULL;

std::uint64_t kind_key(const std::string& kind) {
  const auto& kinds = learner_kinds();
  const auto it = std::find(kinds.begin(), kinds.end(), kind);
  if (it == kinds.end()) throw std::invalid_argument("unknown learner kind: " + kind);
  return static_cast<std::uint64_t>(it - kinds.begin()) + 1;
}

LearnerPtr fit_with_exact_seed(const std::string& kind, const DistillSet& set, const LearnerConfigs& configs,
                               std::uint64_t seed) {
  if (kind == "mlp") {
    MLPConfig c = configs.mlp;
    c.seed = seed;
    return MLP::fit(set, c);
  }
  if (kind == "forest") {
    ForestConfig c = configs.forest;
    c.seed = seed;
    return RandomForest::fit(set, c);
  }
  if (kind == "gbm") {
    GBMConfig c = configs.gbm;
    c.seed = seed;
    return GradientBoosting::fit(set, c);
  }
  throw std::invalid_argument("unknown learner kind: " + kind);
}

// (metric, loss) ordering: higher metric, then lower loss.
bool better(double metric, double loss, double best_metric, double best_loss) {
  if (metric > best_metric + 1e-12) return true;
  return metric >= best_metric - 1e-12 && loss < best_loss - 1e-12;
}

}  // namespace

nlohmann::json LearnerConfigs::to_json() const {
  return {{"mlp", mlp.to_json()}, {"forest", forest.to_json()}, {"gbm", gbm.to_json()}};
}

LearnerConfigs LearnerConfigs::from_json(const nlohmann::json& j) {
  LearnerConfigs c;
  if (j.contains("mlp")) c.mlp = MLPConfig::from_json(j.at("mlp"));
  if (j.contains("forest")) c.forest = ForestConfig::from_json(j.at("forest"));
  if (j.contains("gbm")) c.gbm = GBMConfig::from_json(j.at("gbm"));
  return c;
}

const std::vector<std::string>& learner_kinds() {
  static const std::vector<std::string> kinds{"mlp", "forest", "gbm"};
  return kinds;
}

std::uint64_t learner_seed(std::uint64_t seed, const std::string& kind) {
  return derive_seed(seed, {0x1EA2ULL, kind_key(kind)});
}

LearnerPtr fit_learner(const std::string& kind, const DistillSet& set, const LearnerConfigs& configs,
                       std::uint64_t seed) {
  return fit_with_exact_seed(kind, set, configs, learner_seed(seed, kind));
}

void StackEnsembleConfig::validate() const {
  if (folds < 2) throw std::invalid_argument("stacking needs at least two folds");
}

nlohmann::json StackEnsembleConfig::to_json() const {
  return {{"folds", folds}, {"base", base.to_json()}, {"meta", meta.to_json()}, {"blend", blend}};
}

StackEnsembleConfig StackEnsembleConfig::from_json(const nlohmann::json& j) {
  StackEnsembleConfig c;
  c.folds = j.value("folds", c.folds);
  if (j.contains("base")) c.base = LearnerConfigs::from_json(j.at("base"));
  if (j.contains("meta")) c.meta = GBMConfig::from_json(j.at("meta"));
  c.blend = j.value("blend", c.blend);
  c.validate();
  return c;
}

data::FeatureMatrix with_prediction_columns(const data::FeatureMatrix& features,
                                            const std::vector<SoftTargets>& predictions) {
  data::FeatureMatrix out;
  out.n_rows = features.n_rows;
  out.cardinalities = features.cardinalities;
  std::size_t extra = 0;
  for (const auto& p : predictions) {
    if (p.n_rows() != features.n_rows) throw std::invalid_argument("prediction rows do not match features");
    extra += p.width;
  }
  out.n_cols = features.n_cols + extra;
  out.cardinalities.resize(out.n_cols, 0);
  out.values.reserve(out.n_rows * out.n_cols);
  for (std::size_t r = 0; r < features.n_rows; ++r) {
    const auto row = features.row(r);
    out.values.insert(out.values.end(), row.begin(), row.end());
    for (const auto& p : predictions) {
      const auto pr = p.row(r);
      out.values.insert(out.values.end(), pr.begin(), pr.end());
    }
  }
  return out;
}

SoftTargets blend_predictions(std::span<const SoftTargets> predictions, std::span<const double> weights) {
  if (predictions.empty() || predictions.size() != weights.size()) throw std::invalid_argument("blend size mismatch");
  SoftTargets out{predictions[0].kind, predictions[0].width,
                  std::vector<double>(predictions[0].values.size(), 0.0)};
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (weights[i] == 0.0) continue;
    if (predictions[i].values.size() != out.values.size()) throw std::invalid_argument("blend shape mismatch");
    for (std::size_t k = 0; k < out.values.size(); ++k) out.values[k] += weights[i] * predictions[i].values[k];
  }
  return out;
}

std::size_t select_by_metric(std::span<const double> metrics, std::span<const std::size_t> parameter_counts) {
  if (metrics.empty()) throw std::invalid_argument("no candidates to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < metrics.size(); ++i) {
    if (metrics[i] > metrics[best] ||
        (metrics[i] == metrics[best] && parameter_counts[i] < parameter_counts[best])) {
      best = i;
    }
  }
  return best;
}

std::size_t select_model(std::span<const LearnerPtr> candidates, const data::FeatureMatrix& val_features,
                         std::span<const double> val_truth) {
  if (candidates.empty()) throw std::invalid_argument("no candidates to select from");
  std::vector<double> metrics;
  std::vector<std::size_t> sizes;
  for (const auto& c : candidates) {
    metrics.push_back(task_metric(c->task(), c->predict(val_features), val_truth));
    sizes.push_back(c->parameter_count());
  }
  return select_by_metric(metrics, sizes);
}

const std::array<std::string, StackEnsemble::kComponents>& StackEnsemble::component_names() {
  static const std::array<std::string, kComponents> names{"meta", "mlp", "forest", "gbm"};
  return names;
}

std::shared_ptr<StackEnsemble> StackEnsemble::fit(const data::Table& train, const data::Table& val,
                                                  const StackEnsembleConfig& config, std::uint64_t seed) {
  config.validate();
  const DistillSet set = labeled_set(train);
  const std::size_t n = set.n_rows();
  if (n < config.folds) throw std::invalid_argument("fewer training rows than folds");
  if (val.n_rows() == 0) throw std::invalid_argument("teacher needs a validation fold");
  auto out = std::make_shared<StackEnsemble>();
  StackEnsemble& t = *out;
  t.config_ = config;
  t.task_ = set.task;
  t.cardinalities_ = set.features.cardinalities;
  t.n_train_ = n;
  const auto& kinds = learner_kinds();

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  {
    Rng rng = make_stream(seed, {kFoldKey});
    std::shuffle(perm.begin(), perm.end(), rng);
  }
  std::vector<std::size_t> fold_of(n);
  for (std::size_t i = 0; i < n; ++i) fold_of[perm[i]] = i % config.folds;

  std::vector<SoftTargets> oof;
  for (const auto& kind : kinds) {
    SoftTargets pred = empty_targets(t.task_);
    pred.values.assign(n * pred.width, 0.0);
    for (std::size_t f = 0; f < config.folds; ++f) {
      std::vector<std::size_t> fit_rows, held;
      for (std::size_t r = 0; r < n; ++r) (fold_of[r] == f ? held : fit_rows).push_back(r);
      const auto model = fit_with_exact_seed(kind, select_rows(set, fit_rows), config.base,
                                             derive_seed(seed, {kFoldKey, kind_key(kind), f}));
      const auto p = model->predict(select_rows(set.features, held));
      for (std::size_t k = 0; k < held.size(); ++k) {
        std::copy(p.row(k).begin(), p.row(k).end(), pred.values.begin() + static_cast<std::ptrdiff_t>(held[k] * pred.width));
      }
    }
    oof.push_back(std::move(pred));
    t.refits_.push_back(fit_learner(kind, set, config.base, seed));
  }

  DistillSet meta_set = set;
  meta_set.features = with_prediction_columns(set.features, oof);
  GBMConfig meta_config = config.meta;
  meta_config.seed = derive_seed(seed, {kMetaKey});
  t.meta_ = GradientBoosting::fit(meta_set, meta_config);

  const data::FeatureMatrix vx = val.features();
  const auto vy = val.target_values();
  const auto preds = t.component_predictions(vx);
  std::array<double, kComponents> metric{}, loss{};
  for (std::size_t i = 0; i < kComponents; ++i) {
    metric[i] = task_metric(t.task_, preds[i], vy);
    loss[i] = task_loss(t.task_, preds[i], vy);
  }
  t.component_metrics_ = metric;

  std::size_t start = 0;
  if (config.blend) {
    for (std::size_t i = 1; i < kComponents; ++i) {
      if (better(metric[i], loss[i], metric[start], loss[start])) start = i;
    }
  }
  std::array<double, kComponents> w{};
  w[start] = 1.0;
  double best_metric = metric[start], best_loss = loss[start];
  if (config.blend) {
    constexpr int kSteps = 20;
    for (int sweep = 0; sweep < 20; ++sweep) {
      bool improved = false;
      for (std::size_t i = 0; i < kComponents; ++i) {
        const auto from = w;
        const double others = 1.0 - from[i];
        for (int s = 0; s <= kSteps; ++s) {
          const double a = static_cast<double>(s) / kSteps;
          if (others <= 0.0 && a < 1.0) continue;
          std::array<double, kComponents> cand{};
          for (std::size_t k = 0; k < kComponents; ++k) cand[k] = k == i ? a : (others > 0.0 ? from[k] * (1.0 - a) / others : 0.0);
          const auto bp = blend_predictions(preds, cand);
          const double m = task_metric(t.task_, bp, vy);
          const double l = task_loss(t.task_, bp, vy);
          if (better(m, l, best_metric, best_loss)) {
            best_metric = m;
            best_loss = l;
            w = cand;
            improved = true;
          }
        }
      }
      if (!improved) break;
    }
  }
  t.weights_ = w;
  t.val_metric_ = best_metric;
  return out;
}

std::array<SoftTargets, StackEnsemble::kComponents> StackEnsemble::component_predictions(
    const data::FeatureMatrix& features) const {
  std::array<SoftTargets, kComponents> out;
  std::vector<SoftTargets> base;
  for (const auto& r : refits_) base.push_back(r->predict(features));
  out[0] = meta_->predict(with_prediction_columns(features, base));
  for (std::size_t i = 0; i < base.size(); ++i) out[i + 1] = std::move(base[i]);
  return out;
}

SoftTargets StackEnsemble::predict(const data::FeatureMatrix& features) const {
  check_features(features, cardinalities_);
  std::vector<SoftTargets> base;
  for (const auto& r : refits_) base.push_back(r->predict(features));
  std::array<SoftTargets, kComponents> parts;
  if (weights_[0] != 0.0) parts[0] = meta_->predict(with_prediction_columns(features, base));
  for (std::size_t i = 0; i < base.size(); ++i) parts[i + 1] = std::move(base[i]);
  std::vector<SoftTargets> used;
  std::vector<double> w;
  for (std::size_t i = 0; i < kComponents; ++i) {
    if (weights_[i] == 0.0) continue;
    used.push_back(std::move(parts[i]));
    w.push_back(weights_[i]);
  }
  return blend_predictions(used, w);
}

std::size_t StackEnsemble::parameter_count() const {
  std::size_t total = meta_->parameter_count() + kComponents;
  for (const auto& r : refits_) total += r->parameter_count();
  return total;
}

nlohmann::json StackEnsemble::info() const {
  nlohmann::json weights, metrics;
  for (std::size_t i = 0; i < kComponents; ++i) {
    weights[component_names()[i]] = weights_[i];
    metrics[component_names()[i]] = component_metrics_[i];
  }
  return {{"type", type_name()},         {"config", config_.to_json()}, {"n_train", n_train_},
          {"parameters", parameter_count()}, {"blend_weights", weights}, {"validation_metric", val_metric_},
          {"component_validation_metrics", metrics}};
}

nlohmann::json StackEnsemble::to_json() const {
  nlohmann::json refits = nlohmann::json::array();
  for (const auto& r : refits_) refits.push_back(r->to_json());
  return {{"format", "fastdad.learner"},
          {"version", 1},
          {"type", type_name()},
          {"task", task_.name()},
          {"n_classes", task_.n_classes},
          {"config", config_.to_json()},
          {"cardinalities", cardinalities_},
          {"n_train", n_train_},
          {"weights", weights_},
          {"validation_metric", val_metric_},
          {"component_validation_metrics", component_metrics_},
          {"refits", std::move(refits)},
          {"meta", meta_->to_json()}};
}

std::shared_ptr<StackEnsemble> StackEnsemble::from_json(const nlohmann::json& j) {
  auto out = std::make_shared<StackEnsemble>();
  StackEnsemble& t = *out;
  t.config_ = StackEnsembleConfig::from_json(j.at("config"));
  t.task_ = data::TaskKind::parse(j.at("task"), j.at("n_classes"));
  t.cardinalities_ = j.at("cardinalities").get<std::vector<std::size_t>>();
  t.n_train_ = j.at("n_train");
  t.weights_ = j.at("weights").get<std::array<double, kComponents>>();
  t.val_metric_ = j.at("validation_metric");
  t.component_metrics_ = j.at("component_validation_metrics").get<std::array<double, kComponents>>();
  for (const auto& r : j.at("refits")) t.refits_.push_back(learner_from_json(r));
  t.meta_ = learner_from_json(j.at("meta"));
  if (t.refits_.size() != learner_kinds().size()) throw std::invalid_argument("stack checkpoint needs three refits");
  return out;
}

}  // namespace fastdad::learn
