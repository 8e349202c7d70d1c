#include "fastdad/learn/targets.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fastdad::learn {

void SoftTargets::validate(bool unit_interval) const {
  if (width == 0 || values.size() % width != 0) throw std::invalid_argument("ragged soft targets");
  if (kind == Kind::Scalar) {
    if (width != 1) throw std::invalid_argument("scalar targets must have width 1");
    for (double v : values) {
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite target");
      if (unit_interval && (v < 0.0 || v > 1.0)) throw std::invalid_argument("binary target outside [0, 1]");
    }
    return;
  }
  for (std::size_t r = 0; r < n_rows(); ++r) {
    double total = 0.0;
    for (double v : row(r)) {
      if (!(v >= 0.0)) throw std::invalid_argument("negative class probability");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-6) {
      throw std::invalid_argument("probability row " + std::to_string(r) + " sums to " + std::to_string(total));
    }
  }
}

void SoftTargets::append(const SoftTargets& other) {
  if (other.kind != kind || other.width != width) throw std::invalid_argument("cannot mix target kinds");
  values.insert(values.end(), other.values.begin(), other.values.end());
}

SoftTargets SoftTargets::select_rows(std::span<const std::size_t> rows) const {
  SoftTargets out{kind, width, {}};
  out.values.reserve(rows.size() * width);
  for (std::size_t r : rows) {
    const auto src = row(r);
    out.values.insert(out.values.end(), src.begin(), src.end());
  }
  return out;
}

SoftTargets empty_targets(const data::TaskKind& task) {
  if (task.kind == data::TaskKind::Kind::Multiclass) return {SoftTargets::Kind::ProbVector, task.n_classes, {}};
  return {SoftTargets::Kind::Scalar, 1, {}};
}

SoftTargets encode_labels(const data::TaskKind& task, std::span<const double> target_column) {
  SoftTargets out = empty_targets(task);
  if (task.kind != data::TaskKind::Kind::Multiclass) {
    out.values.assign(target_column.begin(), target_column.end());
    return out;
  }
  out.values.assign(target_column.size() * task.n_classes, 0.0);
  for (std::size_t r = 0; r < target_column.size(); ++r) {
    const auto c = static_cast<std::size_t>(target_column[r]);
    if (c >= task.n_classes) throw std::invalid_argument("class code out of range");
    out.values[r * task.n_classes + c] = 1.0;
  }
  return out;
}

std::size_t DistillSet::n_real() const {
  return static_cast<std::size_t>(std::count(augmented.begin(), augmented.end(), false));
}

void DistillSet::validate() const {
  if (targets.n_rows() != features.n_rows || augmented.size() != features.n_rows) {
    throw std::invalid_argument("distill set row counts disagree");
  }
  const SoftTargets expect = empty_targets(task);
  if (targets.kind != expect.kind || targets.width != expect.width) {
    throw std::invalid_argument("target kind does not match the task");
  }
  targets.validate(task.kind == data::TaskKind::Kind::Binary);
}

DistillSet labeled_set(const data::Table& table) {
  if (!table.schema().target()) throw std::invalid_argument("table has no target column");
  DistillSet out;
  out.task = table.schema().task();
  out.features = table.features();
  out.targets = encode_labels(out.task, table.target_values());
  out.augmented.assign(table.n_rows(), false);
  return out;
}

double brier_loss(double pred, double target) {
  if (pred < 0.0 || pred > 1.0 || target < 0.0 || target > 1.0) {
    throw std::invalid_argument("brier_loss expects values in [0, 1]");
  }
  return (pred - target) * (pred - target);
}

double soft_cross_entropy(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty()) throw std::invalid_argument("probability vectors differ in length");
  double loss = 0.0;
  for (std::size_t c = 0; c < pred.size(); ++c) {
    if (target[c] != 0.0) loss -= target[c] * std::log(std::max(pred[c], 1e-12));
  }
  return loss;
}

void softmax_inplace(std::span<double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double& v : logits) {
    v = std::exp(v - mx);
    z += v;
  }
  for (double& v : logits) v /= z;
}

std::vector<int> predicted_classes(const data::TaskKind& task, const SoftTargets& pred) {
  std::vector<int> out(pred.n_rows());
  for (std::size_t r = 0; r < out.size(); ++r) {
    if (task.kind == data::TaskKind::Kind::Binary) {
      out[r] = pred.row(r)[0] > 0.5 ? 1 : 0;
    } else {
      const auto row = pred.row(r);
      out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
  }
  return out;
}

double task_metric(const data::TaskKind& task, const SoftTargets& pred, std::span<const double> truth) {
  if (pred.n_rows() != truth.size() || truth.empty()) throw std::invalid_argument("metric needs matching non-empty rows");
  if (task.is_classification()) {
    const auto cls = predicted_classes(task, pred);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < cls.size(); ++r) hits += cls[r] == static_cast<int>(truth[r]) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
  }
  double mean = 0.0;
  for (double y : truth) mean += y;
  mean /= static_cast<double>(truth.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t r = 0; r < truth.size(); ++r) {
    ss_res += (truth[r] - pred.values[r]) * (truth[r] - pred.values[r]);
    ss_tot += (truth[r] - mean) * (truth[r] - mean);
  }
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
  return 1.0 - ss_res / ss_tot;
}

double task_loss(const data::TaskKind& task, const SoftTargets& pred, std::span<const double> truth) {
  if (pred.n_rows() != truth.size() || truth.empty()) throw std::invalid_argument("loss needs matching non-empty rows");
  double total = 0.0;
  for (std::size_t r = 0; r < truth.size(); ++r) {
    const auto row = pred.row(r);
    if (task.kind == data::TaskKind::Kind::Multiclass) {
      for (std::size_t c = 0; c < row.size(); ++c) {
        const double t = static_cast<std::size_t>(truth[r]) == c ? 1.0 : 0.0;
        total += (row[c] - t) * (row[c] - t);
      }
    } else {
      total += (row[0] - truth[r]) * (row[0] - truth[r]);
    }
  }
  return total / static_cast<double>(truth.size());
}

nlohmann::json to_json(const SoftTargets& t) {
  return {{"kind", t.kind == SoftTargets::Kind::Scalar ? "scalar" : "prob_vector"},
          {"width", t.width},
          {"values", t.values}};
}

SoftTargets soft_targets_from_json(const nlohmann::json& j) {
  SoftTargets t;
  const std::string kind = j.at("kind");
  if (kind == "scalar") {
    t.kind = SoftTargets::Kind::Scalar;
  } else if (kind == "prob_vector") {
    t.kind = SoftTargets::Kind::ProbVector;
  } else {
    throw std::invalid_argument("unknown target kind: " + kind);
  }
  t.width = j.at("width");
  t.values = j.at("values").get<std::vector<double>>();
  return t;
}

}  // namespace fastdad::learn

namespace fastdad::learn {

data::FeatureMatrix select_rows(const data::FeatureMatrix& features, std::span<const std::size_t> rows) {
  data::FeatureMatrix out;
  out.n_rows = rows.size();
  out.n_cols = features.n_cols;
  out.cardinalities = features.cardinalities;
  out.values.reserve(rows.size() * features.n_cols);
  for (std::size_t r : rows) {
    const auto src = features.row(r);
    out.values.insert(out.values.end(), src.begin(), src.end());
  }
  return out;
}

DistillSet select_rows(const DistillSet& set, std::span<const std::size_t> rows) {
  DistillSet out;
  out.task = set.task;
  out.features = select_rows(set.features, rows);
  out.targets = set.targets.select_rows(rows);
  for (std::size_t r : rows) out.augmented.push_back(set.augmented[r]);
  return out;
}

}  // namespace fastdad::learn
