#pragma once

#include <span>
#include <vector>

#include "fastdad/data/table.hpp"

namespace fastdad::learn {

// Scalar: one value per row (regression value, or positive-class
// probability for binary tasks). ProbVector: C class probabilities per row.
struct SoftTargets {
  enum class Kind { Scalar, ProbVector };

  Kind kind = Kind::Scalar;
  std::size_t width = 1;
  std::vector<double> values;  // n_rows * width

  std::size_t n_rows() const { return width == 0 ? 0 : values.size() / width; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * width, width}; }
  std::span<double> mutable_row(std::size_t r) { return {values.data() + r * width, width}; }

  // Throws when a ProbVector row is negative or does not sum to 1 (1e-6),
  // or when `unit_interval` is set and a Scalar leaves [0, 1].
  void validate(bool unit_interval = false) const;
  void append(const SoftTargets& other);
  SoftTargets select_rows(std::span<const std::size_t> rows) const;

  bool operator==(const SoftTargets&) const = default;
};

// Target kind and width a task trains and predicts with.
SoftTargets empty_targets(const data::TaskKind& task);

// Observed labels in the task's target kind: binary as 0/1 scalars,
// multiclass as one-hot rows, regression as-is.
SoftTargets encode_labels(const data::TaskKind& task, std::span<const double> target_column);

// Features plus targets, with real rows first and augmented rows after.
struct DistillSet {
  data::TaskKind task;
  data::FeatureMatrix features;
  SoftTargets targets;
  std::vector<bool> augmented;  // one flag per row

  std::size_t n_rows() const { return features.n_rows; }
  std::size_t n_real() const;
  void validate() const;
};

// Labeled table as a DistillSet with every row real.
DistillSet labeled_set(const data::Table& table);

double brier_loss(double pred, double target);
// -sum_c target_c log max(pred_c, 1e-12)
double soft_cross_entropy(std::span<const double> pred, std::span<const double> target);
void softmax_inplace(std::span<double> logits);

// Accuracy for classification, R^2 for regression, on the observed target
// column (class codes or values).
double task_metric(const data::TaskKind& task, const SoftTargets& pred, std::span<const double> truth);
// Mean Brier score (summed over classes for multiclass) or mean squared
// error; lower is better.
double task_loss(const data::TaskKind& task, const SoftTargets& pred, std::span<const double> truth);
// Predicted class per row (argmax, ties to the lower index; binary at 0.5).
std::vector<int> predicted_classes(const data::TaskKind& task, const SoftTargets& pred);

nlohmann::json to_json(const SoftTargets& t);
SoftTargets soft_targets_from_json(const nlohmann::json& j);

}  // namespace fastdad::learn

namespace fastdad::learn {

data::FeatureMatrix select_rows(const data::FeatureMatrix& features, std::span<const std::size_t> rows);
DistillSet select_rows(const DistillSet& set, std::span<const std::size_t> rows);

}  // namespace fastdad::learn
