#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "fastdad/learn/learner.hpp"

namespace fastdad::learn {

struct MLPConfig {
  std::vector<std::size_t> hidden{128, 128};
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 300;
  std::size_t patience = 30;
  double weight_decay = 1e-6;
  double holdout_fraction = 0.1;  // of the real rows, for early stopping
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static MLPConfig from_json(const nlohmann::json& j);
};

// ReLU network on one-hot categoricals and standardized numerics. Softmax
// output with soft cross-entropy (multiclass), sigmoid output with Brier
// loss (binary), linear output with squared error on a standardized target
// (regression). Adam; early stopping on held-out real rows.
class MLP final : public Learner {
 public:
  static std::shared_ptr<MLP> fit(const DistillSet& set, const MLPConfig& config);

  std::string type_name() const override { return "mlp"; }
  const data::TaskKind& task() const override { return task_; }
  SoftTargets predict(const data::FeatureMatrix& features) const override;
  std::size_t parameter_count() const override { return params_.size(); }
  nlohmann::json info() const override;
  nlohmann::json to_json() const override;
  static std::shared_ptr<MLP> from_json(const nlohmann::json& j);

  std::size_t epochs_run() const { return epochs_run_; }

  // Mean training objective of the current parameters on a set, as
  // minimized by fit.
  double objective(const DistillSet& set) const;

 private:
  struct Layer {
    std::size_t in = 0, out = 0, w_offset = 0, b_offset = 0;
  };

  void build_layers(std::size_t inputs, std::size_t outputs);
  std::size_t input_width() const;
  void encode(const data::FeatureMatrix& features, std::size_t begin, std::size_t count,
              std::vector<double>& out) const;
  // Raw output-layer values for `count` encoded rows.
  void forward(const std::vector<double>& input, std::size_t count, std::vector<std::vector<double>>& acts) const;
  double batch_loss_grad(const std::vector<double>& input, std::span<const double> targets, std::size_t count,
                         std::vector<double>* grad) const;
  std::size_t outputs() const { return task_.kind == data::TaskKind::Kind::Multiclass ? task_.n_classes : 1; }

  MLPConfig config_;
  data::TaskKind task_;
  std::vector<std::size_t> cardinalities_;
  std::vector<double> means_, stds_;  // per feature; unused for categoricals
  double target_mean_ = 0.0, target_std_ = 1.0;
  std::size_t n_train_ = 0;
  std::size_t epochs_run_ = 0;
  std::vector<Layer> layers_;
  std::vector<double> params_;
};

}  // namespace fastdad::learn
