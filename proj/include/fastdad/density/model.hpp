#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fastdad/data/model_space.hpp"
#include "fastdad/density/config.hpp"
#include "fastdad/density/mixture.hpp"
#include "fastdad/rng.hpp"

namespace fastdad::density {

struct TensorInfo {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

// Sinusoidal position code for table column `position`; d_hidden must be even.
std::vector<double> positional_encoding(std::size_t d_hidden, std::size_t position);

// Masked self-attention estimator of every conditional p(x_i | x_-i).
//
// Input features are embedded by per-feature affine maps plus a sinusoidal
// position code. The feature being predicted is replaced by a learned mask
// token (its position code is kept) and is excluded as an attention key and
// value in every layer, so nothing downstream can read its value. Each layer
// is a pre-norm Transformer block; a final layer norm and a linear head at
// the masked position emit K mixture weights, means and raw scales.
//
// All parameters live in one flat vector; tensors are views into it.
class DensityModel {
 public:
  DensityModel() = default;
  DensityModel(ModelConfig config, data::ModelSpace space, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const data::ModelSpace& space() const { return space_; }
  std::size_t dim() const { return space_.dim(); }

  std::span<const double> parameters() const { return params_; }
  std::span<double> mutable_parameters() { return params_; }
  std::size_t n_parameters() const { return params_.size(); }
  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  const TensorInfo& tensor_info(const std::string& name) const;
  std::span<const double> tensor(const std::string& name) const;
  std::span<double> mutable_tensor(const std::string& name);
  const std::vector<double>& positional_table() const { return pe_; }

  // `batch` is row-major (rows x dim) in model space.
  std::vector<MixtureParams> forward_conditionals(std::span<const double> batch,
                                                  std::size_t masked) const;
  // Raw head rows (rows x 3K), as consumed by mixture_from_head.
  std::vector<double> forward_head(std::span<const double> batch, std::size_t masked) const;

  // Mean negative log conditional of feature `masked` over the batch.
  double pl_loss(std::span<const double> batch, std::size_t masked) const;

  // pl_loss and its gradient (overwritten into `grad`, sized n_parameters()).
  // With a non-null `dropout_rng` dropout is active at config().dropout.
  double loss_and_gradient(std::span<const double> batch, std::size_t masked,
                           std::span<double> grad, Rng* dropout_rng = nullptr) const;

  // Mean per-feature log conditional over all rows and features.
  double mean_pseudolikelihood(std::span<const double> rows) const;

  nlohmann::json to_json() const;
  static DensityModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static DensityModel load(const std::filesystem::path& path);

  bool operator==(const DensityModel& other) const {
    return config_ == other.config_ && params_ == other.params_;
  }

 private:
  struct Workspace;

  void build_layout();
  void initialize(std::uint64_t seed);
  void check_batch(std::span<const double> batch, std::size_t masked) const;
  void run_forward(std::span<const double> batch, std::size_t masked, Workspace& ws,
                   Rng* dropout_rng) const;
  void run_backward(std::span<const double> batch, std::size_t masked, Workspace& ws,
                    std::span<double> grad) const;

  ModelConfig config_;
  data::ModelSpace space_;
  std::vector<double> params_;
  std::vector<TensorInfo> tensors_;
  std::vector<double> pe_;  // dim x d_hidden, fixed
};

}  // namespace fastdad::density
