#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fastdad/data/model_space.hpp"
#include "fastdad/density/model.hpp"
#include "fastdad/gibbs/sampler.hpp"
#include "fastdad/learn/forest.hpp"

namespace fastdad::diagnostics {

// Row-major point cloud.
struct PointSet {
  std::size_t n = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  PointSet() = default;
  PointSet(std::size_t rows, std::size_t d, std::vector<double> v);
  std::span<const double> row(std::size_t r) const { return {values.data() + r * dim, dim}; }
};

// Metric embedding of the feature rows (standardized numerics, raw codes).
PointSet embed(const data::Table& table, const data::ModelSpace& space);
PointSet embed(const gibbs::AugmentedSet& samples, const data::ModelSpace& space);

struct MmdConfig {
  std::vector<double> bandwidths{1.0, 2.0, 4.0, 8.0, 16.0};
  void validate() const;
};

// Sum over bandwidths of exp(-|a-b|^2 / (2 s^2)).
double mixture_kernel(std::span<const double> a, std::span<const double> b, const MmdConfig& config);

// Biased estimate mean k(X,X) + mean k(Y,Y) - 2 mean k(X,Y), floored at 0.
double mmd_squared(const PointSet& x, const PointSet& y, const MmdConfig& config = {});
double mmd(const PointSet& x, const PointSet& y, const MmdConfig& config = {});

struct FidelityReport {
  double accuracy = 0.5;       // discriminator accuracy on the balanced test pair
  double distance = 0.0;       // |accuracy - 0.5|, lower means harder to tell apart
  double score = 0.5;          // 0.5 - distance
  std::size_t train_per_side = 0;
  std::size_t test_per_side = 0;

  nlohmann::json to_json() const;
};

// Random-forest discriminator: trained on real_fit (label 1) against
// samples_fit (label 0), scored on real_eval against samples_eval. Each pair
// is balanced by subsampling its larger side.
FidelityReport sample_fidelity(const data::Table& real_fit, const data::Table& real_eval,
                               const gibbs::AugmentedSet& samples_fit,
                               const gibbs::AugmentedSet& samples_eval, std::uint64_t seed,
                               const learn::ForestConfig& discriminator = {});

struct SuiteOptions {
  std::size_t sample_count = 0;  // 0: one chain per training row
  MmdConfig mmd;
  learn::ForestConfig discriminator;
};

struct SuiteRow {
  int rounds = 0;
  double mmd = 0.0;
  double diffusion = 0.0;
  FidelityReport fidelity;
  // Min-max normalized over the rows of the suite.
  double mmd_normalized = 0.0;
  double diffusion_normalized = 0.0;
  double fidelity_distance_normalized = 0.0;
  double fidelity_score_normalized = 0.0;
};

// Per k: draws samples from the chains started at `train`, measures MMD and
// diffusion against `train` and fidelity against the real rows of `holdout`
// (split in half between discriminator fit and evaluation).
std::vector<SuiteRow> diagnostics_suite(const density::DensityModel& model, const data::Table& train,
                                        const data::Table& holdout, std::span<const int> rounds_list,
                                        std::uint64_t seed, const SuiteOptions& options = {});

// Min-max scaling onto [0, 1]; a constant column maps to 0.
std::vector<double> min_max_normalize(std::span<const double> values);

nlohmann::json suite_to_json(std::span<const SuiteRow> rows);

}  // namespace fastdad::diagnostics
