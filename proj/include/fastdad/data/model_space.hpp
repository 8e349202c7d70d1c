#pragma once

#include <span>
#include <vector>

#include "fastdad/data/table.hpp"
#include "fastdad/data/transform.hpp"
#include "fastdad/rng.hpp"

namespace fastdad::data {

// Continuous coordinates in which the density model and the Gibbs sampler
// operate: numeric features standardized with training statistics,
// categorical features dequantized (code + Uniform[0,1)).
class ModelSpace {
 public:
  ModelSpace() = default;
  // Statistics come from the feature columns of `train`.
  explicit ModelSpace(const Table& train);
  ModelSpace(Schema schema, std::vector<ColumnStats> feature_stats);

  const Schema& schema() const { return schema_; }
  std::size_t dim() const { return feature_columns_.size(); }
  const std::vector<std::size_t>& feature_columns() const { return feature_columns_; }
  const std::vector<ColumnStats>& feature_stats() const { return stats_; }
  // 0 for numeric features.
  std::size_t cardinality(std::size_t feature) const { return cardinalities_[feature]; }

  // Row `row` of `table` into model space, drawing dequantization noise.
  void encode(const Table& table, std::size_t row, Rng& rng, std::span<double> out) const;
  // Deterministic embedding used by the metrics: standardized numerics,
  // raw category codes.
  void embed(const Table& table, std::size_t row, std::span<double> out) const;
  std::vector<double> embed_all(const Table& table) const;  // row-major n x dim
  // Model-space point back to table cells (destandardize, requantize).
  void decode(std::span<const double> point, std::span<double> cells) const;
  // Maps decoded cells through embed() coordinates.
  void embed_cells(std::span<const double> cells, std::span<double> out) const;

  nlohmann::json to_json() const;
  static ModelSpace from_json(const nlohmann::json& j);

 private:
  Schema schema_;
  std::vector<std::size_t> feature_columns_;
  std::vector<ColumnStats> stats_;
  std::vector<std::size_t> cardinalities_;
};

}  // namespace fastdad::data
