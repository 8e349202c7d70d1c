#include "fastdad/data/model_space.hpp"

#include <stdexcept>

namespace fastdad::data {

ModelSpace::ModelSpace(const Table& train) : schema_(train.schema()) {
  feature_columns_ = schema_.feature_columns();
  const StandardizationStats all = fit_standardization(train);
  for (std::size_t c : feature_columns_) {
    stats_.push_back(all.columns[c]);
    cardinalities_.push_back(schema_.column(c).kind.is_categorical() ? schema_.column(c).kind.cardinality()
                                                                      : 0);
  }
}

ModelSpace::ModelSpace(Schema schema, std::vector<ColumnStats> feature_stats)
    : schema_(std::move(schema)), stats_(std::move(feature_stats)) {
  feature_columns_ = schema_.feature_columns();
  if (stats_.size() != feature_columns_.size()) throw std::invalid_argument("feature stats size mismatch");
  for (std::size_t j = 0; j < feature_columns_.size(); ++j) {
    const ColumnKind& kind = schema_.column(feature_columns_[j]).kind;
    if (kind.is_categorical() != stats_[j].categorical) {
      throw std::invalid_argument("feature stats kind mismatch");
    }
    cardinalities_.push_back(kind.is_categorical() ? kind.cardinality() : 0);
  }
}

void ModelSpace::encode(const Table& table, std::size_t row, Rng& rng, std::span<double> out) const {
  for (std::size_t j = 0; j < feature_columns_.size(); ++j) {
    const double cell = table.at(row, feature_columns_[j]);
    if (cardinalities_[j] > 0) {
      out[j] = dequantize(static_cast<int>(cell), cardinalities_[j], rng);
    } else {
      out[j] = (cell - stats_[j].mean) / stats_[j].std;
    }
  }
}

void ModelSpace::embed(const Table& table, std::size_t row, std::span<double> out) const {
  for (std::size_t j = 0; j < feature_columns_.size(); ++j) {
    const double cell = table.at(row, feature_columns_[j]);
    out[j] = cardinalities_[j] > 0 ? cell : (cell - stats_[j].mean) / stats_[j].std;
  }
}

std::vector<double> ModelSpace::embed_all(const Table& table) const {
  std::vector<double> out(table.n_rows() * dim());
  for (std::size_t r = 0; r < table.n_rows(); ++r) embed(table, r, {out.data() + r * dim(), dim()});
  return out;
}

void ModelSpace::decode(std::span<const double> point, std::span<double> cells) const {
  for (std::size_t j = 0; j < feature_columns_.size(); ++j) {
    cells[j] = cardinalities_[j] > 0 ? static_cast<double>(requantize(point[j], cardinalities_[j]))
                                     : point[j] * stats_[j].std + stats_[j].mean;
  }
}

void ModelSpace::embed_cells(std::span<const double> cells, std::span<double> out) const {
  for (std::size_t j = 0; j < feature_columns_.size(); ++j) {
    out[j] = cardinalities_[j] > 0 ? cells[j] : (cells[j] - stats_[j].mean) / stats_[j].std;
  }
}

nlohmann::json ModelSpace::to_json() const {
  StandardizationStats s{stats_};
  return {{"schema", data::to_json(schema_)}, {"feature_stats", data::to_json(s)}};
}

ModelSpace ModelSpace::from_json(const nlohmann::json& j) {
  return ModelSpace(schema_from_json(j.at("schema")),
                    standardization_from_json(j.at("feature_stats")).columns);
}

}  // namespace fastdad::data
