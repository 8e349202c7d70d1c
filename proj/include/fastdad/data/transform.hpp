#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "fastdad/data/table.hpp"
#include "fastdad/rng.hpp"

namespace fastdad::data {

struct SplitSpec {
  double train_fraction = 0.9;
  std::uint64_t seed = 0;
};

// Disjoint (train, val) partition with round(train_fraction * n) training
// rows, clamped so both folds are non-empty. Classification tables are
// stratified when every class has at least two rows.
std::pair<Table, Table> split_train_val(const Table& table, const SplitSpec& spec);

// Row indices behind split_train_val, in ascending order per fold.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(const Table& table,
                                                                            const SplitSpec& spec);

struct ColumnStats {
  bool categorical = false;  // dequantized separately, never rescaled
  double mean = 0.0;
  double std = 1.0;

  bool operator==(const ColumnStats&) const = default;
};

struct StandardizationStats {
  std::vector<ColumnStats> columns;  // one entry per table column

  bool operator==(const StandardizationStats&) const = default;
};

// Population mean/std per numeric column; constant columns keep std = 1.
StandardizationStats fit_standardization(const Table& table);
std::pair<Table, StandardizationStats> standardize(const Table& table);
Table apply_standardization(const Table& table, const StandardizationStats& stats);
Table destandardize(const Table& table, const StandardizationStats& stats);

// code + u with u ~ Uniform[0, 1).
double dequantize(int code, std::size_t cardinality, Rng& rng);
// clamp(floor(value), 0, cardinality - 1)
int requantize(double value, std::size_t cardinality);

nlohmann::json to_json(const StandardizationStats& stats);
StandardizationStats standardization_from_json(const nlohmann::json& j);

}  // namespace fastdad::data
