#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace fastdad::data {

// Prediction problem attached to a table's target column.
struct TaskKind {
  enum class Kind { Regression, Binary, Multiclass };

  Kind kind = Kind::Regression;
  std::size_t n_classes = 0;  // 2 for Binary, >= 3 for Multiclass, 0 for Regression

  static TaskKind regression() { return {Kind::Regression, 0}; }
  static TaskKind binary() { return {Kind::Binary, 2}; }
  static TaskKind multiclass(std::size_t classes);
  // Binary for two classes, Multiclass otherwise.
  static TaskKind classification(std::size_t classes);

  bool is_classification() const { return kind != Kind::Regression; }
  std::string name() const;
  static TaskKind parse(const std::string& text, std::size_t n_classes);

  bool operator==(const TaskKind&) const = default;
};

class ColumnKind {
 public:
  static ColumnKind numeric() { return ColumnKind{}; }
  static ColumnKind categorical(std::vector<std::string> categories);

  bool is_categorical() const { return categorical_; }
  bool is_numeric() const { return !categorical_; }
  std::size_t cardinality() const { return categories_.size(); }
  const std::vector<std::string>& categories() const { return categories_; }
  // Index of `name` among the categories, if present.
  std::optional<std::size_t> code_of(const std::string& name) const;

  bool operator==(const ColumnKind&) const = default;

 private:
  bool categorical_ = false;
  std::vector<std::string> categories_;
};

struct ColumnSpec {
  std::string name;
  ColumnKind kind;

  bool operator==(const ColumnSpec&) const = default;
};

class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<ColumnSpec> columns);

  const std::vector<ColumnSpec>& columns() const { return columns_; }
  const ColumnSpec& column(std::size_t i) const { return columns_.at(i); }
  std::size_t n_columns() const { return columns_.size(); }
  std::optional<std::size_t> index_of(const std::string& name) const;

  // Designates a target column. Classification targets must be categorical.
  void set_target(std::size_t column, TaskKind task);
  std::optional<std::size_t> target() const { return target_; }
  const TaskKind& task() const { return task_; }

  // Column indices of the features, i.e. everything but the target.
  std::vector<std::size_t> feature_columns() const;
  std::size_t n_features() const;

  // Stable 64-bit hash of names, kinds and target.
  std::uint64_t fingerprint() const;

  bool operator==(const Schema&) const = default;

 private:
  std::vector<ColumnSpec> columns_;
  std::optional<std::size_t> target_;
  TaskKind task_;
};

// Row-major copy of the feature columns, as consumed by learners.
struct FeatureMatrix {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<double> values;               // n_rows * n_cols
  std::vector<std::size_t> cardinalities;   // 0 for numeric features

  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * n_cols, n_cols};
  }
  double at(std::size_t r, std::size_t c) const { return values[r * n_cols + c]; }
};

// Column-major typed table. Numeric cells are doubles; categorical cells
// hold integer codes in [0, cardinality) stored as doubles.
class Table {
 public:
  Table() = default;
  Table(Schema schema, std::vector<std::vector<double>> columns);

  const Schema& schema() const { return schema_; }
  Schema& mutable_schema() { return schema_; }
  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_columns() const { return columns_.size(); }

  std::span<const double> column(std::size_t c) const { return columns_.at(c); }
  std::span<double> mutable_column(std::size_t c) { return columns_.at(c); }
  double at(std::size_t row, std::size_t col) const { return columns_[col][row]; }
  int code(std::size_t row, std::size_t col) const { return static_cast<int>(columns_[col][row]); }

  Table select_rows(std::span<const std::size_t> rows) const;
  // Appends the rows of `other`, which must share this table's schema.
  void append(const Table& other);

  FeatureMatrix features() const;
  std::span<const double> target_values() const;
  // Target codes as class indices (classification only).
  std::vector<int> target_classes() const;

  // Throws std::invalid_argument when an invariant is broken.
  void validate() const;

  bool operator==(const Table&) const = default;

 private:
  Schema schema_;
  std::vector<std::vector<double>> columns_;
  std::size_t n_rows_ = 0;
};

// Builds a table from row-major feature values using `schema`'s feature
// columns; target cells come from `target` when the schema has one.
Table table_from_features(const Schema& schema, const FeatureMatrix& features,
                          std::span<const double> target = {});

nlohmann::json to_json(const Schema& schema);
Schema schema_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Table& table);
Table table_from_json(const nlohmann::json& j);

}  // namespace fastdad::data
