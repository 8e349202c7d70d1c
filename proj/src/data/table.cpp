#include "fastdad/data/table.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace fastdad::data {

TaskKind TaskKind::multiclass(std::size_t classes) {
  if (classes < 3) throw std::invalid_argument("multiclass task needs at least 3 classes");
  return {Kind::Multiclass, classes};
}

TaskKind TaskKind::classification(std::size_t classes) {
  if (classes < 2) throw std::invalid_argument("classification needs at least 2 classes");
  return classes == 2 ? binary() : multiclass(classes);
}

std::string TaskKind::name() const {
  switch (kind) {
    case Kind::Regression: return "regression";
    case Kind::Binary: return "binary";
    case Kind::Multiclass: return "multiclass";
  }
  return "unknown";
}

TaskKind TaskKind::parse(const std::string& text, std::size_t n_classes) {
  if (text == "regression") return regression();
  if (text == "binary") {
    if (n_classes != 2) throw std::invalid_argument("binary task needs exactly 2 classes");
    return binary();
  }
  if (text == "multiclass") return multiclass(n_classes);
  if (text == "classification") return classification(n_classes);
  throw std::invalid_argument("unknown task kind: " + text);
}

ColumnKind ColumnKind::categorical(std::vector<std::string> categories) {
  if (categories.empty()) throw std::invalid_argument("categorical column needs >= 1 category");
  std::set<std::string> unique(categories.begin(), categories.end());
  if (unique.size() != categories.size()) {
    throw std::invalid_argument("categorical column has duplicate category names");
  }
  ColumnKind kind;
  kind.categorical_ = true;
  kind.categories_ = std::move(categories);
  return kind;
}

std::optional<std::size_t> ColumnKind::code_of(const std::string& name) const {
  for (std::size_t i = 0; i < categories_.size(); ++i) {
    if (categories_[i] == name) return i;
  }
  return std::nullopt;
}

Schema::Schema(std::vector<ColumnSpec> columns) : columns_(std::move(columns)) {
  std::set<std::string> names;
  for (const auto& c : columns_) {
    if (!names.insert(c.name).second) throw std::invalid_argument("duplicate column name: " + c.name);
  }
}

std::optional<std::size_t> Schema::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name == name) return i;
  }
  return std::nullopt;
}

void Schema::set_target(std::size_t column, TaskKind task) {
  if (column >= columns_.size()) throw std::invalid_argument("target index out of range");
  const ColumnKind& kind = columns_[column].kind;
  if (task.is_classification()) {
    if (!kind.is_categorical()) {
      throw std::invalid_argument("classification target must be categorical: " + columns_[column].name);
    }
    if (kind.cardinality() != task.n_classes) {
      throw std::invalid_argument("target cardinality does not match class count");
    }
  } else if (kind.is_categorical()) {
    throw std::invalid_argument("regression target must be numeric: " + columns_[column].name);
  }
  if (columns_.size() < 2) throw std::invalid_argument("schema needs at least one feature column");
  target_ = column;
  task_ = task;
}

std::vector<std::size_t> Schema::feature_columns() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (!target_ || *target_ != i) out.push_back(i);
  }
  return out;
}

std::size_t Schema::n_features() const { return columns_.size() - (target_ ? 1 : 0); }

std::uint64_t Schema::fingerprint() const {
  // FNV-1a over the canonical JSON form.
  const std::string text = to_json(*this).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

Table::Table(Schema schema, std::vector<std::vector<double>> columns)
    : schema_(std::move(schema)), columns_(std::move(columns)) {
  if (columns_.size() != schema_.n_columns()) {
    throw std::invalid_argument("column count does not match schema");
  }
  n_rows_ = columns_.empty() ? 0 : columns_.front().size();
  validate();
}

void Table::validate() const {
  if (columns_.size() != schema_.n_columns()) throw std::invalid_argument("column count mismatch");
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    if (columns_[c].size() != n_rows_) {
      throw std::invalid_argument("column '" + schema_.column(c).name + "' has wrong length");
    }
    const ColumnKind& kind = schema_.column(c).kind;
    if (!kind.is_categorical()) continue;
    const double card = static_cast<double>(kind.cardinality());
    for (double v : columns_[c]) {
      if (!(v >= 0.0 && v < card) || v != std::floor(v)) {
        throw std::invalid_argument("categorical code out of range in column '" +
                                    schema_.column(c).name + "'");
      }
    }
  }
}

Table Table::select_rows(std::span<const std::size_t> rows) const {
  std::vector<std::vector<double>> cols(columns_.size());
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    cols[c].reserve(rows.size());
    for (std::size_t r : rows) cols[c].push_back(columns_[c].at(r));
  }
  Table out;
  out.schema_ = schema_;
  out.columns_ = std::move(cols);
  out.n_rows_ = rows.size();
  return out;
}

void Table::append(const Table& other) {
  if (!(other.schema_.columns() == schema_.columns())) {
    throw std::invalid_argument("append: schema mismatch");
  }
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    columns_[c].insert(columns_[c].end(), other.columns_[c].begin(), other.columns_[c].end());
  }
  n_rows_ += other.n_rows_;
}

FeatureMatrix Table::features() const {
  FeatureMatrix fm;
  const auto cols = schema_.feature_columns();
  fm.n_rows = n_rows_;
  fm.n_cols = cols.size();
  fm.values.resize(fm.n_rows * fm.n_cols);
  for (std::size_t j = 0; j < cols.size(); ++j) {
    const auto& col = columns_[cols[j]];
    for (std::size_t r = 0; r < n_rows_; ++r) fm.values[r * fm.n_cols + j] = col[r];
    const ColumnKind& kind = schema_.column(cols[j]).kind;
    fm.cardinalities.push_back(kind.is_categorical() ? kind.cardinality() : 0);
  }
  return fm;
}

std::span<const double> Table::target_values() const {
  if (!schema_.target()) throw std::logic_error("table has no target column");
  return columns_[*schema_.target()];
}

std::vector<int> Table::target_classes() const {
  if (!schema_.task().is_classification()) throw std::logic_error("target is not a class label");
  std::vector<int> out;
  out.reserve(n_rows_);
  for (double v : target_values()) out.push_back(static_cast<int>(v));
  return out;
}

Table table_from_features(const Schema& schema, const FeatureMatrix& features,
                          std::span<const double> target) {
  const auto cols = schema.feature_columns();
  if (features.n_cols != cols.size()) throw std::invalid_argument("feature width does not match schema");
  std::vector<std::vector<double>> columns(schema.n_columns(),
                                           std::vector<double>(features.n_rows, 0.0));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    for (std::size_t r = 0; r < features.n_rows; ++r) columns[cols[j]][r] = features.at(r, j);
  }
  if (schema.target()) {
    if (!target.empty()) {
      if (target.size() != features.n_rows) throw std::invalid_argument("target length mismatch");
      columns[*schema.target()].assign(target.begin(), target.end());
    }
  }
  return Table(schema, std::move(columns));
}

nlohmann::json to_json(const Schema& schema) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : schema.columns()) {
    nlohmann::json jc{{"name", c.name}, {"kind", c.kind.is_categorical() ? "categorical" : "numeric"}};
    if (c.kind.is_categorical()) jc["categories"] = c.kind.categories();
    cols.push_back(std::move(jc));
  }
  nlohmann::json j{{"columns", std::move(cols)}};
  if (schema.target()) {
    j["target"] = *schema.target();
    j["task"] = schema.task().name();
    j["n_classes"] = schema.task().n_classes;
  } else {
    j["target"] = nullptr;
  }
  return j;
}

Schema schema_from_json(const nlohmann::json& j) {
  std::vector<ColumnSpec> cols;
  for (const auto& jc : j.at("columns")) {
    ColumnSpec spec{jc.at("name").get<std::string>(), ColumnKind::numeric()};
    if (jc.at("kind").get<std::string>() == "categorical") {
      spec.kind = ColumnKind::categorical(jc.at("categories").get<std::vector<std::string>>());
    }
    cols.push_back(std::move(spec));
  }
  Schema schema(std::move(cols));
  if (j.contains("target") && !j.at("target").is_null()) {
    schema.set_target(j.at("target").get<std::size_t>(),
                      TaskKind::parse(j.at("task").get<std::string>(), j.at("n_classes").get<std::size_t>()));
  }
  return schema;
}

nlohmann::json to_json(const Table& table) {
  nlohmann::json cols = nlohmann::json::array();
  for (std::size_t c = 0; c < table.n_columns(); ++c) {
    const auto col = table.column(c);
    if (table.schema().column(c).kind.is_categorical()) {
      std::vector<int> codes(col.begin(), col.end());
      cols.push_back(codes);
    } else {
      cols.push_back(std::vector<double>(col.begin(), col.end()));
    }
  }
  return {{"format", "fastdad.table"},
          {"version", 1},
          {"schema", to_json(table.schema())},
          {"n_rows", table.n_rows()},
          {"columns", std::move(cols)}};
}

Table table_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "fastdad.table") throw std::invalid_argument("not a table checkpoint");
  Schema schema = schema_from_json(j.at("schema"));
  std::vector<std::vector<double>> cols;
  for (const auto& jc : j.at("columns")) cols.push_back(jc.get<std::vector<double>>());
  Table t(std::move(schema), std::move(cols));
  if (t.n_rows() != j.at("n_rows").get<std::size_t>()) throw std::invalid_argument("row count mismatch");
  return t;
}

}  // namespace fastdad::data
