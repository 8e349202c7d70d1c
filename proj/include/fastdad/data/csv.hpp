#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fastdad/data/table.hpp"

namespace fastdad::data {

struct ColumnHint {
  std::optional<bool> categorical;       // override kind inference
  std::vector<std::string> categories;   // fixed code order, if given
  bool sort_categories = false;          // numeric-aware sort instead of first appearance
  bool map_unseen_to_last = false;       // unseen names map to code cardinality-1
};

using SchemaHints = std::map<std::string, ColumnHint>;

// Header row required; kinds are inferred per column: Numeric when every cell
// parses as a real number, Categorical otherwise with codes in order of first
// appearance. Empty cells are rejected.
Table read_csv(std::istream& in, const SchemaHints& hints = {});
Table load_csv(const std::filesystem::path& path, const SchemaHints& hints = {});

// Parses rows against an existing schema (e.g. a test file for a trained
// model). Unknown categories are an error unless hinted map_unseen_to_last.
Table read_csv_with_schema(std::istream& in, const Schema& schema, const SchemaHints& hints = {});
Table load_csv_with_schema(const std::filesystem::path& path, const Schema& schema,
                           const SchemaHints& hints = {});

void write_csv(const Table& table, std::ostream& out);
void save_csv(const Table& table, const std::filesystem::path& path);

}  // namespace fastdad::data
