#include "fastdad/data/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace fastdad::data {

namespace {

std::vector<std::string> split_record(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(std::move(cur));
  for (auto& f : fields) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return fields;
}

std::optional<double> parse_real(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const char* first = s.data();
  if (*first == '+') ++first;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> cells;  // column-major
  std::size_t n_rows = 0;
};

RawTable read_raw(std::istream& in) {
  RawTable raw;
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header) {
      if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
      if (line.empty()) continue;
      raw.header = split_record(line);
      raw.cells.resize(raw.header.size());
      have_header = true;
      continue;
    }
    if (line.empty()) continue;
    auto fields = split_record(line);
    if (fields.size() != raw.header.size()) {
      throw std::runtime_error("ragged row at line " + std::to_string(line_no) + ": expected " +
                               std::to_string(raw.header.size()) + " fields, got " +
                               std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (fields[c].empty()) {
        throw std::runtime_error("missing value at line " + std::to_string(line_no) + ", column '" +
                                 raw.header[c] + "'");
      }
      raw.cells[c].push_back(std::move(fields[c]));
    }
    ++raw.n_rows;
  }
  if (!have_header) throw std::runtime_error("empty table: no header row");
  if (raw.n_rows == 0) throw std::runtime_error("empty table");
  return raw;
}

std::vector<std::string> ordered_categories(const std::vector<std::string>& cells, const ColumnHint* hint) {
  if (hint && !hint->categories.empty()) return hint->categories;
  std::vector<std::string> cats;
  for (const auto& s : cells) {
    if (std::find(cats.begin(), cats.end(), s) == cats.end()) cats.push_back(s);
  }
  if (hint && hint->sort_categories) {
    std::stable_sort(cats.begin(), cats.end(), [](const std::string& a, const std::string& b) {
      const auto va = parse_real(a), vb = parse_real(b);
      if (va && vb) return *va < *vb;
      if (va != vb) return va.has_value();
      return a < b;
    });
  }
  return cats;
}

std::vector<double> encode_categorical(const std::vector<std::string>& cells, const ColumnKind& kind,
                                       const std::string& name, const ColumnHint* hint) {
  std::vector<double> out;
  out.reserve(cells.size());
  for (const auto& s : cells) {
    if (auto code = kind.code_of(s)) {
      out.push_back(static_cast<double>(*code));
    } else if (hint && hint->map_unseen_to_last) {
      out.push_back(static_cast<double>(kind.cardinality() - 1));
    } else {
      throw std::runtime_error("unseen category '" + s + "' in column '" + name + "'");
    }
  }
  return out;
}

const ColumnHint* find_hint(const SchemaHints& hints, const std::string& name) {
  auto it = hints.find(name);
  return it == hints.end() ? nullptr : &it->second;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read file: " + path.string());
  return in;
}

std::string format_real(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

}  // namespace

Table read_csv(std::istream& in, const SchemaHints& hints) {
  RawTable raw = read_raw(in);
  std::vector<ColumnSpec> specs;
  std::vector<std::vector<double>> columns;
  for (std::size_t c = 0; c < raw.header.size(); ++c) {
    const std::string& name = raw.header[c];
    const ColumnHint* hint = find_hint(hints, name);
    std::vector<double> numeric;
    bool is_numeric = !(hint && hint->categorical.value_or(false));
    if (is_numeric) {
      numeric.reserve(raw.n_rows);
      for (const auto& s : raw.cells[c]) {
        auto v = parse_real(s);
        if (!v) {
          is_numeric = false;
          break;
        }
        numeric.push_back(*v);
      }
      if (!is_numeric && hint && hint->categorical.has_value() && !*hint->categorical) {
        throw std::runtime_error("column '" + name + "' was declared numeric but has non-numeric cells");
      }
    }
    if (is_numeric) {
      specs.push_back({name, ColumnKind::numeric()});
      columns.push_back(std::move(numeric));
    } else {
      ColumnKind kind = ColumnKind::categorical(ordered_categories(raw.cells[c], hint));
      columns.push_back(encode_categorical(raw.cells[c], kind, name, hint));
      specs.push_back({name, std::move(kind)});
    }
  }
  return Table(Schema(std::move(specs)), std::move(columns));
}

Table load_csv(const std::filesystem::path& path, const SchemaHints& hints) {
  auto in = open_input(path);
  return read_csv(in, hints);
}

Table read_csv_with_schema(std::istream& in, const Schema& schema, const SchemaHints& hints) {
  RawTable raw = read_raw(in);
  std::vector<std::vector<double>> columns(schema.n_columns());
  for (std::size_t c = 0; c < schema.n_columns(); ++c) {
    const ColumnSpec& spec = schema.column(c);
    auto it = std::find(raw.header.begin(), raw.header.end(), spec.name);
    if (it == raw.header.end()) {
      // A file without the target column is accepted (unlabeled rows).
      if (schema.target() && *schema.target() == c) {
        columns[c].assign(raw.n_rows, 0.0);
        continue;
      }
      throw std::runtime_error("column '" + spec.name + "' missing from file");
    }
    const auto& cells = raw.cells[static_cast<std::size_t>(it - raw.header.begin())];
    if (spec.kind.is_categorical()) {
      columns[c] = encode_categorical(cells, spec.kind, spec.name, find_hint(hints, spec.name));
    } else {
      columns[c].reserve(raw.n_rows);
      for (const auto& s : cells) {
        auto v = parse_real(s);
        if (!v) throw std::runtime_error("non-numeric value '" + s + "' in column '" + spec.name + "'");
        columns[c].push_back(*v);
      }
    }
  }
  return Table(schema, std::move(columns));
}

Table load_csv_with_schema(const std::filesystem::path& path, const Schema& schema,
                           const SchemaHints& hints) {
  auto in = open_input(path);
  return read_csv_with_schema(in, schema, hints);
}

void write_csv(const Table& table, std::ostream& out) {
  const Schema& schema = table.schema();
  for (std::size_t c = 0; c < schema.n_columns(); ++c) {
    if (c) out << ',';
    out << quote_if_needed(schema.column(c).name);
  }
  out << '\n';
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    for (std::size_t c = 0; c < schema.n_columns(); ++c) {
      if (c) out << ',';
      const ColumnKind& kind = schema.column(c).kind;
      if (kind.is_categorical()) {
        out << quote_if_needed(kind.categories()[static_cast<std::size_t>(table.code(r, c))]);
      } else {
        out << format_real(table.at(r, c));
      }
    }
    out << '\n';
  }
}

void save_csv(const Table& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  write_csv(table, out);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace fastdad::data
