#include "fastdad/data/transform.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace fastdad::data {

namespace {

std::size_t train_count(std::size_t n, double fraction) {
  const auto raw = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  return std::clamp<std::size_t>(raw, 1, n - 1);
}

}  // namespace

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(const Table& table,
                                                                            const SplitSpec& spec) {
  const std::size_t n = table.n_rows();
  if (n < 2) throw std::invalid_argument("split needs at least 2 rows");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw std::invalid_argument("train_fraction must lie in (0, 1)");
  }
  const std::size_t n_train = train_count(n, spec.train_fraction);
  Rng rng = make_stream(spec.seed, {0x5EED5B11ULL});
  std::vector<char> in_train(n, 0);

  std::map<int, std::vector<std::size_t>> by_class;
  bool stratify = false;
  if (table.schema().target() && table.schema().task().is_classification()) {
    for (std::size_t r = 0; r < n; ++r) by_class[table.code(r, *table.schema().target())].push_back(r);
    stratify = std::all_of(by_class.begin(), by_class.end(),
                           [](const auto& kv) { return kv.second.size() >= 2; });
  }

  if (stratify) {
    // Largest-remainder allocation of the training quota across classes,
    // keeping at least one row of every class on each side.
    std::vector<std::size_t> quota;
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0, k = 0;
    for (const auto& [cls, rows] : by_class) {
      const double exact = spec.train_fraction * static_cast<double>(rows.size());
      std::size_t q = std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(exact)), 1,
                                              rows.size() - 1);
      quota.push_back(q);
      remainders.emplace_back(exact - std::floor(exact), k++);
      assigned += q;
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    auto it_rows = by_class.begin();
    std::vector<std::size_t> capacity;
    for (; it_rows != by_class.end(); ++it_rows) capacity.push_back(it_rows->second.size() - 1);
    for (std::size_t pass = 0; assigned < n_train && pass < 2 * n; ++pass) {
      bool progressed = false;
      for (const auto& [rem, idx] : remainders) {
        if (assigned >= n_train) break;
        if (quota[idx] < capacity[idx]) {
          ++quota[idx];
          ++assigned;
          progressed = true;
        }
      }
      if (!progressed) break;
    }
    for (std::size_t pass = 0; assigned > n_train && pass < 2 * n; ++pass) {
      bool progressed = false;
      for (auto it = remainders.rbegin(); it != remainders.rend() && assigned > n_train; ++it) {
        if (quota[it->second] > 1) {
          --quota[it->second];
          --assigned;
          progressed = true;
        }
      }
      if (!progressed) break;
    }
    k = 0;
    for (auto& [cls, rows] : by_class) {
      std::shuffle(rows.begin(), rows.end(), rng);
      for (std::size_t j = 0; j < quota[k]; ++j) in_train[rows[j]] = 1;
      ++k;
    }
  } else {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t j = 0; j < n_train; ++j) in_train[perm[j]] = 1;
  }

  std::vector<std::size_t> train, val;
  for (std::size_t r = 0; r < n; ++r) (in_train[r] ? train : val).push_back(r);
  return {std::move(train), std::move(val)};
}

std::pair<Table, Table> split_train_val(const Table& table, const SplitSpec& spec) {
  auto [train, val] = split_indices(table, spec);
  return {table.select_rows(train), table.select_rows(val)};
}

StandardizationStats fit_standardization(const Table& table) {
  StandardizationStats stats;
  for (std::size_t c = 0; c < table.n_columns(); ++c) {
    ColumnStats cs;
    if (table.schema().column(c).kind.is_categorical()) {
      cs.categorical = true;
    } else if (table.n_rows() > 0) {
      const auto col = table.column(c);
      const double n = static_cast<double>(col.size());
      const double mean = std::accumulate(col.begin(), col.end(), 0.0) / n;
      double ss = 0.0;
      for (double v : col) ss += (v - mean) * (v - mean);
      const double sd = std::sqrt(ss / n);
      cs.mean = mean;
      // Constant columns: keep std = 1 so standardization is a pure shift.
      cs.std = (sd > 1e-12 * std::max(1.0, std::abs(mean))) ? sd : 1.0;
    }
    stats.columns.push_back(cs);
  }
  return stats;
}

Table apply_standardization(const Table& table, const StandardizationStats& stats) {
  if (stats.columns.size() != table.n_columns()) throw std::invalid_argument("stats/table width mismatch");
  Table out = table;
  for (std::size_t c = 0; c < table.n_columns(); ++c) {
    const ColumnStats& cs = stats.columns[c];
    if (cs.categorical) continue;
    for (double& v : out.mutable_column(c)) v = (v - cs.mean) / cs.std;
  }
  return out;
}

std::pair<Table, StandardizationStats> standardize(const Table& table) {
  StandardizationStats stats = fit_standardization(table);
  return {apply_standardization(table, stats), stats};
}

Table destandardize(const Table& table, const StandardizationStats& stats) {
  if (stats.columns.size() != table.n_columns()) throw std::invalid_argument("stats/table width mismatch");
  Table out = table;
  for (std::size_t c = 0; c < table.n_columns(); ++c) {
    const ColumnStats& cs = stats.columns[c];
    if (cs.categorical) continue;
    for (double& v : out.mutable_column(c)) v = v * cs.std + cs.mean;
  }
  return out;
}

double dequantize(int code, std::size_t cardinality, Rng& rng) {
  if (code < 0 || static_cast<std::size_t>(code) >= cardinality) {
    throw std::invalid_argument("dequantize: code out of range");
  }
  double u = uniform01(rng);
  if (u >= 1.0) u = std::nextafter(1.0, 0.0);
  return static_cast<double>(code) + u;
}

int requantize(double value, std::size_t cardinality) {
  if (cardinality < 1) throw std::invalid_argument("requantize: cardinality must be >= 1");
  const double hi = static_cast<double>(cardinality - 1);
  if (!(value >= 0.0)) return 0;  // also catches NaN
  return static_cast<int>(std::min(std::floor(value), hi));
}

nlohmann::json to_json(const StandardizationStats& stats) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : stats.columns) {
    if (c.categorical) {
      cols.push_back({{"dequantized", true}});
    } else {
      cols.push_back({{"mean", c.mean}, {"std", c.std}});
    }
  }
  return cols;
}

StandardizationStats standardization_from_json(const nlohmann::json& j) {
  StandardizationStats stats;
  for (const auto& jc : j) {
    ColumnStats c;
    if (jc.value("dequantized", false)) {
      c.categorical = true;
    } else {
      c.mean = jc.at("mean").get<double>();
      c.std = jc.at("std").get<double>();
    }
    stats.columns.push_back(c);
  }
  return stats;
}

}  // namespace fastdad::data
