#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace fastdad::bench {

// Metrics are percentages: accuracy * 100 or R^2 * 100.
struct CellResult {
  std::string strategy;
  std::string student;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double val_metric = 0.0;
  double test_metric = 0.0;
  std::size_t parameter_count = 0;
  std::size_t train_rows = 0;
  nlohmann::json detail = nlohmann::json::object();  // e.g. chosen MUNGE parameters

  bool operator==(const CellResult&) const = default;
};

struct SelectedResult {
  std::string strategy;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string student;
  double val_metric = 0.0;
  double test_metric = 0.0;

  bool operator==(const SelectedResult&) const = default;
};

struct TeacherResult {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double val_metric = 0.0;
  double test_metric = 0.0;
  std::vector<double> blend_weights;

  bool operator==(const TeacherResult&) const = default;
};

struct SummaryRow {
  std::string strategy;
  std::string student;  // a learner kind or "selected"
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n_ok = 0;
  std::size_t n_failed = 0;

  bool operator==(const SummaryRow&) const = default;
};

struct RankRow {
  std::string strategy;
  double average_rank = 0.0;
  std::size_t n_seeds = 0;
  // One-sided signed-rank p-value for "Selected(strategy) >= Selected(BASE)".
  std::optional<double> p_vs_base;

  bool operator==(const RankRow&) const = default;
};

struct RunReport {
  nlohmann::json config;
  nlohmann::json input_hash;
  nlohmann::json dataset;  // name, task, row counts
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> strategies;
  std::vector<std::string> students;
  std::size_t density_fits = 0;
  std::vector<TeacherResult> teacher;
  std::vector<CellResult> cells;
  std::vector<SelectedResult> selected;
  std::vector<SummaryRow> summary;
  std::vector<RankRow> ranks;

  bool operator==(const RunReport&) const = default;
};

struct LatencyRecord {
  std::string strategy;  // "TEACHER" for the ensemble
  std::string student;
  std::uint64_t seed = 0;
  double rows_per_second = 0.0;
};

// Wall-clock measurements, kept apart from the deterministic report.
struct TimingReport {
  std::size_t rows = 0;
  std::size_t repetitions = 0;
  std::vector<LatencyRecord> records;
};

nlohmann::json to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TimingReport& timing);

// Fills summary and ranks from teacher/cells/selected.
void aggregate(RunReport& report);

// One row per (strategy, student) plus a "selected" row per strategy; one
// column per seed, then mean and stderr. Two decimals; failures read FAILED.
std::string results_csv(const RunReport& report);

// Writes report.json, results.csv and, when given, timing.json into `dir`.
void emit_report(const RunReport& report, const TimingReport* timing, const std::filesystem::path& dir);

// SHA-1 of "blob <size>\0" + bytes, as git hashes file contents.
std::string git_blob_hash(std::string_view bytes);
std::string git_blob_hash_file(const std::filesystem::path& path);

}  // namespace fastdad::bench
