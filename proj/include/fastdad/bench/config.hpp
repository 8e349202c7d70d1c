#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fastdad/augment/strategies.hpp"
#include "fastdad/data/table.hpp"
#include "fastdad/learn/stack.hpp"

namespace fastdad::bench {

struct StrategySpec {
  enum class Kind { Base, Know, Munge, Hunge, Gib };
  Kind kind = Kind::Base;
  int rounds = 0;  // Gibbs rounds for Gib

  std::string name() const;  // BASE, KNOW, MUNGE, HUNGE, GIB-<k>
  static StrategySpec parse(const std::string& text);
  bool augments() const { return kind == Kind::Munge || kind == Kind::Hunge || kind == Kind::Gib; }
  bool operator==(const StrategySpec&) const = default;
};

struct LatencyOptions {
  bool enabled = true;
  std::size_t rows = 10000;
  std::size_t repetitions = 5;
};

// Everything a benchmark run depends on. `dataset` is a built-in name
// (spiral, checkerboard, linear) or a CSV path.
struct ExperimentConfig {
  std::string dataset = "checkerboard";
  std::size_t dataset_rows = 1000;  // built-in: rows before the train/val split
  std::size_t test_rows = 2000;     // built-in: independent test rows
  std::uint64_t data_seed = 0;
  std::string target;               // CSV: target column (default: last)
  std::string task;                 // CSV: regression/binary/multiclass, inferred when empty
  std::string test_path;            // CSV: separate test file
  double test_fraction = 0.2;       // CSV without test file

  std::vector<StrategySpec> strategies;
  std::vector<std::string> students{"mlp", "forest", "gbm"};
  std::size_t multiplier = 10;
  std::size_t max_augmented = 1000000;
  std::vector<std::uint64_t> seeds{0};

  learn::StackEnsembleConfig teacher;  // teacher.base also trains the students
  nlohmann::json density = nlohmann::json::object();  // model config overrides
  std::size_t density_epochs = 200;
  std::size_t density_patience = 20;
  augment::KnowParams know;
  LatencyOptions latency;

  bool needs_density_model() const;
  bool is_builtin() const;
  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  // Reads JSON; relative data paths are resolved against the file's directory.
  static ExperimentConfig load(const std::filesystem::path& path);
};

struct Dataset {
  data::Table pool;  // split per seed into train and validation
  data::Table test;
};

Dataset load_dataset(const ExperimentConfig& config);

// CSV with its target attached: `target` defaults to the last column and
// `task` (regression, binary, multiclass) is inferred when empty. A
// classification task reads the target column as categories.
data::Table load_labeled_csv(const std::string& path, const std::string& target = {},
                             const std::string& task = {});

}  // namespace fastdad::bench
