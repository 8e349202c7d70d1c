#pragma once

#include <iosfwd>

#include "fastdad/bench/config.hpp"
#include "fastdad/bench/report.hpp"
#include "fastdad/learn/learner.hpp"

namespace fastdad::bench {

struct RunOptions {
  std::ostream* log = nullptr;  // progress lines
};

struct ExperimentResult {
  RunReport report;
  TimingReport timing;
};

// Per seed: 90/10 train/validation split of the pool, stacked teacher,
// density model (only when a GIB strategy is requested), one training set
// per strategy, every student on every set, Selected student per strategy
// by validation metric, then a single test evaluation per cell. Cells run
// on FASTDAD_THREADS workers; a failing cell is recorded, never imputed.
ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

// Median over repetitions of rows / seconds for one full predict pass,
// after one warm-up pass.
double measure_latency(const learn::Learner& model, const data::FeatureMatrix& rows, std::size_t repetitions);
double measure_latency(const learn::Learner& model, const data::Table& rows, std::size_t repetitions);

// `rows` repeated cyclically up to n rows.
data::FeatureMatrix tile_rows(const data::FeatureMatrix& rows, std::size_t n);

}  // namespace fastdad::bench
