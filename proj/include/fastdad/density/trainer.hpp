#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "fastdad/data/table.hpp"
#include "fastdad/density/model.hpp"

namespace fastdad::density {

struct FitOptions {
  std::size_t max_epochs = 200;
  std::size_t patience = 20;
  std::ostream* log = nullptr;                      // one line per epoch
  std::optional<std::filesystem::path> json_log;   // epoch history as JSON
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_pseudolikelihood = 0.0;
};

struct FitResult {
  DensityModel model;  // best-validation parameters
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
};

// Pseudolikelihood training with Adam: rows reshuffled every epoch, one
// uniformly drawn masked feature per mini-batch, categorical features
// re-dequantized every epoch. Keeps the parameters with the best mean
// validation pseudolikelihood; stops at max_epochs or after `patience`
// epochs without improvement. Pure function of (data, config, seed).
FitResult fit(const data::Table& train, const data::Table& val, const ModelConfig& config,
              std::uint64_t seed, const FitOptions& options = {});

// Encodes every row of `table` into the model space of `space`.
std::vector<double> encode_rows(const data::ModelSpace& space, const data::Table& table, Rng& rng);

}  // namespace fastdad::density
