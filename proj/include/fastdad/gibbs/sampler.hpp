#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fastdad/data/table.hpp"
#include "fastdad/density/mixture.hpp"
#include "fastdad/density/model.hpp"
#include "fastdad/rng.hpp"

namespace fastdad::gibbs {

struct GibbsConfig {
  int rounds = 1;
  std::size_t target_count = 0;  // 0: default_target_count(n)
  std::uint64_t seed = 0;
};

// min(10 n, 10^6)
std::size_t default_target_count(std::size_t n_rows);

struct ChainState {
  std::vector<double> current;  // model space
  std::size_t origin_row = 0;
  std::size_t replica = 0;
  std::uint64_t seed = 0;  // with (origin_row, replica, round) keys the round streams
  int rounds_done = 0;
  Rng rng;
  std::vector<std::size_t> order;  // feature order of the next round
};

// Chain seeded at row `row` of `train`: dequantized and standardized, with
// its own stream and a random initial feature order.
ChainState start_chain(const density::DensityModel& model, const data::Table& train, std::size_t row,
                       std::size_t replica, std::uint64_t seed);
// Chain seeded at an arbitrary model-space point.
ChainState start_chain_at(std::span<const double> point, std::size_t origin_row, std::size_t replica,
                          std::uint64_t seed);

double sample_mixture(const density::MixtureParams& params, Rng& rng);

// Resamples coordinate i from its learned conditional.
void gibbs_step(const density::DensityModel& model, ChainState& chain, std::size_t i);
// One pass over chain.order, then a fresh order for the next round.
void gibbs_round(const density::DensityModel& model, ChainState& chain);

// Runs every chain for `rounds` rounds. Chains that share a masked feature
// at the same step are evaluated as one batch; the result is identical to
// calling gibbs_round on each chain in turn.
void run_chains(const density::DensityModel& model, std::span<ChainState> chains, int rounds);

struct Provenance {
  std::size_t origin_row = 0;
  int rounds = 0;
  bool operator==(const Provenance&) const = default;
};

// Synthetic feature rows in table space (destandardized numerics,
// requantized categoricals), laid out as the schema's feature columns.
struct AugmentedSet {
  data::Schema schema;
  data::FeatureMatrix features;
  std::vector<Provenance> provenance;

  std::size_t size() const { return features.n_rows; }
  // Full-schema table; the target column is filled from `target` or zeros.
  data::Table to_table(std::span<const double> target = {}) const;
  nlohmann::json provenance_json() const;
};

// Identity-sampler copies of a table's feature rows (no provenance rounds).
AugmentedSet as_augmented(const data::Table& table);

// ceil(m/n) replica chains per training row, each run for exactly k rounds;
// over-provisioned chains are subsampled uniformly to exactly m.
AugmentedSet generate(const density::DensityModel& model, const data::Table& train,
                      const GibbsConfig& config);

// Maps final chain states back to table space.
AugmentedSet collect(const density::DensityModel& model, std::span<const ChainState> chains);

// Mean Euclidean distance, in the metric embedding, between each sample and
// the training row its chain started from.
double diffusion_of(const AugmentedSet& aug, const data::Table& train, const data::ModelSpace& space);

}  // namespace fastdad::gibbs
