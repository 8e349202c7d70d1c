#pragma once

#include <string>
#include <vector>

#include "fastdad/data/model_space.hpp"
#include "fastdad/data/table.hpp"
#include "fastdad/density/model.hpp"
#include "fastdad/rng.hpp"

namespace fastdad::testing {

// All-numeric table with columns x0..x{d-1}, no target.
inline data::Table numeric_table(const std::vector<std::vector<double>>& columns) {
  std::vector<data::ColumnSpec> specs;
  for (std::size_t j = 0; j < columns.size(); ++j) {
    specs.push_back({"x" + std::to_string(j), data::ColumnKind::numeric()});
  }
  return data::Table(data::Schema(specs), columns);
}

// Model space over d numeric features with identity standardization.
inline data::ModelSpace identity_space(std::size_t d) {
  std::vector<data::ColumnSpec> specs;
  for (std::size_t j = 0; j < d; ++j) specs.push_back({"x" + std::to_string(j), data::ColumnKind::numeric()});
  return data::ModelSpace(data::Schema(specs), std::vector<data::ColumnStats>(d));
}

inline density::ModelConfig tiny_config(std::size_t K = 3) {
  density::ModelConfig c;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_hidden = 8;
  c.ffn_multiplier = 2;
  c.n_components = K;
  c.dropout = 0.0;
  return c;
}

// Tiny model whose parameters are all redrawn at a moderate scale so that
// every tensor carries non-trivial gradient.
inline density::DensityModel randomized_tiny_model(std::size_t d, std::size_t K, std::uint64_t seed,
                                                   double scale = 0.5) {
  density::DensityModel m(tiny_config(K), identity_space(d), seed);
  Rng rng = make_stream(seed, {99});
  std::normal_distribution<double> dist(0.0, scale);
  for (double& p : m.mutable_parameters()) p = dist(rng);
  return m;
}

inline std::vector<double> random_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng = make_stream(seed, {7});
  std::vector<double> out(n * d);
  for (double& v : out) v = standard_normal(rng);
  return out;
}

}  // namespace fastdad::testing
