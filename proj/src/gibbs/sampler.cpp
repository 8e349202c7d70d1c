#include "fastdad/gibbs/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fastdad::gibbs {

namespace {

constexpr std::uint64_t kChainKey = 0x61BB5ULL;
constexpr std::uint64_t kSubsampleKey = 0x5B5A3ULL;
constexpr std::size_t kChunk = 512;

Rng round_stream(const ChainState& c, std::uint64_t round) {
  return make_stream(c.seed, {kChainKey, c.origin_row, c.replica, round});
}

std::vector<std::size_t> random_order(std::size_t d, Rng& rng) {
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

void check_schema(const density::DensityModel& model, const data::Table& train) {
  if (model.space().schema().fingerprint() != train.schema().fingerprint()) {
    throw std::invalid_argument("density model was fit on a different schema");
  }
}

}  // namespace

std::size_t default_target_count(std::size_t n_rows) {
  return std::min<std::size_t>(10 * n_rows, 1000000);
}

ChainState start_chain_at(std::span<const double> point, std::size_t origin_row, std::size_t replica,
                          std::uint64_t seed) {
  ChainState c;
  c.current.assign(point.begin(), point.end());
  c.origin_row = origin_row;
  c.replica = replica;
  c.seed = seed;
  c.rng = round_stream(c, 0);
  c.order = random_order(c.current.size(), c.rng);
  return c;
}

ChainState start_chain(const density::DensityModel& model, const data::Table& train, std::size_t row,
                       std::size_t replica, std::uint64_t seed) {
  if (row >= train.n_rows()) throw std::out_of_range("chain origin row out of range");
  ChainState c;
  c.origin_row = row;
  c.replica = replica;
  c.seed = seed;
  c.rng = round_stream(c, 0);
  c.current.resize(model.dim());
  model.space().encode(train, row, c.rng, c.current);
  c.order = random_order(c.current.size(), c.rng);
  return c;
}

double sample_mixture(const density::MixtureParams& params, Rng& rng) {
  const double u = uniform01(rng);
  std::size_t k = 0;
  double acc = params.weights[0];
  while (k + 1 < params.size() && u >= acc) acc += params.weights[++k];
  return params.means[k] + params.stds[k] * standard_normal(rng);
}

void gibbs_step(const density::DensityModel& model, ChainState& chain, std::size_t i) {
  if (chain.current.size() != model.dim()) throw std::invalid_argument("chain dimension does not match model");
  const auto p = model.forward_conditionals(chain.current, i);
  chain.current[i] = sample_mixture(p[0], chain.rng);
}

void gibbs_round(const density::DensityModel& model, ChainState& chain) {
  chain.rng = round_stream(chain, static_cast<std::uint64_t>(chain.rounds_done) + 1);
  for (std::size_t i : chain.order) gibbs_step(model, chain, i);
  chain.order = random_order(chain.current.size(), chain.rng);
  ++chain.rounds_done;
}

void run_chains(const density::DensityModel& model, std::span<ChainState> chains, int rounds) {
  if (rounds < 0) throw std::invalid_argument("rounds must be non-negative");
  const std::size_t d = model.dim();
  for (const auto& c : chains) {
    if (c.current.size() != d) throw std::invalid_argument("chain dimension does not match model");
  }
  std::vector<std::vector<std::size_t>> by_feature(d);
  std::vector<double> batch;
  for (int r = 0; r < rounds; ++r) {
    for (auto& c : chains) c.rng = round_stream(c, static_cast<std::uint64_t>(c.rounds_done) + 1);
    for (std::size_t t = 0; t < d; ++t) {
      for (auto& g : by_feature) g.clear();
      for (std::size_t c = 0; c < chains.size(); ++c) by_feature[chains[c].order[t]].push_back(c);
      for (std::size_t f = 0; f < d; ++f) {
        const auto& ids = by_feature[f];
        for (std::size_t start = 0; start < ids.size(); start += kChunk) {
          const std::size_t len = std::min(kChunk, ids.size() - start);
          batch.resize(len * d);
          for (std::size_t b = 0; b < len; ++b) {
            std::copy(chains[ids[start + b]].current.begin(), chains[ids[start + b]].current.end(),
                      batch.begin() + static_cast<std::ptrdiff_t>(b * d));
          }
          const auto params = model.forward_conditionals(batch, f);
          for (std::size_t b = 0; b < len; ++b) {
            auto& c = chains[ids[start + b]];
            c.current[f] = sample_mixture(params[b], c.rng);
          }
        }
      }
    }
    for (auto& c : chains) {
      c.order = random_order(d, c.rng);
      ++c.rounds_done;
    }
  }
}

data::Table AugmentedSet::to_table(std::span<const double> target) const {
  return data::table_from_features(schema, features, target);
}

nlohmann::json AugmentedSet::provenance_json() const {
  std::vector<std::size_t> origin;
  std::vector<int> rounds;
  for (const auto& p : provenance) {
    origin.push_back(p.origin_row);
    rounds.push_back(p.rounds);
  }
  return {{"format", "fastdad.provenance"}, {"version", 1}, {"origin_row", origin}, {"rounds", rounds}};
}

AugmentedSet as_augmented(const data::Table& table) {
  AugmentedSet out;
  out.schema = table.schema();
  out.features = table.features();
  for (std::size_t r = 0; r < table.n_rows(); ++r) out.provenance.push_back({r, 0});
  return out;
}

AugmentedSet collect(const density::DensityModel& model, std::span<const ChainState> chains) {
  const std::size_t d = model.dim();
  AugmentedSet out;
  out.schema = model.space().schema();
  out.features.n_rows = chains.size();
  out.features.n_cols = d;
  out.features.values.resize(chains.size() * d);
  for (std::size_t j = 0; j < d; ++j) out.features.cardinalities.push_back(model.space().cardinality(j));
  for (std::size_t c = 0; c < chains.size(); ++c) {
    model.space().decode(chains[c].current,
                         std::span<double>(out.features.values.data() + c * d, d));
    out.provenance.push_back({chains[c].origin_row, chains[c].rounds_done});
  }
  return out;
}

AugmentedSet generate(const density::DensityModel& model, const data::Table& train,
                      const GibbsConfig& config) {
  if (config.rounds < 0) throw std::invalid_argument("rounds must be non-negative");
  const std::size_t n = train.n_rows();
  if (n == 0) throw std::invalid_argument("cannot sample from an empty table");
  check_schema(model, train);
  const std::size_t m = config.target_count == 0 ? default_target_count(n) : config.target_count;
  const std::size_t replicas = (m + n - 1) / n;
  const std::size_t total = n * replicas;

  std::vector<std::size_t> ids(total);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  if (total > m) {
    Rng rng = make_stream(config.seed, {kSubsampleKey});
    for (std::size_t i = 0; i < m; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, total - 1);
      std::swap(ids[i], ids[pick(rng)]);
    }
    ids.resize(m);
    std::sort(ids.begin(), ids.end());
  }

  std::vector<ChainState> chains;
  chains.reserve(ids.size());
  for (std::size_t id : ids) chains.push_back(start_chain(model, train, id / replicas, id % replicas, config.seed));
  run_chains(model, chains, config.rounds);
  AugmentedSet out = collect(model, chains);
  if (config.rounds == 0) {
    // Untouched chains: return the training cells themselves rather than
    // their standardize/destandardize round trip.
    const auto feats = train.schema().feature_columns();
    for (std::size_t c = 0; c < chains.size(); ++c)
      for (std::size_t j = 0; j < feats.size(); ++j)
        out.features.values[c * feats.size() + j] = train.at(chains[c].origin_row, feats[j]);
  }
  return out;
}

double diffusion_of(const AugmentedSet& aug, const data::Table& train, const data::ModelSpace& space) {
  if (aug.provenance.size() != aug.size() || aug.size() == 0) {
    throw std::invalid_argument("diffusion needs per-row provenance");
  }
  const std::size_t d = space.dim();
  std::vector<double> a(d), b(d);
  double total = 0.0;
  for (std::size_t r = 0; r < aug.size(); ++r) {
    const std::size_t origin = aug.provenance[r].origin_row;
    if (origin >= train.n_rows()) throw std::out_of_range("provenance row out of range");
    space.embed_cells(aug.features.row(r), a);
    space.embed(train, origin, b);
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) sq += (a[j] - b[j]) * (a[j] - b[j]);
    total += std::sqrt(sq);
  }
  return total / static_cast<double>(aug.size());
}

}  // namespace fastdad::gibbs
