#include "fastdad/diagnostics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fastdad/parallel.hpp"
#include "fastdad/simd/kernels.hpp"

namespace fastdad::diagnostics {

PointSet::PointSet(std::size_t rows, std::size_t d, std::vector<double> v)
    : n(rows), dim(d), values(std::move(v)) {
  if (values.size() != n * dim) throw std::invalid_argument("point set size mismatch");
}

PointSet embed(const data::Table& table, const data::ModelSpace& space) {
  if (table.schema().fingerprint() != space.schema().fingerprint()) {
    throw std::invalid_argument("table schema differs from the model space");
  }
  return PointSet(table.n_rows(), space.dim(), space.embed_all(table));
}

PointSet embed(const gibbs::AugmentedSet& samples, const data::ModelSpace& space) {
  if (samples.features.n_cols != space.dim()) throw std::invalid_argument("sample width differs from the model space");
  const std::size_t d = space.dim();
  std::vector<double> out(samples.size() * d);
  for (std::size_t r = 0; r < samples.size(); ++r) {
    space.embed_cells(samples.features.row(r), std::span<double>(out.data() + r * d, d));
  }
  return PointSet(samples.size(), d, std::move(out));
}

void MmdConfig::validate() const {
  if (bandwidths.empty()) throw std::invalid_argument("at least one bandwidth is required");
  for (double s : bandwidths) {
    if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("bandwidths must be positive");
  }
}

namespace {

std::vector<double> exponent_scales(const MmdConfig& config) {
  config.validate();
  std::vector<double> c;
  for (double s : config.bandwidths) c.push_back(-1.0 / (2.0 * s * s));
  return c;
}

double kernel_from_sq(double sq, std::span<const double> scales) {
  double k = 0.0;
  for (double c : scales) k += std::exp(c * sq);
  return k;
}

// Mean kernel value over all (a, b) pairs; blocks of rows of `a` are summed
// independently and combined in order.
double mean_kernel(const PointSet& a, const PointSet& b, std::span<const double> scales) {
  constexpr std::size_t block = 64;
  const std::size_t n_blocks = (a.n + block - 1) / block;
  std::vector<double> partial(n_blocks, 0.0);
  parallel_for(n_blocks, [&](std::size_t blk) {
    double s = 0.0;
    const std::size_t end = std::min(a.n, (blk + 1) * block);
    for (std::size_t i = blk * block; i < end; ++i) {
      const auto ai = a.row(i);
      for (std::size_t j = 0; j < b.n; ++j) s += kernel_from_sq(simd::squared_distance(ai, b.row(j)), scales);
    }
    partial[blk] = s;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total / (static_cast<double>(a.n) * static_cast<double>(b.n));
}

void check_pair(const PointSet& x, const PointSet& y) {
  if (x.n == 0 || y.n == 0) throw std::invalid_argument("mmd needs non-empty samples");
  if (x.dim != y.dim) throw std::invalid_argument("mmd samples differ in dimension");
}

}  // namespace

double mixture_kernel(std::span<const double> a, std::span<const double> b, const MmdConfig& config) {
  const auto scales = exponent_scales(config);
  return kernel_from_sq(simd::squared_distance(a, b), scales);
}

double mmd_squared(const PointSet& x, const PointSet& y, const MmdConfig& config) {
  check_pair(x, y);
  const auto scales = exponent_scales(config);
  const double v = mean_kernel(x, x, scales) + mean_kernel(y, y, scales) - 2.0 * mean_kernel(x, y, scales);
  return std::max(v, 0.0);
}

double mmd(const PointSet& x, const PointSet& y, const MmdConfig& config) {
  return std::sqrt(mmd_squared(x, y, config));
}

nlohmann::json FidelityReport::to_json() const {
  return {{"accuracy", accuracy},
          {"distance", distance},
          {"score", score},
          {"train_per_side", train_per_side},
          {"test_per_side", test_per_side}};
}

namespace {

// Uniform subset of size k from [0, n), ascending.
std::vector<std::size_t> subsample(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// Balanced real-vs-sample rows; real rows first.
learn::DistillSet balanced_pair(const data::Table& real, const gibbs::AugmentedSet& fake, Rng& rng) {
  const std::size_t per_side = std::min(real.n_rows(), fake.size());
  if (per_side < 10) throw std::invalid_argument("fidelity needs at least 10 rows per side");
  if (real.schema().n_features() != fake.features.n_cols) {
    throw std::invalid_argument("real rows and samples differ in width");
  }
  const auto real_rows = subsample(real.n_rows(), per_side, rng);
  const auto fake_rows = subsample(fake.size(), per_side, rng);
  const auto rf = real.features();

  learn::DistillSet set;
  set.task = data::TaskKind::binary();
  set.features.n_rows = 2 * per_side;
  set.features.n_cols = rf.n_cols;
  set.features.cardinalities = rf.cardinalities;
  set.features.values.reserve(2 * per_side * rf.n_cols);
  for (std::size_t r : real_rows) {
    const auto row = rf.row(r);
    set.features.values.insert(set.features.values.end(), row.begin(), row.end());
  }
  for (std::size_t r : fake_rows) {
    const auto row = fake.features.row(r);
    set.features.values.insert(set.features.values.end(), row.begin(), row.end());
  }
  set.targets = learn::empty_targets(set.task);
  set.targets.values.assign(per_side, 1.0);
  set.targets.values.resize(2 * per_side, 0.0);
  set.augmented.assign(2 * per_side, false);
  return set;
}

}  // namespace

FidelityReport sample_fidelity(const data::Table& real_fit, const data::Table& real_eval,
                               const gibbs::AugmentedSet& samples_fit,
                               const gibbs::AugmentedSet& samples_eval, std::uint64_t seed,
                               const learn::ForestConfig& discriminator) {
  Rng rng = make_stream(seed, {0xF1DE});
  const auto fit_set = balanced_pair(real_fit, samples_fit, rng);
  const auto eval_set = balanced_pair(real_eval, samples_eval, rng);

  learn::ForestConfig cfg = discriminator;
  cfg.seed = derive_seed(seed, {0xF1DE, 1});
  const auto forest = learn::RandomForest::fit(fit_set, cfg);
  const auto pred = forest->predict(eval_set.features);

  FidelityReport rep;
  rep.accuracy = learn::task_metric(eval_set.task, pred, eval_set.targets.values);
  rep.distance = std::abs(rep.accuracy - 0.5);
  rep.score = 0.5 - rep.distance;
  rep.train_per_side = fit_set.n_rows() / 2;
  rep.test_per_side = eval_set.n_rows() / 2;
  return rep;
}

std::vector<double> min_max_normalize(std::span<const double> values) {
  std::vector<double> out(values.size(), 0.0);
  if (values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (!(*hi > *lo)) return out;
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - *lo) / (*hi - *lo);
  return out;
}

namespace {

gibbs::AugmentedSet take_rows(const gibbs::AugmentedSet& src, std::span<const std::size_t> rows) {
  gibbs::AugmentedSet out;
  out.schema = src.schema;
  out.features = learn::select_rows(src.features, rows);
  for (std::size_t r : rows) out.provenance.push_back(src.provenance[r]);
  return out;
}

}  // namespace

std::vector<SuiteRow> diagnostics_suite(const density::DensityModel& model, const data::Table& train,
                                        const data::Table& holdout, std::span<const int> rounds_list,
                                        std::uint64_t seed, const SuiteOptions& options) {
  if (rounds_list.empty()) throw std::invalid_argument("no rounds requested");
  const auto& space = model.space();
  const PointSet reference = embed(train, space);

  // Holdout halves: one fits the discriminator, the other scores it.
  std::vector<std::size_t> order(holdout.n_rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng split_rng = make_stream(seed, {0xD1A6});
  std::shuffle(order.begin(), order.end(), split_rng);
  const std::size_t half = order.size() / 2;
  std::vector<std::size_t> fit_rows(order.begin(), order.begin() + half);
  std::vector<std::size_t> eval_rows(order.begin() + half, order.end());
  std::sort(fit_rows.begin(), fit_rows.end());
  std::sort(eval_rows.begin(), eval_rows.end());
  const auto real_fit = holdout.select_rows(fit_rows);
  const auto real_eval = holdout.select_rows(eval_rows);

  std::vector<SuiteRow> rows;
  for (int k : rounds_list) {
    gibbs::GibbsConfig gc;
    gc.rounds = k;
    gc.target_count = options.sample_count == 0 ? train.n_rows() : options.sample_count;
    gc.seed = derive_seed(seed, {0xD1A6, static_cast<std::uint64_t>(k)});
    const auto samples = gibbs::generate(model, train, gc);

    SuiteRow row;
    row.rounds = k;
    row.mmd = mmd(embed(samples, space), reference, options.mmd);
    row.diffusion = gibbs::diffusion_of(samples, train, space);

    std::vector<std::size_t> perm(samples.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng perm_rng = make_stream(gc.seed, {0xD1A6});
    std::shuffle(perm.begin(), perm.end(), perm_rng);
    const std::size_t s_half = perm.size() / 2;
    std::vector<std::size_t> a(perm.begin(), perm.begin() + s_half), b(perm.begin() + s_half, perm.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    row.fidelity = sample_fidelity(real_fit, real_eval, take_rows(samples, a), take_rows(samples, b), gc.seed,
                                   options.discriminator);
    rows.push_back(row);
  }

  auto column = [&](auto get) {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(get(r));
    return min_max_normalize(v);
  };
  const auto m = column([](const SuiteRow& r) { return r.mmd; });
  const auto d = column([](const SuiteRow& r) { return r.diffusion; });
  const auto fd = column([](const SuiteRow& r) { return r.fidelity.distance; });
  const auto fs = column([](const SuiteRow& r) { return r.fidelity.score; });
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].mmd_normalized = m[i];
    rows[i].diffusion_normalized = d[i];
    rows[i].fidelity_distance_normalized = fd[i];
    rows[i].fidelity_score_normalized = fs[i];
  }
  return rows;
}

nlohmann::json suite_to_json(std::span<const SuiteRow> rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"rounds", r.rounds},
                   {"mmd", r.mmd},
                   {"diffusion", r.diffusion},
                   {"fidelity", r.fidelity.to_json()},
                   {"normalized",
                    {{"mmd", r.mmd_normalized},
                     {"diffusion", r.diffusion_normalized},
                     {"fidelity_distance", r.fidelity_distance_normalized},
                     {"fidelity_score", r.fidelity_score_normalized}}}});
  }
  return out;
}

}  // namespace fastdad::diagnostics
