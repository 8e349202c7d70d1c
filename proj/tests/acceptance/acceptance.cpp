// Runs every acceptance criterion and prints one PASS/FAIL line each.
//   acceptance [--cli <path to fastdad>] [criterion ids...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <algorithm>
#include <set>
#include <sstream>
#include <string>

#include "fastdad/augment/strategies.hpp"
#include "fastdad/bench/experiment.hpp"
#include "fastdad/data/synthetic.hpp"
#include "fastdad/data/transform.hpp"
#include "fastdad/density/trainer.hpp"
#include "fastdad/diagnostics/metrics.hpp"
#include "fastdad/gibbs/sampler.hpp"
#include "fastdad/learn/gbm.hpp"
#include "fastdad/learn/tree.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace fastdad;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string cli_path;

// ---------------------------------------------------------------- 1
Outcome gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0;
  std::size_t coords = 0, failures = 0, min_per_tensor = SIZE_MAX;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto m = testing::randomized_tiny_model(3, 3, 100 + seed);
    const auto rows = testing::random_rows(5, 3, 200 + seed);
    for (std::size_t masked = 0; masked < 3; ++masked) {
      std::vector<double> grad(m.n_parameters());
      m.loss_and_gradient(rows, masked, grad);
      Rng pick = make_stream(seed, {masked});
      for (const auto& t : m.tensors()) {
        std::uniform_int_distribution<std::size_t> idx(0, t.size - 1);
        std::size_t here = 0;
        for (int s = 0; s < 20; ++s, ++here) {
          const std::size_t at = t.offset + idx(pick);
          auto params = m.mutable_parameters();
          const double orig = params[at];
          const double h = 1e-5;
          params[at] = orig + h;
          const double up = m.pl_loss(rows, masked);
          params[at] = orig - h;
          const double down = m.pl_loss(rows, masked);
          params[at] = orig;
          const double fd = (up - down) / (2 * h);
          const double rel = std::abs(fd - grad[at]) / std::max({std::abs(grad[at]), std::abs(fd), 1e-8});
          worst = std::max(worst, rel);
          failures += rel >= 1e-4;
          if (rel >= 1e-4 && std::getenv("FASTDAD_ACCEPTANCE_VERBOSE"))
            std::fprintf(stderr, "  %s seed %llu masked %zu coord %zu analytic %.6e fd %.6e\n", t.name.c_str(),
                         static_cast<unsigned long long>(seed), masked, at, grad[at], fd);
          ++coords;
        }
        min_per_tensor = std::min(min_per_tensor, here);
      }
    }
  }
  const double secs = seconds_since(t0);
  return {failures == 0 && min_per_tensor >= 20 && secs < 60,
          "worst rel err " + fmt(worst, 3) + " over " + std::to_string(coords) + " coords (>= " +
              std::to_string(min_per_tensor) + " per tensor per case), tol 1e-4, h 1e-5, " + fmt(secs, 3) +
              " s (limit 60 s)"};
}

// ---------------------------------------------------------------- 2
Outcome masking_invariance() {
  const auto t0 = std::chrono::steady_clock::now();
  density::ModelConfig cfg = testing::tiny_config(4);
  cfg.n_layers = 2;
  cfg.d_hidden = 16;
  cfg.n_heads = 4;
  std::vector<density::DensityModel> models;
  {
    density::DensityModel m(cfg, testing::identity_space(5), 3);
    Rng rng = make_stream(3, {1});
    for (double& p : m.mutable_parameters()) p = 0.5 * standard_normal(rng);
    models.push_back(m);
  }
  models.emplace_back(density::ModelConfig::small(), testing::identity_space(5), 4);

  std::size_t checks = 0, violations = 0;
  for (const auto& m : models) {
    const auto rows = testing::random_rows(100, 5, 9);
    Rng rng = make_stream(11, {});
    for (std::size_t i = 0; i < 5; ++i) {
      const auto base = m.forward_conditionals(rows, i);
      auto perturbed = rows;
      for (std::size_t r = 0; r < 100; ++r) perturbed[r * 5 + i] += 10.0 * standard_normal(rng);
      const auto after = m.forward_conditionals(perturbed, i);
      for (std::size_t r = 0; r < 100; ++r) {
        ++checks;
        const bool same = base[r].weights == after[r].weights && base[r].means == after[r].means &&
                          base[r].stds == after[r].stds;
        violations += !same;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {violations == 0 && secs < 60,
          std::to_string(checks) + " (row, feature) conditionals compared bitwise, " + std::to_string(violations) +
              " changed, " + fmt(secs, 3) + " s (limit 60 s)"};
}

// ---------------------------------------------------------------- 3
Outcome mixture_validity() {
  std::size_t calls = 0, params = 0, violations = 0;
  double worst_sum = 0, min_sigma = 1e300;
  const std::vector<double> scales{0.3, 1.0, 3.0};
  std::vector<density::DensityModel> models;
  for (std::size_t s = 0; s < scales.size(); ++s) models.push_back(testing::randomized_tiny_model(4, 5, 40 + s, scales[s]));
  models.emplace_back(density::ModelConfig::small(), testing::identity_space(4), 5);
  Rng rng = make_stream(12, {});
  for (std::size_t c = 0; c < 10000; ++c) {
    const auto& m = models[c % models.size()];
    const double magnitude = std::pow(10.0, static_cast<double>(rng() % 5) - 1.0);  // 0.1 .. 1000
    std::vector<double> rows(3 * 4);
    for (double& v : rows) v = magnitude * standard_normal(rng);
    const auto out = m.forward_conditionals(rows, rng() % 4);
    ++calls;
    for (const auto& p : out) {
      ++params;
      double sum = 0;
      bool ok = true;
      for (double w : p.weights) {
        sum += w;
        ok = ok && w >= 0 && std::isfinite(w);
      }
      for (double s : p.stds) {
        min_sigma = std::min(min_sigma, s);
        ok = ok && s >= 1e-3;
      }
      for (double mu : p.means) ok = ok && std::isfinite(mu);
      worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
      ok = ok && std::abs(sum - 1.0) <= 1e-6;
      violations += !ok;
    }
  }
  return {violations == 0, std::to_string(calls) + " forward calls, " + std::to_string(params) +
                               " mixtures, max |sum w - 1| " + fmt(worst_sum, 3) + " (tol 1e-6), min sigma " +
                               fmt(min_sigma, 6) + " (floor 1e-3), " + std::to_string(violations) + " violations"};
}

// ---------------------------------------------------------------- 4
Outcome initialization_effect() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto train = data::make_spiral(2000, 2024);
  const auto heldout = data::make_spiral(2000, 2025);
  const auto [fit_rows, val_rows] = data::split_train_val(train, {0.9, 7});
  density::FitOptions opts;
  opts.max_epochs = 200;
  opts.patience = 20;
  const auto fitted = density::fit(fit_rows, val_rows, density::ModelConfig::for_rows(fit_rows.n_rows()), 7, opts);
  const auto& model = fitted.model;
  const auto& space = model.space();
  const auto reference = diagnostics::embed(heldout, space);

  // Arbitrary start: standard normal in the table's own units, blind to the
  // training statistics. Both samplers draw the pipeline's default 10n rows.
  const std::size_t m = gibbs::default_target_count(train.n_rows());
  const auto& stats = space.feature_stats();
  auto random_start = [&](std::uint64_t seed, int rounds) {
    std::vector<gibbs::ChainState> chains;
    Rng init = make_stream(seed, {0xA11CE});
    std::vector<double> point(space.dim());
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t j = 0; j < point.size(); ++j) point[j] = (standard_normal(init) - stats[j].mean) / stats[j].std;
      chains.push_back(gibbs::start_chain_at(point, r % train.n_rows(), r / train.n_rows(), seed));
    }
    gibbs::run_chains(model, chains, rounds);
    return gibbs::collect(model, chains);
  };

  int wins = 0;
  double data1_sum = 0, rand10_sum = 0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto data1 = gibbs::generate(model, train, {1, m, seed});
    const double m_data1 = diagnostics::mmd(diagnostics::embed(data1, space), reference);
    const double m_rand1 = diagnostics::mmd(diagnostics::embed(random_start(seed, 1), space), reference);
    const double m_rand10 = diagnostics::mmd(diagnostics::embed(random_start(seed, 10), space), reference);
    wins += m_data1 < m_rand1;
    data1_sum += m_data1;
    rand10_sum += m_rand10;
    per_seed += " [" + fmt(m_data1, 3) + " " + fmt(m_rand1, 3) + " " + fmt(m_rand10, 3) + "]";
  }
  const double secs = seconds_since(t0);
  const double ratio = rand10_sum / data1_sum;
  return {wins >= 4 && ratio <= 2.0 && secs < 1200,
          "data-init k=1 beats random-init k=1 in " + std::to_string(wins) + "/5 seeds (need 4); mean MMD random k=10 / data k=1 = " +
              fmt(ratio, 3) + " (need <= 2); per seed [data1 rand1 rand10]:" + per_seed + "; " + std::to_string(m) + " samples each; density fit " +
              std::to_string(fitted.history.size()) + " epochs; " + fmt(secs, 3) + " s (limit 1200 s)"};
}

// ---------------------------------------------------------------- 5
Outcome gibbs_identity() {
  const auto train = data::make_linear(300, 5);
  density::DensityModel m(testing::tiny_config(3), data::ModelSpace(train), 2);
  const auto aug = gibbs::generate(m, train, {0, 3 * train.n_rows(), 9});
  const auto fm = train.features();
  std::size_t cat_mismatch = 0;
  double worst = 0;
  for (std::size_t r = 0; r < aug.size(); ++r) {
    const std::size_t o = aug.provenance[r].origin_row;
    for (std::size_t j = 0; j < fm.n_cols; ++j) {
      if (fm.cardinalities[j] > 0) cat_mismatch += aug.features.at(r, j) != fm.at(o, j);
      else worst = std::max(worst, std::abs(aug.features.at(r, j) - fm.at(o, j)));
    }
  }
  const double diffusion = gibbs::diffusion_of(aug, train, m.space());
  return {cat_mismatch == 0 && worst <= 1e-10 && diffusion == 0.0,
          std::to_string(aug.size()) + " samples: categorical mismatches " + std::to_string(cat_mismatch) +
              ", max numeric error " + fmt(worst, 3) + " (tol 1e-10), diffusion " + fmt(diffusion)};
}

// ---------------------------------------------------------------- 6
Outcome mmd_oracle() {
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    diagnostics::PointSet x(16, 3, testing::random_rows(16, 3, seed));
    auto yv = testing::random_rows(16, 3, seed + 50);
    for (double& v : yv) v = 1.5 * v + 0.5;
    diagnostics::PointSet y(16, 3, yv);
    const double ref = testing::brute_force_mmd2(x.values, y.values, 3, {1, 2, 4, 8, 16});
    worst = std::max(worst, std::abs(diagnostics::mmd_squared(x, y) - std::max(ref, 0.0)));
  }
  diagnostics::PointSet x(16, 3, testing::random_rows(16, 3, 1));
  const double self = diagnostics::mmd(x, x);
  const double two = diagnostics::mmd_squared(diagnostics::PointSet(1, 1, {0.0}), diagnostics::PointSet(1, 1, {1.0}), {{1.0}});
  const double expected = 2.0 - 2.0 * std::exp(-0.5);
  return {worst <= 1e-10 && self == 0.0 && std::abs(two - expected) <= 1e-12,
          "16-point brute force max diff " + fmt(worst, 3) + " (tol 1e-10); mmd(X,X) = " + fmt(self) +
              "; two-point mmd^2 " + fmt(two, 12) + " vs " + fmt(expected, 12) + " (tol 1e-12)"};
}

// ---------------------------------------------------------------- 7, 8, 12
struct DistillRun {
  bool done = false;
  bench::ExperimentResult result;
  double seconds = 0;
};
DistillRun distill_run;

const DistillRun& checkerboard_run() {
  if (distill_run.done) return distill_run;
  const auto t0 = std::chrono::steady_clock::now();
  bench::ExperimentConfig cfg;
  cfg.dataset = "checkerboard";
  cfg.dataset_rows = 556;  // 90% gives the 500 training rows
  cfg.test_rows = 2000;
  cfg.strategies = {bench::StrategySpec::parse("BASE"), bench::StrategySpec::parse("GIB-1")};
  cfg.seeds = {0, 1, 2, 3, 4};
  cfg.multiplier = 10;
  cfg.latency.rows = 10000;
  cfg.latency.repetitions = 5;
  bench::RunOptions opts;
  opts.log = &std::cerr;
  distill_run.result = bench::run_experiment(cfg, opts);
  distill_run.seconds = seconds_since(t0);
  distill_run.done = true;
  return distill_run;
}

Outcome distillation_direction() {
  const auto& run = checkerboard_run();
  const auto& r = run.result.report;
  double base = 0, gib = 0;
  bool ok = r.teacher.size() == 5;
  std::size_t train_rows = 0;
  for (const auto& c : r.cells)
    if (c.strategy == "BASE") train_rows = c.train_rows;
  for (const auto& s : r.summary) {
    if (s.student != "selected") continue;
    ok = ok && s.n_ok == 5;
    if (s.strategy == "BASE") base = s.mean;
    if (s.strategy == "GIB-1") gib = s.mean;
  }
  return {ok && gib >= base && train_rows == 500 && run.seconds < 1800,
          "mean Selected test accuracy GIB-1 " + fmt(gib) + " vs BASE " + fmt(base) + " (need GIB-1 >= BASE), n_train " +
              std::to_string(train_rows) + ", 5 seeds, " + fmt(run.seconds, 4) + " s (limit 1800 s)"};
}

Outcome teacher_superiority() {
  const auto& r = checkerboard_run().result.report;
  std::size_t violations = 0, compared = 0;
  double min_margin = 1e300;
  for (const auto& t : r.teacher) {
    if (!t.ok) {
      ++violations;
      continue;
    }
    for (const auto& c : r.cells) {
      if (c.strategy != "BASE" || c.seed != t.seed) continue;
      ++compared;
      if (!c.ok || c.val_metric > t.val_metric) ++violations;
      else min_margin = std::min(min_margin, t.val_metric - c.val_metric);
    }
  }
  return {violations == 0 && compared == 15,
          std::to_string(compared) + " (seed, BASE learner) pairs on validation accuracy, " + std::to_string(violations) +
              " above the teacher, smallest margin " + fmt(min_margin) + " points"};
}

Outcome latency_ordering() {
  const auto& timing = checkerboard_run().result.timing;
  std::map<std::uint64_t, double> teacher;
  for (const auto& rec : timing.records)
    if (rec.strategy == "TEACHER") teacher[rec.seed] = rec.rows_per_second;
  std::size_t compared = 0, violations = 0;
  double worst_ratio = 1e300;
  for (const auto& rec : timing.records) {
    if (rec.strategy == "TEACHER" || !teacher.count(rec.seed)) continue;
    ++compared;
    const double ratio = rec.rows_per_second / teacher[rec.seed];
    worst_ratio = std::min(worst_ratio, ratio);
    violations += ratio <= 1.0;
  }
  return {compared == 30 && violations == 0 && timing.rows == 10000,
          std::to_string(compared) + " students vs teacher on " + std::to_string(timing.rows) +
              " rows, single thread, median of " + std::to_string(timing.repetitions) +
              "; slowest student is " + fmt(worst_ratio, 3) + "x teacher throughput (need > 1)"};
}

// ---------------------------------------------------------------- 9
Outcome munge_baselines() {
  const auto t = data::make_linear(60, 3);
  const auto aug = augment::munge(t, {0.0, 1.0}, 4, 5);
  const auto fm = t.features();
  bool identity = aug.size() == 4 * t.n_rows();
  for (std::size_t r = 0; r < aug.size() && identity; ++r)
    for (std::size_t j = 0; j < fm.n_cols; ++j) identity = identity && aug.features.at(r, j) == fm.at(r % t.n_rows(), j);

  std::size_t tables = 0, mismatches = 0;
  Rng rng = make_stream(77, {});
  for (std::size_t n = 2; n <= 10; ++n) {
    for (int trial = 0; trial < 60; ++trial) {
      std::vector<double> a(n), b(n), k(n), z(n);
      for (std::size_t r = 0; r < n; ++r) {
        a[r] = standard_normal(rng);
        b[r] = 5.0 * standard_normal(rng);
        k[r] = static_cast<double>(rng() % 3);
        z[r] = static_cast<double>(rng() % 2);
      }
      data::Schema s({{"a", data::ColumnKind::numeric()}, {"b", data::ColumnKind::numeric()},
                      {"k", data::ColumnKind::categorical({"u", "v", "w"})}, {"z", data::ColumnKind::categorical({"0", "1"})}});
      s.set_target(3, data::TaskKind::binary());
      const data::Table tab(s, {a, b, k, z});
      ++tables;
      mismatches += augment::nearest_neighbors(tab) != testing::brute_force_neighbors(tab);
    }
  }

  std::vector<augment::MungeParams> expected;
  for (double p : {0.1, 0.25, 0.5, 0.75})
    for (double v : {0.5, 1.0, 5.0}) expected.push_back({p, v});
  const bool grid = augment::MungeParams::grid() == expected;
  return {identity && mismatches == 0 && grid,
          std::string("p=0 identity ") + (identity ? "exact" : "BROKEN") + "; nearest neighbours match brute force on " +
              std::to_string(tables - mismatches) + "/" + std::to_string(tables) + " tables of 2..10 rows; grid " +
              (grid ? "== {0.1,0.25,0.5,0.75} x {0.5,1,5}" : "DIFFERS")};
}

// ---------------------------------------------------------------- 10
Outcome per_task_losses() {
  const double brier = learn::brier_loss(0.5, 1.0);
  double worst_ce = 0;
  for (std::size_t c = 2; c <= 10; ++c) {
    const std::vector<double> u(c, 1.0 / double(c));
    worst_ce = std::max(worst_ce, std::abs(learn::soft_cross_entropy(u, u) - std::log(double(c))));
  }

  const auto table = data::make_checkerboard(50, 8);
  std::vector<double> trace;
  learn::GBMConfig g;
  g.n_rounds = 200;
  learn::GradientBoosting::fit(learn::labeled_set(table), g, &trace);
  double worst_rise = 0;
  for (std::size_t i = 1; i < trace.size(); ++i) worst_rise = std::max(worst_rise, trace[i] - trace[i - 1]);

  std::size_t cases = 0, mismatches = 0;
  Rng rng = make_stream(31, {});
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng() % 9, q = 1 + rng() % 3;
    data::FeatureMatrix x;
    x.n_rows = n;
    x.n_cols = 3;
    x.cardinalities = {0, 0, 3};
    std::vector<double> y(n * q), w(n);
    for (std::size_t r = 0; r < n; ++r) {
      x.values.push_back(std::round(4 * standard_normal(rng)) / 2);
      x.values.push_back(standard_normal(rng));
      x.values.push_back(static_cast<double>(rng() % 3));
      w[r] = 1.0 + static_cast<double>(rng() % 2);
    }
    for (double& v : y) v = standard_normal(rng);
    std::vector<std::size_t> rows(n), feats{0, 1, 2};
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    const auto split = learn::best_split(x, y, q, w, rows, feats, 1.0);
    const double oracle = testing::brute_force_gain(x, y, q, w, 1.0);
    ++cases;
    // The library ignores numerically zero gains.
    const bool agree = oracle <= 1e-12 * std::max(1.0, testing::sse(y, q, w, rows))
                           ? (!split.found || std::abs(split.gain - oracle) <= 1e-10 * std::max(1.0, oracle))
                           : (split.found && std::abs(split.gain - oracle) <= 1e-10 * std::max(1.0, oracle));
    mismatches += !agree;
  }
  return {brier == 0.25 && worst_ce <= 1e-12 && trace.size() == 201 && worst_rise <= 0.0 && mismatches == 0,
          "Brier(0.5,1) = " + fmt(brier) + "; |CE(uniform) - ln C| <= " + fmt(worst_ce, 3) + " for C=2..10" +
              "; GBM loss over " + std::to_string(trace.size() - 1) + " rounds on 50 rows, largest increase " +
              fmt(worst_rise, 3) + " (" + fmt(trace.front(), 4) + " -> " + fmt(trace.back(), 4) + ")" +
              "; split gain == exhaustive on " + std::to_string(cases - mismatches) + "/" + std::to_string(cases) +
              " tables of <= 10 rows"};
}

// ---------------------------------------------------------------- 11
Outcome fidelity_bounds() {
  const auto train = data::make_spiral(400, 61);
  const auto real = data::make_spiral(400, 62);
  const auto [real_fit, real_eval] = data::split_train_val(real, {0.5, 1});
  density::DensityModel model(testing::tiny_config(3), data::ModelSpace(train), 3);
  const auto copies = gibbs::generate(model, train, {0, train.n_rows(), 4});
  std::vector<std::size_t> order(copies.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle = make_stream(63, {});
  std::shuffle(order.begin(), order.end(), shuffle);
  const std::vector<std::size_t> first(order.begin(), order.begin() + order.size() / 2),
      second(order.begin() + order.size() / 2, order.end());
  auto take = [&](const std::vector<std::size_t>& rows) {
    gibbs::AugmentedSet a;
    a.schema = copies.schema;
    a.features = learn::select_rows(copies.features, rows);
    for (std::size_t r : rows) a.provenance.push_back(copies.provenance[r]);
    return a;
  };
  const auto k0 = diagnostics::sample_fidelity(real_fit, real_eval, take(first), take(second), 5);

  // Range over assorted sample sets, from indistinguishable to disjoint.
  double lo = 1, hi = 0;
  std::size_t runs = 0;
  for (double shift : {0.0, 0.3, 1.0, 3.0, 30.0}) {
    auto a = take(first), b = take(second);
    for (double& v : a.features.values) v += shift;
    for (double& v : b.features.values) v += shift;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto rep = diagnostics::sample_fidelity(real_fit, real_eval, a, b, seed);
      lo = std::min(lo, rep.distance);
      hi = std::max(hi, rep.distance);
      ++runs;
    }
  }
  const auto noisy = gibbs::generate(model, train, {3, train.n_rows(), 6});
  const auto rep = diagnostics::sample_fidelity(real_fit, real_eval, noisy, noisy, 1);
  lo = std::min(lo, rep.distance);
  hi = std::max(hi, rep.distance);
  ++runs;
  return {k0.distance < 0.1 && k0.train_per_side == 200 && k0.test_per_side == 200 && lo >= 0.0 && hi <= 0.5,
          "k=0 copies: accuracy " + fmt(k0.accuracy) + ", |acc-0.5| = " + fmt(k0.distance) + " (need < 0.1) at " +
              std::to_string(k0.train_per_side) + " rows/side; " + std::to_string(runs + 1) +
              " fidelity values within [" + fmt(std::min(lo, k0.distance)) + ", " + fmt(std::max(hi, k0.distance)) +
              "] (bounds [0, 0.5])"};
}

// ---------------------------------------------------------------- 13
Outcome end_to_end_determinism() {
  if (cli_path.empty()) return {false, "fastdad CLI path not given (--cli)"};
  const auto dir = std::filesystem::temp_directory_path() / "fastdad_acceptance_determinism";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const nlohmann::json config = {
      {"dataset", "checkerboard"},
      {"dataset_rows", 300},
      {"test_rows", 500},
      {"strategies", {"BASE", "KNOW", "MUNGE", "HUNGE", "GIB-1", "GIB-3"}},
      {"seeds", {11}},
      {"multiplier", 3},
      {"teacher",
       {{"folds", 5},
        {"base",
         {{"mlp", {{"hidden", {32, 32}}, {"max_epochs", 30}}},
          {"forest", {{"n_trees", 30}}},
          {"gbm", {{"n_rounds", 30}, {"max_depth", 4}}}}},
        {"meta", {{"n_rounds", 30}, {"max_depth", 3}}}}},
      {"density_epochs", 20},
      {"latency", {{"rows", 1000}, {"repetitions", 3}}}};
  std::ofstream(dir / "experiment.json") << config.dump(2);
  auto run = [&](const std::string& out, int threads) {
    const std::string cmd = "FASTDAD_THREADS=" + std::to_string(threads) + " \"" + cli_path + "\" bench --quiet --config \"" +
                            (dir / "experiment.json").string() + "\" --out \"" + (dir / out).string() + "\" > /dev/null";
    return std::system(cmd.c_str());
  };
  const auto t0 = std::chrono::steady_clock::now();
  const int a = run("first", 1), b = run("second", 2);
  const double secs = seconds_since(t0);
  auto read = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  };
  const auto ra = read(dir / "first" / "report.json"), rb = read(dir / "second" / "report.json");
  const bool same = !ra.empty() && ra == rb;
  const std::string hash = ra.empty() ? "none" : bench::git_blob_hash(ra);
  return {a == 0 && b == 0 && same,
          "two `fastdad bench` runs (1 and 2 worker threads), report.json " + std::to_string(ra.size()) + " bytes, " +
              (same ? "byte-identical" : "DIFFERENT") + " (blob " + hash.substr(0, 12) + "), " + fmt(secs, 3) + " s"};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--cli" && i + 1 < argc) cli_path = argv[++i];
    else only.insert(std::stoi(arg));
  }
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient correctness", gradient_check},
      {"masking invariance", masking_invariance},
      {"mixture validity", mixture_validity},
      {"data initialization beats random initialization", initialization_effect},
      {"zero-round sampler identity", gibbs_identity},
      {"MMD oracle", mmd_oracle},
      {"distillation direction GIB-1 >= BASE", distillation_direction},
      {"teacher validation superiority", teacher_superiority},
      {"MUNGE baselines", munge_baselines},
      {"per-task losses and split gains", per_task_losses},
      {"fidelity bounds and copies", fidelity_bounds},
      {"latency ordering", latency_ordering},
      {"end-to-end determinism", end_to_end_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    failed += !out.pass;
    std::printf("%s  [%2d] %s: %s\n", out.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), out.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
