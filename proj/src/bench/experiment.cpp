#include "fastdad/bench/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "fastdad/augment/strategies.hpp"
#include "fastdad/data/csv.hpp"
#include "fastdad/data/transform.hpp"
#include "fastdad/density/trainer.hpp"
#include "fastdad/gibbs/sampler.hpp"
#include "fastdad/learn/stack.hpp"
#include "fastdad/parallel.hpp"

namespace fastdad::bench {

data::FeatureMatrix tile_rows(const data::FeatureMatrix& rows, std::size_t n) {
  if (rows.n_rows == 0) throw std::invalid_argument("no rows to tile");
  data::FeatureMatrix out;
  out.n_rows = n;
  out.n_cols = rows.n_cols;
  out.cardinalities = rows.cardinalities;
  out.values.reserve(n * rows.n_cols);
  for (std::size_t r = 0; r < n; ++r) {
    const auto src = rows.row(r % rows.n_rows);
    out.values.insert(out.values.end(), src.begin(), src.end());
  }
  return out;
}

double measure_latency(const learn::Learner& model, const data::FeatureMatrix& rows, std::size_t repetitions) {
  if (rows.n_rows == 0) throw std::invalid_argument("latency needs at least one row");
  if (repetitions < 3) throw std::invalid_argument("latency needs at least 3 repetitions");
  volatile double sink = model.predict(rows).values.front();
  std::vector<double> rates;
  for (std::size_t i = 0; i < repetitions; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto pred = model.predict(rows);
    const auto t1 = std::chrono::steady_clock::now();
    sink = pred.values.front();
    const double secs = std::max(std::chrono::duration<double>(t1 - t0).count(), 1e-9);
    rates.push_back(static_cast<double>(rows.n_rows) / secs);
  }
  (void)sink;
  std::sort(rates.begin(), rates.end());
  const std::size_t mid = rates.size() / 2;
  return rates.size() % 2 ? rates[mid] : 0.5 * (rates[mid - 1] + rates[mid]);
}

double measure_latency(const learn::Learner& model, const data::Table& rows, std::size_t repetitions) {
  return measure_latency(model, rows.features(), repetitions);
}

namespace {

std::string table_hash(const data::Table& t) {
  std::ostringstream out;
  data::write_csv(t, out);
  return git_blob_hash(out.str());
}

double percent_metric(const data::TaskKind& task, const learn::SoftTargets& pred, std::span<const double> truth) {
  return 100.0 * learn::task_metric(task, pred, truth);
}

gibbs::AugmentedSet head_rows(gibbs::AugmentedSet aug, std::size_t m) {
  if (aug.size() <= m) return aug;
  aug.features.n_rows = m;
  aug.features.values.resize(m * aug.features.n_cols);
  aug.provenance.resize(m);
  return aug;
}

struct Cell {
  std::size_t strategy = 0;
  std::size_t student = 0;
  CellResult result;
  learn::LearnerPtr model;
};

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  cfg.validate();
  const Dataset ds = load_dataset(cfg);
  if (!ds.pool.schema().target()) throw std::invalid_argument("dataset has no target column");
  const auto task = ds.pool.schema().task();
  auto log = [&](const std::string& line) {
    if (options.log) *options.log << line << std::endl;
  };

  ExperimentResult out;
  RunReport& report = out.report;
  report.config = cfg.to_json();
  report.input_hash = {{"config", git_blob_hash(report.config.dump())},
                       {"pool", table_hash(ds.pool)},
                       {"test", table_hash(ds.test)}};
  report.dataset = {{"name", cfg.dataset},
                    {"task", task.name()},
                    {"n_classes", task.n_classes},
                    {"pool_rows", ds.pool.n_rows()},
                    {"test_rows", ds.test.n_rows()},
                    {"features", ds.pool.schema().n_features()}};
  report.seeds = cfg.seeds;
  for (const auto& s : cfg.strategies) report.strategies.push_back(s.name());
  report.students = cfg.students;
  out.timing.rows = cfg.latency.rows;
  out.timing.repetitions = cfg.latency.repetitions;

  const auto test_x = ds.test.features();
  const auto test_y = ds.test.target_values();
  const auto latency_rows = tile_rows(test_x, cfg.latency.rows);

  for (const std::uint64_t seed : cfg.seeds) {
    const auto [train, val] = data::split_train_val(ds.pool, {0.9, seed});
    const auto val_x = val.features();
    const auto val_y = val.target_values();
    const std::size_t n = train.n_rows();
    const std::size_t m = std::min(cfg.multiplier * n, cfg.max_augmented);
    const std::size_t passes = (m + n - 1) / n;

    TeacherResult tr;
    tr.seed = seed;
    std::shared_ptr<learn::StackEnsemble> teacher;
    try {
      teacher = learn::StackEnsemble::fit(train, val, cfg.teacher, seed);
      tr.ok = true;
      tr.val_metric = percent_metric(task, teacher->predict(val_x), val_y);
      tr.test_metric = percent_metric(task, teacher->predict(test_x), test_y);
      tr.blend_weights.assign(teacher->blend_weights().begin(), teacher->blend_weights().end());
    } catch (const std::exception& e) {
      tr.error = e.what();
    }
    report.teacher.push_back(tr);
    log("seed " + std::to_string(seed) + ": teacher " + (tr.ok ? "val " + std::to_string(tr.val_metric) : "FAILED " + tr.error));

    std::optional<density::DensityModel> density_model;
    std::string density_error;
    if (cfg.needs_density_model()) {
      try {
        const auto mc = density::apply_overrides(density::ModelConfig::for_rows(n), cfg.density);
        const auto [dtrain, dval] = data::split_train_val(train, {0.9, derive_seed(seed, {0xDE57})});
        density::FitOptions fo;
        fo.max_epochs = cfg.density_epochs;
        fo.patience = cfg.density_patience;
        density_model = density::fit(dtrain, dval, mc, derive_seed(seed, {0xDE5}), fo).model;
        ++report.density_fits;
        log("seed " + std::to_string(seed) + ": density model fitted");
      } catch (const std::exception& e) {
        density_error = e.what();
      }
    }

    // Training sets shared by all students of a strategy.
    std::vector<std::optional<learn::DistillSet>> sets(cfg.strategies.size());
    std::vector<std::string> set_errors(cfg.strategies.size());
    for (std::size_t si = 0; si < cfg.strategies.size(); ++si) {
      const auto& spec = cfg.strategies[si];
      try {
        if (!teacher && spec.kind != StrategySpec::Kind::Base) throw std::runtime_error("teacher failed: " + tr.error);
        switch (spec.kind) {
          case StrategySpec::Kind::Base:
            sets[si] = learn::labeled_set(train);
            break;
          case StrategySpec::Kind::Know: {
            auto set = learn::labeled_set(train);
            set.targets = augment::know_targets(task, augment::teacher_label(*teacher, gibbs::as_augmented(train), task),
                                                train.target_values(), cfg.know);
            sets[si] = std::move(set);
            break;
          }
          case StrategySpec::Kind::Gib: {
            if (!density_model) throw std::runtime_error("density model failed: " + density_error);
            const gibbs::GibbsConfig gc{spec.rounds, m, derive_seed(seed, {0x61B5, static_cast<std::uint64_t>(spec.rounds)})};
            const auto aug = gibbs::generate(*density_model, train, gc);
            sets[si] = augment::assemble(train, aug, augment::teacher_label(*teacher, aug, task));
            break;
          }
          case StrategySpec::Kind::Hunge:
            if (!task.is_classification()) throw std::invalid_argument("HUNGE needs a classification task");
            break;
          case StrategySpec::Kind::Munge:
            break;  // searched per student
        }
      } catch (const std::exception& e) {
        set_errors[si] = e.what();
      }
    }

    std::vector<Cell> cells;
    for (std::size_t si = 0; si < cfg.strategies.size(); ++si)
      for (std::size_t ki = 0; ki < cfg.students.size(); ++ki) {
        Cell c;
        c.strategy = si;
        c.student = ki;
        c.result.strategy = report.strategies[si];
        c.result.student = cfg.students[ki];
        c.result.seed = seed;
        cells.push_back(std::move(c));
      }

    parallel_for(cells.size(), [&](std::size_t ci) {
      Cell& cell = cells[ci];
      CellResult& res = cell.result;
      const auto& spec = cfg.strategies[cell.strategy];
      const std::string& kind = cfg.students[cell.student];
      try {
        if (!set_errors[cell.strategy].empty()) throw std::runtime_error(set_errors[cell.strategy]);
        learn::LearnerPtr model;
        if (spec.kind == StrategySpec::Kind::Munge || spec.kind == StrategySpec::Kind::Hunge) {
          const bool hard = spec.kind == StrategySpec::Kind::Hunge;
          double best = -1e300;
          for (const auto& p : augment::MungeParams::grid()) {
            const auto aug = head_rows(augment::munge(train, p, passes, derive_seed(seed, {0x3D6E})), m);
            const auto targets = hard ? augment::hunge_labels(*teacher, aug) : augment::teacher_label(*teacher, aug, task);
            const auto set = augment::assemble(train, aug, targets);
            auto candidate = learn::fit_learner(kind, set, cfg.teacher.base, seed);
            const double v = percent_metric(task, candidate->predict(val_x), val_y);
            if (v > best) {
              best = v;
              model = candidate;
              res.train_rows = set.n_rows();
              res.detail = {{"swap_prob", p.swap_prob}, {"local_variance", p.local_variance}};
            }
          }
        } else {
          model = learn::fit_learner(kind, *sets[cell.strategy], cfg.teacher.base, seed);
          res.train_rows = sets[cell.strategy]->n_rows();
        }
        res.val_metric = percent_metric(task, model->predict(val_x), val_y);
        res.test_metric = percent_metric(task, model->predict(test_x), test_y);
        res.parameter_count = model->parameter_count();
        res.ok = true;
        cell.model = model;
      } catch (const std::exception& e) {
        res.ok = false;
        res.error = e.what();
      }
    });

    for (std::size_t si = 0; si < cfg.strategies.size(); ++si) {
      SelectedResult sel;
      sel.strategy = report.strategies[si];
      sel.seed = seed;
      std::vector<double> metrics;
      std::vector<std::size_t> params;
      std::vector<const CellResult*> ok;
      for (const auto& c : cells) {
        if (c.strategy != si || !c.result.ok) continue;
        metrics.push_back(c.result.val_metric);
        params.push_back(c.result.parameter_count);
        ok.push_back(&c.result);
      }
      if (!ok.empty()) {
        const auto* best = ok[learn::select_by_metric(metrics, params)];
        sel.ok = true;
        sel.student = best->student;
        sel.val_metric = best->val_metric;
        sel.test_metric = best->test_metric;
      }
      report.selected.push_back(sel);
      log("seed " + std::to_string(seed) + ": " + sel.strategy + " selected " +
          (sel.ok ? sel.student + " test " + std::to_string(sel.test_metric) : std::string("FAILED")));
    }
    for (const auto& c : cells) report.cells.push_back(c.result);

    if (cfg.latency.enabled) {
      if (teacher) {
        out.timing.records.push_back({"TEACHER", "stack", seed, measure_latency(*teacher, latency_rows, cfg.latency.repetitions)});
      }
      for (const auto& c : cells) {
        if (!c.model) continue;
        out.timing.records.push_back({c.result.strategy, c.result.student, seed,
                                      measure_latency(*c.model, latency_rows, cfg.latency.repetitions)});
      }
    }
  }
  aggregate(report);
  return out;
}

}  // namespace fastdad::bench
