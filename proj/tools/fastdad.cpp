#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "fastdad/augment/strategies.hpp"
#include "fastdad/bench/experiment.hpp"
#include "fastdad/data/csv.hpp"
#include "fastdad/data/synthetic.hpp"
#include "fastdad/data/transform.hpp"
#include "fastdad/density/trainer.hpp"
#include "fastdad/diagnostics/metrics.hpp"
#include "fastdad/gibbs/sampler.hpp"
#include "fastdad/learn/stack.hpp"

using namespace fastdad;

namespace {

struct DataArgs {
  std::string path;
  std::string target;  // empty: last column
  std::string task;    // empty: inferred

  void add(CLI::App* cmd, const std::string& flag = "--data", bool required = true) {
    auto* o = cmd->add_option(flag, path, "CSV file with a header row");
    if (required) o->required();
    cmd->add_option("--target", target, "target column (default: last column)");
    cmd->add_option("--task", task, "regression, binary or multiclass (default: inferred)");
  }
};

data::Table load_labeled(const DataArgs& a) { return bench::load_labeled_csv(a.path, a.target, a.task); }

// Rows of `path` read against the schema of the training table. The target
// column may be absent.
data::Table load_like(const std::string& path, const data::Table& train) {
  return data::load_csv_with_schema(path, train.schema());
}

data::Table feature_table(const gibbs::AugmentedSet& aug) {
  std::vector<data::ColumnSpec> specs;
  std::vector<std::vector<double>> cols;
  const auto feats = aug.schema.feature_columns();
  for (std::size_t j = 0; j < feats.size(); ++j) {
    specs.push_back(aug.schema.column(feats[j]));
    std::vector<double> c(aug.size());
    for (std::size_t r = 0; r < aug.size(); ++r) c[r] = aug.features.at(r, j);
    cols.push_back(std::move(c));
  }
  return data::Table(data::Schema(specs), std::move(cols));
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return nlohmann::json::parse(in);
}

void write_samples(const gibbs::AugmentedSet& aug, const std::string& out) {
  data::save_csv(feature_table(aug), out);
  write_json(out + ".provenance.json", aug.provenance_json());
  std::cout << "wrote " << aug.size() << " rows to " << out << " (provenance in " << out << ".provenance.json)\n";
}

std::size_t augmented_count(std::size_t n, std::size_t mult, std::size_t count) {
  if (count > 0) return count;
  return std::min<std::size_t>(mult * n, 1000000);
}

std::pair<data::Table, data::Table> train_val(const data::Table& all, const std::string& val_path, double fraction,
                                              std::uint64_t seed) {
  if (!val_path.empty()) return {all, load_like(val_path, all)};
  return data::split_train_val(all, {1.0 - fraction, seed});
}

std::vector<int> parse_rounds(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    std::size_t used = 0;
    const int k = std::stoi(item, &used);
    if (used != item.size() || k < 0) throw std::invalid_argument("bad rounds list: " + text);
    out.push_back(k);
  }
  if (out.empty()) throw std::invalid_argument("empty rounds list");
  return out;
}

learn::SoftTargets labels_for(const learn::Learner& teacher, const gibbs::AugmentedSet& aug, bool hard) {
  return hard ? augment::hunge_labels(teacher, aug) : augment::teacher_label(teacher, aug, teacher.task());
}

// Samples with teacher outputs: the target column for regression and hard
// labels, p_<class> columns for soft class probabilities (binary: positive
// class only).
data::Table labeled_table(const gibbs::AugmentedSet& aug, const data::Schema& schema, const learn::SoftTargets& y,
                          bool hard) {
  auto feats = feature_table(aug);
  std::vector<data::ColumnSpec> specs = feats.schema().columns();
  std::vector<std::vector<double>> cols;
  for (std::size_t j = 0; j < feats.n_columns(); ++j) {
    const auto c = feats.column(j);
    cols.emplace_back(c.begin(), c.end());
  }
  const auto& task = schema.task();
  const auto& target = schema.column(*schema.target());
  if (y.kind == learn::SoftTargets::Kind::Scalar && !(hard && task.is_classification())) {
    const std::string name = task.is_classification() ? "p_" + target.kind.categories()[1] : target.name;
    specs.push_back({name, data::ColumnKind::numeric()});
    cols.push_back(y.values);
  } else if (hard) {
    const auto classes = learn::predicted_classes(task, y);
    specs.push_back(target);
    cols.emplace_back(classes.begin(), classes.end());
  } else {
    for (std::size_t c = 0; c < y.width; ++c) {
      specs.push_back({"p_" + target.kind.categories()[c], data::ColumnKind::numeric()});
      std::vector<double> col(y.n_rows());
      for (std::size_t r = 0; r < y.n_rows(); ++r) col[r] = y.row(r)[c];
      cols.push_back(std::move(col));
    }
  }
  return data::Table(data::Schema(specs), std::move(cols));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fastdad: density-model augmentation for distilling tabular ensembles"};
  app.require_subcommand(1);

  // make-data
  auto* make = app.add_subcommand("make-data", "write a built-in synthetic dataset as CSV");
  std::string make_name = "checkerboard", make_out;
  std::size_t make_rows = 1000;
  std::uint64_t make_seed = 0;
  make->add_option("--name", make_name, "spiral, checkerboard or linear");
  make->add_option("--rows", make_rows);
  make->add_option("--seed", make_seed);
  make->add_option("--out", make_out)->required();

  // fit
  auto* fit = app.add_subcommand("fit", "train the masked self-attention density model");
  DataArgs fit_data;
  fit_data.add(fit);
  std::string fit_out, fit_val, fit_preset = "auto", fit_overrides, fit_log_json;
  double fit_val_fraction = 0.1;
  std::uint64_t fit_seed = 0;
  std::size_t fit_epochs = 200, fit_patience = 20;
  fit->add_option("--val", fit_val, "validation CSV (default: split off --val-fraction)");
  fit->add_option("--val-fraction", fit_val_fraction);
  fit->add_option("--seed", fit_seed);
  fit->add_option("--epochs", fit_epochs);
  fit->add_option("--patience", fit_patience);
  fit->add_option("--preset", fit_preset, "auto, small or large");
  fit->add_option("--overrides", fit_overrides, "JSON object of model config fields");
  fit->add_option("--log-json", fit_log_json, "write the epoch history here");
  fit->add_option("--out", fit_out)->required();

  // sample
  auto* sample = app.add_subcommand("sample", "draw Gibbs samples started at the training rows");
  DataArgs sample_data;
  sample_data.add(sample);
  std::string sample_model, sample_out;
  int sample_rounds = 1;
  std::size_t sample_mult = 10, sample_count = 0;
  std::uint64_t sample_seed = 0;
  sample->add_option("--model", sample_model)->required();
  sample->add_option("--rounds", sample_rounds);
  sample->add_option("--mult", sample_mult, "samples per training row (capped at 10^6 total)");
  sample->add_option("--count", sample_count, "exact sample count, overrides --mult");
  sample->add_option("--seed", sample_seed);
  sample->add_option("--out", sample_out)->required();

  // augment
  auto* aug = app.add_subcommand("augment", "generate synthetic rows with MUNGE or the Gibbs sampler");
  DataArgs aug_data;
  aug_data.add(aug);
  std::string aug_strategy = "munge", aug_model, aug_out;
  double aug_p = 0.5, aug_s = 1.0;
  int aug_rounds = 1;
  std::size_t aug_mult = 10;
  std::uint64_t aug_seed = 0;
  aug->add_option("--strategy", aug_strategy, "munge or gibbs");
  aug->add_option("--p", aug_p, "MUNGE swap probability");
  aug->add_option("--s", aug_s, "MUNGE local variance");
  aug->add_option("--model", aug_model, "density checkpoint (gibbs)");
  aug->add_option("--rounds", aug_rounds, "Gibbs rounds");
  aug->add_option("--mult", aug_mult);
  aug->add_option("--seed", aug_seed);
  aug->add_option("--out", aug_out)->required();

  // teacher
  auto* teach = app.add_subcommand("teacher", "fit the stacked ensemble teacher");
  DataArgs teach_data;
  teach_data.add(teach);
  std::string teach_val, teach_config, teach_out;
  double teach_val_fraction = 0.1;
  std::uint64_t teach_seed = 0;
  teach->add_option("--val", teach_val);
  teach->add_option("--val-fraction", teach_val_fraction);
  teach->add_option("--config", teach_config, "JSON file with stack settings");
  teach->add_option("--seed", teach_seed);
  teach->add_option("--out", teach_out)->required();

  // label
  auto* label = app.add_subcommand("label", "label synthetic rows with a teacher");
  DataArgs label_train;
  label_train.add(label, "--train");
  std::string label_teacher, label_rows, label_out;
  bool label_hard = false;
  label->add_option("--teacher", label_teacher)->required();
  label->add_option("--data", label_rows, "rows to label (target column optional)")->required();
  label->add_flag("--hard", label_hard, "argmax labels (HUNGE)");
  label->add_option("--out", label_out)->required();

  // distill
  auto* distill = app.add_subcommand("distill", "train students on a strategy's training set");
  DataArgs dist_data;
  dist_data.add(distill);
  std::string dist_strategy = "gib", dist_student = "all", dist_teacher, dist_model, dist_val, dist_out = ".";
  double dist_val_fraction = 0.1, dist_p = 0.5, dist_s = 1.0;
  int dist_rounds = 1;
  std::size_t dist_mult = 10;
  std::uint64_t dist_seed = 0;
  std::string dist_config;
  distill->add_option("--strategy", dist_strategy, "base, know, munge, hunge or gib");
  distill->add_option("--student", dist_student, "mlp, forest, gbm or all");
  distill->add_option("--teacher", dist_teacher);
  distill->add_option("--model", dist_model, "density checkpoint (gib)");
  distill->add_option("--val", dist_val);
  distill->add_option("--val-fraction", dist_val_fraction);
  distill->add_option("--rounds", dist_rounds);
  distill->add_option("--mult", dist_mult);
  distill->add_option("--p", dist_p);
  distill->add_option("--s", dist_s);
  distill->add_option("--config", dist_config, "JSON file with learner settings");
  distill->add_option("--seed", dist_seed);
  distill->add_option("--out-dir", dist_out);

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "MMD, diffusion and fidelity per number of Gibbs rounds");
  DataArgs diag_data;
  diag_data.add(diag);
  std::string diag_model, diag_holdout, diag_rounds = "0,1,5,10", diag_out;
  std::uint64_t diag_seed = 0;
  std::size_t diag_samples = 0;
  diag->add_option("--model", diag_model)->required();
  diag->add_option("--holdout", diag_holdout, "real rows for the discriminator (default: 20% of --data)");
  diag->add_option("--rounds", diag_rounds);
  diag->add_option("--samples", diag_samples, "samples per round (default: one per training row)");
  diag->add_option("--seed", diag_seed);
  diag->add_option("--out", diag_out)->required();

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "run a strategy x student x seed experiment");
  std::string bench_config, bench_out;
  bool bench_quiet = false;
  bench_cmd->add_option("--config", bench_config)->required();
  bench_cmd->add_option("--out", bench_out)->required();
  bench_cmd->add_flag("--quiet", bench_quiet);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*make) {
      data::save_csv(data::make_builtin(make_name, make_rows, make_seed), make_out);
    } else if (*fit) {
      const auto all = load_labeled(fit_data);
      const auto [train, val] = train_val(all, fit_val, fit_val_fraction, fit_seed);
      density::ModelConfig cfg = fit_preset == "small"   ? density::ModelConfig::small()
                                 : fit_preset == "large" ? density::ModelConfig::large()
                                 : fit_preset == "auto"  ? density::ModelConfig::for_rows(train.n_rows())
                                                         : throw std::invalid_argument("unknown preset " + fit_preset);
      if (!fit_overrides.empty()) cfg = density::apply_overrides(cfg, nlohmann::json::parse(fit_overrides));
      density::FitOptions opts;
      opts.max_epochs = fit_epochs;
      opts.patience = fit_patience;
      opts.log = &std::cout;
      if (!fit_log_json.empty()) opts.json_log = fit_log_json;
      const auto res = density::fit(train, val, cfg, fit_seed, opts);
      res.model.save(fit_out);
      std::cout << "best epoch " << res.best_epoch << ", saved " << fit_out << "\n";
    } else if (*sample) {
      const auto train = load_labeled(sample_data);
      const auto model = density::DensityModel::load(sample_model);
      gibbs::GibbsConfig gc{sample_rounds, augmented_count(train.n_rows(), sample_mult, sample_count), sample_seed};
      write_samples(gibbs::generate(model, train, gc), sample_out);
    } else if (*aug) {
      const auto train = load_labeled(aug_data);
      const std::size_t m = augmented_count(train.n_rows(), aug_mult, 0);
      if (aug_strategy == "munge") {
        auto out = augment::munge(train, {aug_p, aug_s}, (m + train.n_rows() - 1) / train.n_rows(), aug_seed);
        write_samples(out, aug_out);
      } else if (aug_strategy == "gibbs") {
        if (aug_model.empty()) throw std::invalid_argument("--model is required for gibbs");
        const auto model = density::DensityModel::load(aug_model);
        write_samples(gibbs::generate(model, train, {aug_rounds, m, aug_seed}), aug_out);
      } else {
        throw std::invalid_argument("unknown augmentation strategy " + aug_strategy);
      }
    } else if (*teach) {
      const auto all = load_labeled(teach_data);
      const auto [train, val] = train_val(all, teach_val, teach_val_fraction, teach_seed);
      learn::StackEnsembleConfig cfg;
      if (!teach_config.empty()) cfg = learn::StackEnsembleConfig::from_json(read_json(teach_config));
      const auto t = learn::StackEnsemble::fit(train, val, cfg, teach_seed);
      learn::save_learner(*t, teach_out);
      std::cout << t->info().dump(2) << "\n";
    } else if (*label) {
      const auto train = load_labeled(label_train);
      const auto rows = load_like(label_rows, train);
      const auto teacher = learn::load_learner(label_teacher);
      const auto samples = gibbs::as_augmented(rows);
      const auto y = labels_for(*teacher, samples, label_hard);
      data::save_csv(labeled_table(samples, train.schema(), y, label_hard), label_out);
    } else if (*distill) {
      const auto all = load_labeled(dist_data);
      const auto [train, val] = train_val(all, dist_val, dist_val_fraction, dist_seed);
      const auto task = train.schema().task();
      const auto strategy = bench::StrategySpec::parse(dist_strategy == "gib" ? "GIB-" + std::to_string(dist_rounds)
                                                                              : dist_strategy);
      learn::LearnerPtr teacher;
      if (strategy.kind != bench::StrategySpec::Kind::Base) {
        if (dist_teacher.empty()) throw std::invalid_argument("--teacher is required for " + strategy.name());
        teacher = learn::load_learner(dist_teacher);
      }
      const std::size_t m = augmented_count(train.n_rows(), dist_mult, 0);
      learn::DistillSet set;
      switch (strategy.kind) {
        case bench::StrategySpec::Kind::Base:
          set = learn::labeled_set(train);
          break;
        case bench::StrategySpec::Kind::Know:
          set = learn::labeled_set(train);
          set.targets = augment::know_targets(task, augment::teacher_label(*teacher, gibbs::as_augmented(train), task),
                                              train.target_values(), {});
          break;
        case bench::StrategySpec::Kind::Munge:
        case bench::StrategySpec::Kind::Hunge: {
          const auto a = augment::munge(train, {dist_p, dist_s}, (m + train.n_rows() - 1) / train.n_rows(), dist_seed);
          set = augment::assemble(train, a, labels_for(*teacher, a, strategy.kind == bench::StrategySpec::Kind::Hunge));
          break;
        }
        case bench::StrategySpec::Kind::Gib: {
          if (dist_model.empty()) throw std::invalid_argument("--model is required for gib");
          const auto model = density::DensityModel::load(dist_model);
          const auto a = gibbs::generate(model, train, {dist_rounds, m, dist_seed});
          set = augment::assemble(train, a, augment::teacher_label(*teacher, a, task));
          break;
        }
      }
      learn::LearnerConfigs cfg;
      if (!dist_config.empty()) cfg = learn::LearnerConfigs::from_json(read_json(dist_config));
      std::vector<std::string> kinds = dist_student == "all" ? learn::learner_kinds() : std::vector<std::string>{dist_student};
      std::vector<double> metrics;
      std::vector<std::size_t> params;
      std::filesystem::create_directories(dist_out);
      const auto val_x = val.features();
      for (const auto& kind : kinds) {
        const auto student = learn::fit_learner(kind, set, cfg, dist_seed);
        const double v = learn::task_metric(task, student->predict(val_x), val.target_values());
        metrics.push_back(v);
        params.push_back(student->parameter_count());
        const auto path = std::filesystem::path(dist_out) / ("student_" + kind + ".json");
        learn::save_learner(*student, path.string());
        std::cout << kind << ": validation " << 100.0 * v << ", " << set.n_rows() << " training rows, saved " << path.string() << "\n";
      }
      std::cout << "selected: " << kinds[learn::select_by_metric(metrics, params)] << "\n";
    } else if (*diag) {
      const auto all = load_labeled(diag_data);
      const auto [train, holdout] = train_val(all, diag_holdout, 0.2, diag_seed);
      const auto model = density::DensityModel::load(diag_model);
      const auto rounds = parse_rounds(diag_rounds);
      diagnostics::SuiteOptions opts;
      opts.sample_count = diag_samples;
      const auto rows = diagnostics::diagnostics_suite(model, train, holdout, rounds, diag_seed, opts);
      write_json(diag_out, {{"rows", diagnostics::suite_to_json(rows)},
                            {"bandwidths", opts.mmd.bandwidths},
                            {"fidelity_note", "distance = |accuracy - 0.5| (lower: harder to distinguish); score = 0.5 - distance"}});
      for (const auto& r : rows) {
        std::cout << "k=" << r.rounds << " mmd=" << r.mmd << " diffusion=" << r.diffusion
                  << " accuracy=" << r.fidelity.accuracy << "\n";
      }
    } else if (*bench_cmd) {
      const auto cfg = bench::ExperimentConfig::load(bench_config);
      bench::RunOptions opts;
      if (!bench_quiet) opts.log = &std::cerr;
      const auto res = bench::run_experiment(cfg, opts);
      bench::emit_report(res.report, cfg.latency.enabled ? &res.timing : nullptr, bench_out);
      std::cout << bench::results_csv(res.report);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
