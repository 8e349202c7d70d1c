#include "fastdad/augment/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fastdad/data/transform.hpp"
#include "fastdad/rng.hpp"

namespace fastdad::augment {

const std::vector<double>& MungeParams::swap_grid() {
  static const std::vector<double> grid{0.1, 0.25, 0.5, 0.75};
  return grid;
}

const std::vector<double>& MungeParams::variance_grid() {
  static const std::vector<double> grid{0.5, 1.0, 5.0};
  return grid;
}

std::vector<MungeParams> MungeParams::grid() {
  std::vector<MungeParams> out;
  for (double p : swap_grid())
    for (double s : variance_grid()) out.push_back({p, s});
  return out;
}

void MungeParams::validate() const {
  if (!(swap_prob >= 0.0 && swap_prob <= 1.0)) throw std::invalid_argument("swap probability must be in [0, 1]");
  if (!(local_variance > 0.0)) throw std::invalid_argument("local variance parameter must be positive");
}

double munge_distance(const data::Table& table, const data::StandardizationStats& stats, std::size_t a,
                      std::size_t b) {
  double sq = 0.0, hamming = 0.0;
  for (std::size_t c : table.schema().feature_columns()) {
    if (table.schema().column(c).kind.is_categorical()) {
      hamming += table.at(a, c) != table.at(b, c) ? 1.0 : 0.0;
    } else {
      const double diff = (table.at(a, c) - table.at(b, c)) / stats.columns[c].std;
      sq += diff * diff;
    }
  }
  return std::sqrt(sq) + hamming;
}

std::vector<std::size_t> nearest_neighbors(const data::Table& table) {
  const std::size_t n = table.n_rows();
  if (n < 2) throw std::invalid_argument("nearest neighbours need at least two rows");
  const auto stats = data::fit_standardization(table);
  const auto cols = table.schema().feature_columns();
  // Row-major standardized numerics and raw codes, for a cache-friendly scan.
  std::vector<std::size_t> num, cat;
  for (std::size_t c : cols) (table.schema().column(c).kind.is_categorical() ? cat : num).push_back(c);
  std::vector<double> z(n * num.size()), codes(n * cat.size());
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < num.size(); ++k) {
      z[r * num.size() + k] = (table.at(r, num[k]) - stats.columns[num[k]].mean) / stats.columns[num[k]].std;
    }
    for (std::size_t k = 0; k < cat.size(); ++k) codes[r * cat.size() + k] = table.at(r, cat[k]);
  }
  std::vector<std::size_t> out(n);
  for (std::size_t a = 0; a < n; ++a) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < n; ++b) {
      if (b == a) continue;
      double sq = 0.0, hamming = 0.0;
      for (std::size_t k = 0; k < num.size(); ++k) {
        const double d = z[a * num.size() + k] - z[b * num.size() + k];
        sq += d * d;
      }
      for (std::size_t k = 0; k < cat.size(); ++k) hamming += codes[a * cat.size() + k] != codes[b * cat.size() + k];
      const double dist = std::sqrt(sq) + hamming;
      if (dist < best) {
        best = dist;
        out[a] = b;
      }
    }
  }
  return out;
}

gibbs::AugmentedSet munge(const data::Table& train, const MungeParams& params, std::size_t multiplier,
                          std::uint64_t seed) {
  params.validate();
  const auto neighbor = nearest_neighbors(train);
  const data::FeatureMatrix base = train.features();
  const std::size_t n = base.n_rows, d = base.n_cols;
  gibbs::AugmentedSet out;
  out.schema = train.schema();
  out.features.n_rows = n * multiplier;
  out.features.n_cols = d;
  out.features.cardinalities = base.cardinalities;
  out.features.values.resize(n * multiplier * d);
  for (std::size_t pass = 0; pass < multiplier; ++pass) {
    Rng rng = make_stream(seed, {0x3D6EULL, pass});
    for (std::size_t r = 0; r < n; ++r) {
      const auto e = base.row(r);
      const auto nb = base.row(neighbor[r]);
      double* dst = out.features.values.data() + (pass * n + r) * d;
      for (std::size_t a = 0; a < d; ++a) {
        dst[a] = e[a];
        if (!(uniform01(rng) < params.swap_prob)) continue;
        if (base.cardinalities[a] > 0) {
          dst[a] = nb[a];
        } else {
          const double sd = std::abs(e[a] - nb[a]) / params.local_variance;
          dst[a] = nb[a] + sd * standard_normal(rng);
        }
      }
      out.provenance.push_back({r, 0});
    }
  }
  return out;
}

learn::SoftTargets teacher_label(const learn::Learner& teacher, const gibbs::AugmentedSet& aug,
                                 const data::TaskKind& task) {
  if (!(teacher.task() == task)) throw std::invalid_argument("teacher was trained for a different task");
  if (aug.schema.target() && !(aug.schema.task() == task)) {
    throw std::invalid_argument("augmented rows come from a different task");
  }
  auto out = teacher.predict(aug.features);
  const auto expect = learn::empty_targets(task);
  if (out.kind != expect.kind || out.width != expect.width) throw std::invalid_argument("teacher output kind mismatch");
  out.validate(task.kind == data::TaskKind::Kind::Binary);
  return out;
}

learn::SoftTargets harden(const data::TaskKind& task, const learn::SoftTargets& probs) {
  if (!task.is_classification()) throw std::invalid_argument("hard labels need a classification task");
  const auto cls = learn::predicted_classes(task, probs);
  std::vector<double> labels(cls.begin(), cls.end());
  return learn::encode_labels(task, labels);
}

learn::SoftTargets hunge_labels(const learn::Learner& teacher, const gibbs::AugmentedSet& aug) {
  if (!teacher.task().is_classification()) {
    throw std::invalid_argument("hard labels need a classification task; use soft labels for regression");
  }
  return harden(teacher.task(), teacher_label(teacher, aug, teacher.task()));
}

learn::SoftTargets know_targets(const data::TaskKind& task, const learn::SoftTargets& teacher_probs,
                                std::span<const double> true_labels, const KnowParams& params) {
  if (!(params.temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (!(params.hard_weight >= 0.0 && params.hard_weight <= 1.0)) throw std::invalid_argument("hard weight must be in [0, 1]");
  if (teacher_probs.n_rows() != true_labels.size()) throw std::invalid_argument("label count mismatch");
  const double w = params.hard_weight;
  learn::SoftTargets out = teacher_probs;
  if (task.kind == data::TaskKind::Kind::Regression) {
    for (std::size_t r = 0; r < out.values.size(); ++r) out.values[r] = (1.0 - w) * out.values[r] + w * true_labels[r];
    return out;
  }
  const std::size_t C = task.n_classes;
  std::vector<double> p(C);
  for (std::size_t r = 0; r < teacher_probs.n_rows(); ++r) {
    if (task.kind == data::TaskKind::Kind::Binary) {
      p[1] = teacher_probs.values[r];
      p[0] = 1.0 - p[1];
    } else {
      std::copy(teacher_probs.row(r).begin(), teacher_probs.row(r).end(), p.begin());
    }
    double z = 0.0;
    for (double& v : p) {
      v = std::pow(std::max(v, 0.0), 1.0 / params.temperature);
      z += v;
    }
    const auto label = static_cast<std::size_t>(true_labels[r]);
    if (label >= C) throw std::invalid_argument("class label out of range");
    for (std::size_t c = 0; c < C; ++c) p[c] = (1.0 - w) * p[c] / z + (c == label ? w : 0.0);
    if (task.kind == data::TaskKind::Kind::Binary) {
      out.values[r] = p[1];
    } else {
      std::copy(p.begin(), p.end(), out.mutable_row(r).begin());
    }
  }
  return out;
}

learn::DistillSet assemble(const data::Table& train, const gibbs::AugmentedSet& aug,
                           const learn::SoftTargets& aug_targets) {
  learn::DistillSet out = learn::labeled_set(train);
  if (aug.size() != aug_targets.n_rows()) throw std::invalid_argument("augmented rows and targets disagree");
  if (aug.size() > 0) {
    if (aug.features.n_cols != out.features.n_cols || aug.features.cardinalities != out.features.cardinalities) {
      throw std::invalid_argument("augmented rows do not match the training features");
    }
    out.targets.append(aug_targets);
    out.features.values.insert(out.features.values.end(), aug.features.values.begin(), aug.features.values.end());
    out.features.n_rows += aug.size();
    out.augmented.resize(out.features.n_rows, true);
  }
  out.validate();
  return out;
}

}  // namespace fastdad::augment
