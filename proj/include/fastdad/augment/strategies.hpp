#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "fastdad/data/table.hpp"
#include "fastdad/gibbs/sampler.hpp"
#include "fastdad/learn/learner.hpp"
#include "fastdad/learn/targets.hpp"

namespace fastdad::augment {

struct MungeParams {
  double swap_prob = 0.5;
  double local_variance = 1.0;  // +infinity collapses perturbations onto the neighbour value

  static const std::vector<double>& swap_grid();      // {0.1, 0.25, 0.5, 0.75}
  static const std::vector<double>& variance_grid();  // {0.5, 1.0, 5.0}
  // Cartesian product, swap probability major.
  static std::vector<MungeParams> grid();

  void validate() const;
  bool operator==(const MungeParams&) const = default;
};

// Distance used to pair rows: Euclidean over standardized numeric features
// plus the Hamming count over categorical features.
double munge_distance(const data::Table& table, const data::StandardizationStats& stats, std::size_t a,
                      std::size_t b);

// Nearest other row of every row (ties to the lower index).
std::vector<std::size_t> nearest_neighbors(const data::Table& table);

// `multiplier` perturbed copies of the training features. Each attribute of
// a copied row is, with probability swap_prob, moved toward its nearest
// neighbour: numerics redrawn from Normal(neighbour, (|e - e'| / s)^2),
// categoricals replaced by the neighbour's code.
gibbs::AugmentedSet munge(const data::Table& train, const MungeParams& params, std::size_t multiplier,
                          std::uint64_t seed);

// Teacher predictions as distillation targets for the task.
learn::SoftTargets teacher_label(const learn::Learner& teacher, const gibbs::AugmentedSet& aug,
                                 const data::TaskKind& task);

// Hard teacher labels: one-hot argmax (binary: 0/1), ties to the lower class.
learn::SoftTargets hunge_labels(const learn::Learner& teacher, const gibbs::AugmentedSet& aug);
learn::SoftTargets harden(const data::TaskKind& task, const learn::SoftTargets& probs);

struct KnowParams {
  double temperature = 2.0;
  double hard_weight = 0.25;
};

// Classification: normalize(probs^(1/T)) blended toward the one-hot label
// with weight w. Regression: (1 - w) * prediction + w * label.
learn::SoftTargets know_targets(const data::TaskKind& task, const learn::SoftTargets& teacher_probs,
                                std::span<const double> true_labels, const KnowParams& params);

// Real rows (labels in the task's target kind) followed by augmented rows
// with their targets.
learn::DistillSet assemble(const data::Table& train, const gibbs::AugmentedSet& aug,
                           const learn::SoftTargets& aug_targets);

}  // namespace fastdad::augment
