#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fastdad/data/table.hpp"
#include "fastdad/rng.hpp"

namespace fastdad::learn {

struct TreeParams {
  std::size_t max_depth = 0;  // 0: unlimited
  double min_leaf_weight = 1.0;
  std::size_t max_features = 0;  // features tried per split, 0: all
};

// Multi-output regression tree stored as a node array. Numeric splits send
// x <= threshold left; categorical splits send code == category left.
class Tree {
 public:
  struct Node {
    int feature = -1;  // -1 for leaves
    bool categorical = false;
    double threshold = 0.0;
    int category = -1;
    int left = -1;
    int right = -1;
    std::size_t leaf = 0;  // offset into leaf values, in units of outputs
    bool operator==(const Node&) const = default;
  };

  Tree() = default;
  Tree(std::size_t n_outputs, std::vector<Node> nodes, std::vector<double> leaf_values);

  std::size_t n_outputs() const { return n_outputs_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t n_leaves() const { return leaf_values_.size() / (n_outputs_ == 0 ? 1 : n_outputs_); }
  std::size_t parameter_count() const;

  std::span<const double> predict_row(std::span<const double> x) const;
  // out[r * n_outputs + q] += scale * prediction
  void predict_add(const data::FeatureMatrix& features, double scale, std::span<double> out) const;

  nlohmann::json to_json() const;
  static Tree from_json(const nlohmann::json& j);
  bool operator==(const Tree&) const = default;

 private:
  std::size_t n_outputs_ = 0;
  std::vector<Node> nodes_;
  std::vector<double> leaf_values_;
};

// Row indices of every numeric feature sorted by value (ties by index).
// Shared by all trees fit on the same matrix.
struct SortedFeatures {
  std::vector<std::vector<std::uint32_t>> order;  // empty for categorical features
};
SortedFeatures presort(const data::FeatureMatrix& features);

struct SplitChoice {
  bool found = false;
  std::size_t feature = 0;
  bool categorical = false;
  double threshold = 0.0;
  int category = -1;
  double gain = 0.0;
};

// Best split of `rows` over `features` by summed per-output squared-error
// reduction: sum_q S_L^2/W_L + S_R^2/W_R - S^2/W.
SplitChoice best_split(const data::FeatureMatrix& x, std::span<const double> y, std::size_t n_outputs,
                       std::span<const double> weights, std::span<const std::size_t> rows,
                       std::span<const std::size_t> features, double min_leaf_weight);

// Greedy exact tree. `y` is n x n_outputs row-major; rows with zero weight
// are ignored. `rng` draws the per-split feature subsets.
Tree fit_tree(const data::FeatureMatrix& x, const SortedFeatures& sorted, std::span<const double> y,
              std::size_t n_outputs, std::span<const double> weights, const TreeParams& params, Rng& rng);

}  // namespace fastdad::learn
