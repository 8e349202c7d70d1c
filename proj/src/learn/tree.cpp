#include "fastdad/learn/tree.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace fastdad::learn {

namespace {

struct Totals {
  double weight = 0.0;
  std::vector<double> sums;
  double sq_over_w() const {
    double s = 0.0;
    for (double v : sums) s += v * v;
    return s / weight;
  }
};

Totals node_totals(std::span<const double> y, std::size_t q, std::span<const double> w,
                   std::span<const std::size_t> rows) {
  Totals t;
  t.sums.assign(q, 0.0);
  for (std::size_t r : rows) {
    t.weight += w[r];
    for (std::size_t o = 0; o < q; ++o) t.sums[o] += w[r] * y[r * q + o];
  }
  return t;
}

double split_gain(const Totals& parent, double wl, std::span<const double> sl) {
  const double wr = parent.weight - wl;
  double left = 0.0, right = 0.0;
  for (std::size_t o = 0; o < sl.size(); ++o) {
    const double sr = parent.sums[o] - sl[o];
    left += sl[o] * sl[o];
    right += sr * sr;
  }
  return left / wl + right / wr - parent.sq_over_w();
}

// `sorted` lists the node's rows in ascending order of feature j.
template <class Index>
void scan_numeric(const data::FeatureMatrix& x, std::span<const double> y, std::size_t q,
                  std::span<const double> w, std::span<const Index> sorted, std::size_t j,
                  const Totals& parent, double min_leaf, SplitChoice& best) {
  std::vector<double> sl(q, 0.0);
  double wl = 0.0;
  for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
    const std::size_t r = sorted[k];
    wl += w[r];
    for (std::size_t o = 0; o < q; ++o) sl[o] += w[r] * y[r * q + o];
    const double v = x.at(r, j);
    const double next = x.at(sorted[k + 1], j);
    if (!(v < next)) continue;
    if (wl < min_leaf || parent.weight - wl < min_leaf) continue;
    const double gain = split_gain(parent, wl, sl);
    if (!best.found || gain > best.gain) {
      double threshold = v + (next - v) / 2.0;
      if (!(threshold < next)) threshold = v;
      best = {true, j, false, threshold, -1, gain};
    }
  }
}

void scan_categorical(const data::FeatureMatrix& x, std::span<const double> y, std::size_t q,
                      std::span<const double> w, std::span<const std::size_t> rows, std::size_t j,
                      const Totals& parent, double min_leaf, SplitChoice& best) {
  const std::size_t card = x.cardinalities[j];
  std::vector<double> weight(card, 0.0), sums(card * q, 0.0);
  for (std::size_t r : rows) {
    const auto c = static_cast<std::size_t>(x.at(r, j));
    weight[c] += w[r];
    for (std::size_t o = 0; o < q; ++o) sums[c * q + o] += w[r] * y[r * q + o];
  }
  for (std::size_t c = 0; c < card; ++c) {
    if (weight[c] < min_leaf || parent.weight - weight[c] < min_leaf || weight[c] <= 0.0) continue;
    if (parent.weight - weight[c] <= 0.0) continue;
    const double gain = split_gain(parent, weight[c], std::span<const double>(sums).subspan(c * q, q));
    if (!best.found || gain > best.gain) best = {true, j, true, 0.0, static_cast<int>(c), gain};
  }
}

bool goes_left(const Tree::Node& n, std::span<const double> x) {
  const double v = x[static_cast<std::size_t>(n.feature)];
  return n.categorical ? static_cast<int>(v) == n.category : v <= n.threshold;
}

class Builder {
 public:
  Builder(const data::FeatureMatrix& x, const SortedFeatures& sorted, std::span<const double> y,
          std::size_t q, std::span<const double> w, const TreeParams& params, Rng& rng)
      : x_(x), y_(y), q_(q), w_(w), params_(params), rng_(rng), left_flag_(x.n_rows, 0) {
    for (std::size_t r = 0; r < x.n_rows; ++r) {
      if (w[r] > 0.0) rows_.push_back(r);
    }
    feature_rows_.resize(x.n_cols);
    for (std::size_t j = 0; j < x.n_cols; ++j) {
      if (sorted.order[j].empty()) continue;
      auto& fr = feature_rows_[j];
      fr.reserve(rows_.size());
      for (std::uint32_t r : sorted.order[j]) {
        if (w[r] > 0.0) fr.push_back(r);
      }
    }
    scratch_.resize(rows_.size());
    all_features_.resize(x.n_cols);
    std::iota(all_features_.begin(), all_features_.end(), std::size_t{0});
  }

  Tree build() {
    if (rows_.empty()) throw std::invalid_argument("tree needs at least one row with positive weight");
    grow(0, rows_.size(), 0);
    return Tree(q_, std::move(nodes_), std::move(leaf_values_));
  }

 private:
  int make_leaf(std::span<const std::size_t> rows, const Totals& t) {
    Tree::Node n;
    n.leaf = leaf_values_.size() / q_;
    for (std::size_t o = 0; o < q_; ++o) leaf_values_.push_back(t.sums[o] / t.weight);
    (void)rows;
    nodes_.push_back(n);
    return static_cast<int>(nodes_.size() - 1);
  }

  bool pure(std::span<const std::size_t> rows) const {
    const std::size_t first = rows[0];
    for (std::size_t r : rows) {
      for (std::size_t o = 0; o < q_; ++o) {
        if (y_[r * q_ + o] != y_[first * q_ + o]) return false;
      }
    }
    return true;
  }

  std::vector<std::size_t> candidate_features() {
    const std::size_t d = x_.n_cols;
    if (params_.max_features == 0 || params_.max_features >= d) return all_features_;
    std::vector<std::size_t> pool = all_features_;
    for (std::size_t i = 0; i < params_.max_features; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, d - 1);
      std::swap(pool[i], pool[pick(rng_)]);
    }
    pool.resize(params_.max_features);
    return pool;
  }

  int grow(std::size_t begin, std::size_t end, std::size_t depth) {
    const std::span<const std::size_t> rows(rows_.data() + begin, end - begin);
    const Totals totals = node_totals(y_, q_, w_, rows);
    const bool depth_done = params_.max_depth != 0 && depth >= params_.max_depth;
    if (depth_done || totals.weight < 2.0 * params_.min_leaf_weight || pure(rows)) {
      return make_leaf(rows, totals);
    }

    SplitChoice best;
    for (std::size_t j : candidate_features()) {
      if (x_.cardinalities[j] > 0) {
        scan_categorical(x_, y_, q_, w_, rows, j, totals, params_.min_leaf_weight, best);
      } else {
        const std::span<const std::uint32_t> seg(feature_rows_[j].data() + begin, end - begin);
        scan_numeric(x_, y_, q_, w_, seg, j, totals, params_.min_leaf_weight, best);
      }
    }
    double scale = 0.0;
    for (std::size_t r : rows)
      for (std::size_t o = 0; o < q_; ++o) scale += w_[r] * y_[r * q_ + o] * y_[r * q_ + o];
    if (!best.found || !(best.gain > 1e-12 * scale)) return make_leaf(rows, totals);

    Tree::Node split;
    split.feature = static_cast<int>(best.feature);
    split.categorical = best.categorical;
    split.threshold = best.threshold;
    split.category = best.category;
    for (std::size_t r : rows) left_flag_[r] = goes_left(split, x_.row(r)) ? 1 : 0;

    const std::size_t mid = begin + partition(rows_, begin, end);
    for (auto& fr : feature_rows_) {
      if (!fr.empty()) partition(fr, begin, end);
    }

    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(split);
    const int l = grow(begin, mid, depth + 1);
    const int r = grow(mid, end, depth + 1);
    nodes_[static_cast<std::size_t>(id)].left = l;
    nodes_[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  // Stable partition of v[begin, end) by left_flag_; returns the left count.
  template <class T>
  std::size_t partition(std::vector<T>& v, std::size_t begin, std::size_t end) {
    std::size_t nl = 0;
    for (std::size_t k = begin; k < end; ++k) {
      if (left_flag_[v[k]]) ++nl;
    }
    std::size_t li = 0, ri = nl;
    for (std::size_t k = begin; k < end; ++k) {
      scratch_[left_flag_[v[k]] ? li++ : ri++] = v[k];
    }
    for (std::size_t k = begin; k < end; ++k) v[k] = static_cast<T>(scratch_[k - begin]);
    return nl;
  }

  const data::FeatureMatrix& x_;
  std::span<const double> y_;
  std::size_t q_;
  std::span<const double> w_;
  const TreeParams& params_;
  Rng& rng_;
  std::vector<char> left_flag_;
  std::vector<std::size_t> rows_;
  std::vector<std::vector<std::uint32_t>> feature_rows_;
  std::vector<std::size_t> scratch_;
  std::vector<std::size_t> all_features_;
  std::vector<Tree::Node> nodes_;
  std::vector<double> leaf_values_;
};

}  // namespace

Tree::Tree(std::size_t n_outputs, std::vector<Node> nodes, std::vector<double> leaf_values)
    : n_outputs_(n_outputs), nodes_(std::move(nodes)), leaf_values_(std::move(leaf_values)) {
  if (n_outputs_ == 0 || nodes_.empty() || leaf_values_.size() % n_outputs_ != 0) {
    throw std::invalid_argument("malformed tree");
  }
  for (const auto& n : nodes_) {
    if (n.feature < 0) {
      if ((n.leaf + 1) * n_outputs_ > leaf_values_.size()) throw std::invalid_argument("tree leaf out of range");
    } else if (n.left < 0 || n.right < 0 || static_cast<std::size_t>(n.left) >= nodes_.size() ||
               static_cast<std::size_t>(n.right) >= nodes_.size()) {
      throw std::invalid_argument("tree child out of range");
    }
  }
}

std::size_t Tree::parameter_count() const {
  return 2 * (nodes_.size() - n_leaves()) + leaf_values_.size();
}

std::span<const double> Tree::predict_row(std::span<const double> x) const {
  std::size_t at = 0;
  while (nodes_[at].feature >= 0) {
    at = static_cast<std::size_t>(goes_left(nodes_[at], x) ? nodes_[at].left : nodes_[at].right);
  }
  return {leaf_values_.data() + nodes_[at].leaf * n_outputs_, n_outputs_};
}

void Tree::predict_add(const data::FeatureMatrix& features, double scale, std::span<double> out) const {
  for (std::size_t r = 0; r < features.n_rows; ++r) {
    const auto leaf = predict_row(features.row(r));
    for (std::size_t o = 0; o < n_outputs_; ++o) out[r * n_outputs_ + o] += scale * leaf[o];
  }
}

nlohmann::json Tree::to_json() const {
  std::vector<int> feature, category, left, right;
  std::vector<bool> categorical;
  std::vector<double> threshold;
  std::vector<std::size_t> leaf;
  for (const auto& n : nodes_) {
    feature.push_back(n.feature);
    categorical.push_back(n.categorical);
    threshold.push_back(n.threshold);
    category.push_back(n.category);
    left.push_back(n.left);
    right.push_back(n.right);
    leaf.push_back(n.leaf);
  }
  return {{"n_outputs", n_outputs_}, {"feature", feature},     {"categorical", categorical},
          {"threshold", threshold},  {"category", category},   {"left", left},
          {"right", right},          {"leaf", leaf},           {"leaf_values", leaf_values_}};
}

Tree Tree::from_json(const nlohmann::json& j) {
  const auto feature = j.at("feature").get<std::vector<int>>();
  const auto categorical = j.at("categorical").get<std::vector<bool>>();
  const auto threshold = j.at("threshold").get<std::vector<double>>();
  const auto category = j.at("category").get<std::vector<int>>();
  const auto left = j.at("left").get<std::vector<int>>();
  const auto right = j.at("right").get<std::vector<int>>();
  const auto leaf = j.at("leaf").get<std::vector<std::size_t>>();
  std::vector<Node> nodes(feature.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    nodes[i] = {feature.at(i), categorical.at(i), threshold.at(i), category.at(i), left.at(i), right.at(i), leaf.at(i)};
  }
  return Tree(j.at("n_outputs").get<std::size_t>(), std::move(nodes), j.at("leaf_values").get<std::vector<double>>());
}

SortedFeatures presort(const data::FeatureMatrix& features) {
  if (features.n_rows > 0xFFFFFFFFULL) throw std::invalid_argument("too many rows");
  SortedFeatures s;
  s.order.resize(features.n_cols);
  for (std::size_t j = 0; j < features.n_cols; ++j) {
    if (features.cardinalities[j] > 0) continue;
    auto& o = s.order[j];
    o.resize(features.n_rows);
    std::iota(o.begin(), o.end(), 0U);
    std::stable_sort(o.begin(), o.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return features.at(a, j) < features.at(b, j); });
  }
  return s;
}

SplitChoice best_split(const data::FeatureMatrix& x, std::span<const double> y, std::size_t n_outputs,
                       std::span<const double> weights, std::span<const std::size_t> rows,
                       std::span<const std::size_t> features, double min_leaf_weight) {
  SplitChoice best;
  if (rows.empty()) return best;
  const Totals totals = node_totals(y, n_outputs, weights, rows);
  for (std::size_t j : features) {
    if (x.cardinalities[j] > 0) {
      scan_categorical(x, y, n_outputs, weights, rows, j, totals, min_leaf_weight, best);
    } else {
      std::vector<std::size_t> sorted(rows.begin(), rows.end());
      std::stable_sort(sorted.begin(), sorted.end(),
                       [&](std::size_t a, std::size_t b) { return x.at(a, j) < x.at(b, j); });
      scan_numeric(x, y, n_outputs, weights, std::span<const std::size_t>(sorted), j, totals, min_leaf_weight, best);
    }
  }
  return best;
}

Tree fit_tree(const data::FeatureMatrix& x, const SortedFeatures& sorted, std::span<const double> y,
              std::size_t n_outputs, std::span<const double> weights, const TreeParams& params, Rng& rng) {
  if (n_outputs == 0 || y.size() != x.n_rows * n_outputs || weights.size() != x.n_rows) {
    throw std::invalid_argument("tree inputs disagree in size");
  }
  if (sorted.order.size() != x.n_cols) throw std::invalid_argument("presort does not match features");
  return Builder(x, sorted, y, n_outputs, weights, params, rng).build();
}

}  // namespace fastdad::learn
