#include "fastdad/bench/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fastdad::bench {

namespace {

// Ascending-order ranks (1-based) of `v`, ties averaged.
std::vector<double> ascending_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::vector<double> average_ranks(std::span<const double> scores) {
  std::vector<double> neg(scores.begin(), scores.end());
  for (double& s : neg) s = -s;
  return ascending_ranks(neg);
}

MeanStderr mean_stderr(std::span<const double> values) {
  MeanStderr out;
  out.n = values.size();
  if (values.empty()) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(out.n);
  if (out.n < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.stderr_ = std::sqrt(ss / static_cast<double>(out.n - 1)) / std::sqrt(static_cast<double>(out.n));
  return out;
}

double wilcoxon_greater_p(std::span<const double> differences) {
  std::vector<double> d;
  for (double x : differences)
    if (x != 0.0) d.push_back(x);
  if (d.empty()) return 1.0;
  std::vector<double> mag(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) mag[i] = std::abs(d[i]);
  const auto ranks = ascending_ranks(mag);

  // Doubled ranks are integers, so the null distribution of the positive
  // rank sum is a subset-sum count over them.
  std::vector<std::size_t> r2(ranks.size());
  std::size_t total = 0, observed = 0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    r2[i] = static_cast<std::size_t>(std::lround(2.0 * ranks[i]));
    total += r2[i];
    if (d[i] > 0) observed += r2[i];
  }
  std::vector<double> ways(total + 1, 0.0);
  ways[0] = 1.0;
  for (std::size_t r : r2)
    for (std::size_t s = total; s >= r; --s) ways[s] += ways[s - r];
  double tail = 0.0;
  for (std::size_t s = observed; s <= total; ++s) tail += ways[s];
  return tail / std::ldexp(1.0, static_cast<int>(d.size()));
}

}  // namespace fastdad::bench
