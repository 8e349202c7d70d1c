#pragma once

// Deliberately naive reference computations shared by unit and acceptance
// tests.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "fastdad/data/table.hpp"

namespace fastdad::testing {

// Weighted squared error of each output around its weighted mean.
inline double sse(std::span<const double> y, std::size_t q, std::span<const double> w,
                  const std::vector<std::size_t>& rows) {
  double total = 0.0;
  for (std::size_t o = 0; o < q; ++o) {
    double wsum = 0.0, s = 0.0;
    for (std::size_t r : rows) {
      wsum += w[r];
      s += w[r] * y[r * q + o];
    }
    if (wsum == 0.0) continue;
    const double mean = s / wsum;
    for (std::size_t r : rows) total += w[r] * (y[r * q + o] - mean) * (y[r * q + o] - mean);
  }
  return total;
}

// Best squared-error reduction over every midpoint threshold and every
// one-vs-rest category; -1 when no split satisfies min_leaf.
inline double brute_force_gain(const data::FeatureMatrix& x, std::span<const double> y, std::size_t q,
                               std::span<const double> w, double min_leaf) {
  std::vector<std::size_t> all(x.n_rows);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const double parent = sse(y, q, w, all);
  double best = -1.0;
  for (std::size_t j = 0; j < x.n_cols; ++j) {
    std::vector<double> cuts;
    if (x.cardinalities[j] == 0) {
      for (std::size_t a = 0; a < x.n_rows; ++a)
        for (std::size_t b = 0; b < x.n_rows; ++b)
          if (x.at(a, j) < x.at(b, j)) cuts.push_back((x.at(a, j) + x.at(b, j)) / 2);
    } else {
      for (std::size_t c = 0; c < x.cardinalities[j]; ++c) cuts.push_back(static_cast<double>(c));
    }
    for (double cut : cuts) {
      std::vector<std::size_t> l, r;
      for (std::size_t k : all) {
        const bool left = x.cardinalities[j] == 0 ? x.at(k, j) <= cut : x.at(k, j) == cut;
        (left ? l : r).push_back(k);
      }
      double wl = 0, wr = 0;
      for (std::size_t k : l) wl += w[k];
      for (std::size_t k : r) wr += w[k];
      if (wl < min_leaf || wr < min_leaf || wl == 0 || wr == 0) continue;
      best = std::max(best, parent - sse(y, q, w, l) - sse(y, q, w, r));
    }
  }
  return best;
}

// Double-loop biased MMD^2 with the summed Gaussian kernel; rows are
// row-major with `dim` columns.
inline double brute_force_mmd2(std::span<const double> x, std::span<const double> y, std::size_t dim,
                               const std::vector<double>& bandwidths) {
  const std::size_t nx = x.size() / dim, ny = y.size() / dim;
  auto k = [&](const double* a, const double* b) {
    double sq = 0;
    for (std::size_t j = 0; j < dim; ++j) sq += (a[j] - b[j]) * (a[j] - b[j]);
    double s = 0;
    for (double h : bandwidths) s += std::exp(-sq / (2 * h * h));
    return s;
  };
  double xx = 0, yy = 0, xy = 0;
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < nx; ++j) xx += k(&x[i * dim], &x[j * dim]);
  for (std::size_t i = 0; i < ny; ++i)
    for (std::size_t j = 0; j < ny; ++j) yy += k(&y[i * dim], &y[j * dim]);
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) xy += k(&x[i * dim], &y[j * dim]);
  return xx / double(nx * nx) + yy / double(ny * ny) - 2 * xy / double(nx * ny);
}

// Nearest other row under: Euclidean distance of numerics scaled by their
// population std (1 when constant) plus the count of differing categories.
// Ties go to the lower row index.
inline std::vector<std::size_t> brute_force_neighbors(const data::Table& t) {
  const auto cols = t.schema().feature_columns();
  const std::size_t n = t.n_rows();
  std::vector<double> scale(t.n_columns(), 1.0);
  for (std::size_t c : cols) {
    if (t.schema().column(c).kind.is_categorical()) continue;
    double mean = 0;
    for (std::size_t r = 0; r < n; ++r) mean += t.at(r, c);
    mean /= double(n);
    double var = 0;
    for (std::size_t r = 0; r < n; ++r) var += (t.at(r, c) - mean) * (t.at(r, c) - mean);
    var /= double(n);
    if (var > 0) scale[c] = std::sqrt(var);
  }
  std::vector<std::size_t> out(n);
  for (std::size_t a = 0; a < n; ++a) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      double sq = 0, mismatch = 0;
      for (std::size_t c : cols) {
        if (t.schema().column(c).kind.is_categorical()) {
          mismatch += t.at(a, c) != t.at(b, c);
        } else {
          const double d = (t.at(a, c) - t.at(b, c)) / scale[c];
          sq += d * d;
        }
      }
      const double dist = std::sqrt(sq) + mismatch;
      if (dist < best) {
        best = dist;
        out[a] = b;
      }
    }
  }
  return out;
}

}  // namespace fastdad::testing
