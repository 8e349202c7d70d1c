#include "fastdad/density/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fastdad::density {

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

bool MixtureParams::valid() const {
  if (weights.empty() || means.size() != weights.size() || stds.size() != weights.size()) return false;
  double total = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (!(weights[k] >= 0.0) || !(stds[k] >= kSigmaFloor) || !std::isfinite(means[k])) return false;
    total += weights[k];
  }
  return std::abs(total - 1.0) <= 1e-6;
}

MixtureParams mixture_from_head(std::span<const double> head) {
  if (head.empty() || head.size() % 3 != 0) throw std::invalid_argument("head row must hold 3K values");
  const std::size_t K = head.size() / 3;
  MixtureParams p;
  p.weights.resize(K);
  p.means.assign(head.begin() + static_cast<std::ptrdiff_t>(K), head.begin() + static_cast<std::ptrdiff_t>(2 * K));
  p.stds.resize(K);
  const double mx = *std::max_element(head.begin(), head.begin() + static_cast<std::ptrdiff_t>(K));
  double z = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    p.weights[k] = std::exp(head[k] - mx);
    z += p.weights[k];
  }
  for (std::size_t k = 0; k < K; ++k) {
    p.weights[k] /= z;
    p.stds[k] = softplus(head[2 * K + k]) + kSigmaFloor;
  }
  return p;
}

double mixture_logpdf(double v, const MixtureParams& params) {
  constexpr double half_log_2pi = 0.91893853320467274178;
  const std::size_t K = params.size();
  double mx = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(K);
  for (std::size_t k = 0; k < K; ++k) {
    const double z = (v - params.means[k]) / params.stds[k];
    terms[k] = std::log(params.weights[k]) - half_log_2pi - std::log(params.stds[k]) - 0.5 * z * z;
    mx = std::max(mx, terms[k]);
  }
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - mx);
  return mx + std::log(s);
}

}  // namespace fastdad::density
