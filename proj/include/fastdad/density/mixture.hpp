#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fastdad::density {

inline constexpr double kSigmaFloor = 1e-3;

// One univariate conditional: sum_k weights[k] * N(means[k], stds[k]^2).
struct MixtureParams {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> stds;

  std::size_t size() const { return weights.size(); }
  // Weights sum to one (1e-6), are non-negative, stds >= kSigmaFloor.
  bool valid() const;
};

double softplus(double x);
double sigmoid(double x);

// Maps a raw head row [logits(K), means(K), raw sigmas(K)] to mixture
// parameters: softmax weights, identity means, softplus + floor stds.
MixtureParams mixture_from_head(std::span<const double> head);

// log sum_k w_k N(v; mu_k, sigma_k^2), evaluated with log-sum-exp.
double mixture_logpdf(double v, const MixtureParams& params);

}  // namespace fastdad::density
