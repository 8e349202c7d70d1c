#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace fastdad::density {

struct AdamHyper {
  double learning_rate = 3e-4;
  double weight_decay = 0.0;     // decoupled, applied as p -= lr * wd * p
  double grad_clip_norm = 0.0;   // <= 0 disables clipping
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n_params) : first_moment(n_params, 0.0), second_moment(n_params, 0.0) {}
};

double global_norm(std::span<const double> grads);

// One bias-corrected Adam update. Gradients are rescaled first when their
// global L2 norm exceeds grad_clip_norm. Returns the pre-clip norm.
double adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
                 const AdamHyper& hyper);

}  // namespace fastdad::density
