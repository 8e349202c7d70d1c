#include "fastdad/density/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace fastdad::density {

double global_norm(std::span<const double> grads) {
  double ss = 0.0;
  for (double g : grads) ss += g * g;
  return std::sqrt(ss);
}

double adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
                 const AdamHyper& hyper) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  const double norm = global_norm(grads);
  const double clip = (hyper.grad_clip_norm > 0.0 && norm > hyper.grad_clip_norm) ? hyper.grad_clip_norm / norm : 1.0;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(hyper.beta1, t);
  const double bc2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i] * clip;
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = hyper.beta1 * m + (1.0 - hyper.beta1) * g;
    v = hyper.beta2 * v + (1.0 - hyper.beta2) * g * g;
    const double mhat = m / bc1;
    const double vhat = v / bc2;
    params[i] -= hyper.learning_rate * (mhat / (std::sqrt(vhat) + hyper.epsilon) + hyper.weight_decay * params[i]);
  }
  return norm;
}

}  // namespace fastdad::density
