#include "sdstex/optimizer.hpp"

#include "sdstex/common.hpp"

#include <fmt/format.h>

#include <cmath>

namespace sdstex {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
  if (params.size() != grads.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size())
    throw Error("adam_step: parameter, gradient and moment sizes differ");
  for (std::size_t i = 0; i < grads.size(); ++i)
    if (!std::isfinite(grads[i]))
      throw NonFiniteError(fmt::format("non-finite gradient at parameter {}", i));

  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double corr1 = 1.0 - std::pow(c.beta1, t);
  const double corr2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * grads[i];
    v = c.beta2 * v + (1.0 - c.beta2) * grads[i] * grads[i];
    params[i] -= c.lr * (m / corr1) / (std::sqrt(v / corr2) + c.eps);
  }
}

double global_norm(std::span<const double> values) {
  double sq = 0.0;
  for (double v : values) sq += v * v;
  return std::sqrt(sq);
}

double clip_global_norm(std::span<double> grads, double max_norm) {
  if (!(max_norm > 0.0)) throw Error("clip_global_norm: max_norm must be positive");
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (double& g : grads) g *= s;
  }
  return norm;
}

}  // namespace sdstex
