#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace sdstex {

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t step = 0;

  AdamState() = default;
  AdamState(std::size_t parameter_count, const AdamConfig& cfg)
      : config(cfg), first_moment(parameter_count, 0.0), second_moment(parameter_count, 0.0) {}
};

// Bias-corrected Adam. Throws NonFiniteError naming the first non-finite
// gradient index; nothing is modified in that case.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

double global_norm(std::span<const double> values);

// Rescales grads to norm max_norm when larger; returns the norm before clipping.
double clip_global_norm(std::span<double> grads, double max_norm);

}  // namespace sdstex
