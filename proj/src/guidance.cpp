#include "sdstex/guidance.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace sdstex {

NoiseSchedule make_schedule(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw ConfigError("schedule.steps", "must be >= 1");
  if (!(beta_start > 0.0 && beta_start < beta_end && beta_end < 1.0))
    throw ConfigError("schedule", "require 0 < beta_start < beta_end < 1");
  NoiseSchedule s;
  s.steps = steps;
  s.betas.resize(steps);
  s.alphas_bar.resize(steps);
  s.weights.resize(steps);
  double prod = 1.0;
  for (int i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
    s.betas[i] = beta_start + (beta_end - beta_start) * frac;
    prod *= 1.0 - s.betas[i];
    s.alphas_bar[i] = prod;
    s.weights[i] = 1.0 - prod;
  }
  return s;
}

Image add_noise(const Image& x0, const NoiseSchedule& schedule, int t, const Image& eps) {
  if (!x0.same_shape(eps)) throw Error("add_noise: shape mismatch");
  if (t < 1 || t > schedule.steps) throw Error(fmt::format("add_noise: timestep {} out of range", t));
  const double ab = schedule.alpha_bar(t);
  const double a = std::sqrt(ab);
  const double b = std::sqrt(1.0 - ab);
  Image out(x0.width, x0.height, x0.channels);
  for (std::size_t i = 0; i < x0.size(); ++i) out.data[i] = a * x0.data[i] + b * eps.data[i];
  return out;
}

Image cfg_combine(const Image& eps_cond, const Image& eps_base, double scale) {
  if (!eps_cond.same_shape(eps_base)) throw Error("cfg_combine: shape mismatch");
  Image out(eps_cond.width, eps_cond.height, eps_cond.channels);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data[i] = eps_base.data[i] + scale * (eps_cond.data[i] - eps_base.data[i]);
  return out;
}

Image delta_prediction(const Image& noisy, const Image& target, double alpha_bar) {
  if (!noisy.same_shape(target))
    throw Error("guidance: target image does not match the noisy image");
  const double a = std::sqrt(alpha_bar);
  const double inv = 1.0 / std::sqrt(1.0 - alpha_bar);
  Image out(noisy.width, noisy.height, noisy.channels);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data[i] = (noisy.data[i] - a * target.data[i]) * inv;
  return out;
}

Image predict_guided(const GuidanceModel& model, const GuidanceInput& input, double scale) {
  Image cond = model.predict_noise(input);
  if (!input.negative_condition) return cond;
  GuidanceInput base = input;
  base.condition = *input.negative_condition;
  base.negative_condition.reset();
  return cfg_combine(cond, model.predict_noise(base), scale);
}

DeltaOracle::DeltaOracle(NoiseSchedule schedule, std::map<std::string, TargetPtr> targets)
    : schedule_(std::move(schedule)), targets_(std::move(targets)) {
  for (const auto& [id, t] : targets_)
    if (!t) throw ConfigError("oracle.conditions." + id, "missing target");
}

Image DeltaOracle::predict_noise(const GuidanceInput& input) const {
  auto it = targets_.find(input.condition);
  if (it == targets_.end())
    throw Error(fmt::format("delta oracle: unknown condition '{}'", input.condition));
  const Image mu = it->second->render(input.view);
  return delta_prediction(*input.noisy, mu, schedule_.alpha_bar(input.timestep));
}

Image DeltaOracle::mean_target(const GuidanceInput& input) const {
  auto it = targets_.find(input.condition);
  if (it == targets_.end())
    throw Error(fmt::format("delta oracle: unknown condition '{}'", input.condition));
  return it->second->render(input.view);
}

MixtureOracle::MixtureOracle(NoiseSchedule schedule,
                             std::map<std::string, std::vector<MixtureMode>> modes)
    : schedule_(std::move(schedule)), modes_(std::move(modes)) {
  for (const auto& [id, list] : modes_) {
    if (list.empty()) throw ConfigError("oracle.conditions." + id, "mode list is empty");
    double total = 0.0;
    for (const auto& m : list) {
      if (!(m.weight >= 0.0)) throw ConfigError("oracle.conditions." + id, "weights must be >= 0");
      if (!m.target) throw ConfigError("oracle.conditions." + id, "missing target");
      total += m.weight;
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw ConfigError("oracle.conditions." + id, fmt::format("weights sum to {}, not 1", total));
  }
}

namespace {

struct ModeEval {
  std::vector<Image> targets;
  std::vector<double> responsibilities;
};

ModeEval evaluate_modes(const std::vector<MixtureMode>& modes, const GuidanceInput& input,
                        double alpha_bar) {
  ModeEval ev;
  const double a = std::sqrt(alpha_bar);
  const double var = 1.0 - alpha_bar;
  std::vector<double> logits(modes.size(), -std::numeric_limits<double>::infinity());
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < modes.size(); ++i) {
    ev.targets.push_back(modes[i].target->render(input.view));
    if (modes[i].weight <= 0.0) continue;
    const Image& mu = ev.targets.back();
    if (!mu.same_shape(*input.noisy))
      throw Error("mixture oracle: target image does not match the noisy image");
    double sq = 0.0;
    for (std::size_t k = 0; k < mu.size(); ++k) {
      const double d = input.noisy->data[k] - a * mu.data[k];
      sq += d * d;
    }
    logits[i] = std::log(modes[i].weight) - 0.5 * sq / var;
    max_logit = std::max(max_logit, logits[i]);
  }
  double z = 0.0;
  ev.responsibilities.assign(modes.size(), 0.0);
  for (std::size_t i = 0; i < modes.size(); ++i) {
    if (modes[i].weight <= 0.0) continue;
    ev.responsibilities[i] = std::exp(logits[i] - max_logit);
    z += ev.responsibilities[i];
  }
  for (double& r : ev.responsibilities) r /= z;
  return ev;
}

}  // namespace

std::vector<double> MixtureOracle::responsibilities(const GuidanceInput& input) const {
  auto it = modes_.find(input.condition);
  if (it == modes_.end())
    throw Error(fmt::format("mixture oracle: unknown condition '{}'", input.condition));
  return evaluate_modes(it->second, input, schedule_.alpha_bar(input.timestep)).responsibilities;
}

Image MixtureOracle::predict_noise(const GuidanceInput& input) const {
  auto it = modes_.find(input.condition);
  if (it == modes_.end())
    throw Error(fmt::format("mixture oracle: unknown condition '{}'", input.condition));
  const double ab = schedule_.alpha_bar(input.timestep);
  const ModeEval ev = evaluate_modes(it->second, input, ab);
  Image out(input.noisy->width, input.noisy->height, input.noisy->channels);
  for (std::size_t i = 0; i < ev.targets.size(); ++i) {
    const double r = ev.responsibilities[i];
    if (r == 0.0) continue;
    const Image pred = delta_prediction(*input.noisy, ev.targets[i], ab);
    for (std::size_t k = 0; k < out.size(); ++k) out.data[k] += r * pred.data[k];
  }
  return out;
}

Image MixtureOracle::mean_target(const GuidanceInput& input) const {
  auto it = modes_.find(input.condition);
  if (it == modes_.end())
    throw Error(fmt::format("mixture oracle: unknown condition '{}'", input.condition));
  Image out;
  for (const auto& m : it->second) {
    const Image mu = m.target->render(input.view);
    if (out.size() == 0) out = Image(mu.width, mu.height, mu.channels);
    for (std::size_t k = 0; k < mu.size(); ++k) out.data[k] += m.weight * mu.data[k];
  }
  return out;
}

DepthRoutedOracle::DepthRoutedOracle(NoiseSchedule schedule,
                                     std::map<std::string, DepthRouting> routes)
    : schedule_(std::move(schedule)), routes_(std::move(routes)) {
  for (const auto& [id, r] : routes_)
    if (!r.near_target || !r.far_target)
      throw ConfigError("oracle.conditions." + id, "near and far targets are required");
}

Image DepthRoutedOracle::routed_target(const GuidanceInput& input) const {
  auto it = routes_.find(input.condition);
  if (it == routes_.end())
    throw Error(fmt::format("depth-routed oracle: unknown condition '{}'", input.condition));
  const DepthRouting& r = it->second;
  Image near = r.near_target->render(input.view);
  if (!input.depth) {
    if (r.fallback_without_depth) return near;
    throw Error("depth-routed oracle: input has no depth channel");
  }
  const Image far = r.far_target->render(input.view);
  const Image& depth = *input.depth;
  if (depth.width != near.width || depth.height != near.height || depth.channels != 1)
    throw Error("depth-routed oracle: depth map is not aligned with the image");
  for (std::size_t p = 0; p < depth.pixel_count(); ++p) {
    const bool use_near = r.invert ? depth.data[p] < r.threshold : depth.data[p] >= r.threshold;
    if (use_near) continue;
    for (int c = 0; c < near.channels; ++c) near.data[p * near.channels + c] = far.data[p * far.channels + c];
  }
  return near;
}

Image DepthRoutedOracle::predict_noise(const GuidanceInput& input) const {
  return delta_prediction(*input.noisy, routed_target(input), schedule_.alpha_bar(input.timestep));
}

}  // namespace sdstex
