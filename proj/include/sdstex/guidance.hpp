#pragma once

#include "sdstex/image.hpp"
#include "sdstex/renderer.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sdstex {

// DDPM tables with a linear beta ramp; timesteps are 1-based.
struct NoiseSchedule {
  int steps = 0;
  std::vector<double> betas;
  std::vector<double> alphas_bar;
  std::vector<double> weights;  // w(t) = 1 - alpha_bar(t)

  double alpha_bar(int t) const { return alphas_bar.at(static_cast<std::size_t>(t - 1)); }
  double weight(int t) const { return weights.at(static_cast<std::size_t>(t - 1)); }
};

NoiseSchedule make_schedule(int steps = 1000, double beta_start = 1e-4, double beta_end = 2e-2);

// x_t = sqrt(abar) x0 + sqrt(1 - abar) eps
Image add_noise(const Image& x0, const NoiseSchedule& schedule, int t, const Image& eps);

// eps_base + scale * (eps_cond - eps_base)
Image cfg_combine(const Image& eps_cond, const Image& eps_base, double scale);

// Everything a target source may need to produce the clean image seen from
// one camera.
struct ViewContext {
  const TriangleMesh* mesh = nullptr;
  const Camera* camera = nullptr;
  const GBuffer* gbuffer = nullptr;
  double background = kBackground;
};

// Produces the "ground-truth" image for a view.
class TargetSource {
 public:
  virtual ~TargetSource() = default;
  virtual Image render(const ViewContext& view) const = 0;
};

using TargetPtr = std::shared_ptr<const TargetSource>;

// Colour defined over normalized object space, shaded through the G-buffer.
class ProceduralTarget : public TargetSource {
 public:
  Image render(const ViewContext& view) const override;
  virtual Vec3 color_at(const Vec3& point) const = 0;
};

class SolidTarget final : public ProceduralTarget {
 public:
  explicit SolidTarget(const Vec3& color) : color_(color) {}
  Vec3 color_at(const Vec3&) const override { return color_; }

 private:
  Vec3 color_;
};

// 3D checkerboard with `cells` squares per unit length.
class CheckerboardTarget final : public ProceduralTarget {
 public:
  CheckerboardTarget(const Vec3& a, const Vec3& b, double cells) : a_(a), b_(b), cells_(cells) {}
  Vec3 color_at(const Vec3& point) const override;

 private:
  Vec3 a_, b_;
  double cells_;
};

// Linear blend from `from` at coordinate -1 to `to` at +1 along one axis.
class GradientTarget final : public ProceduralTarget {
 public:
  GradientTarget(const Vec3& from, const Vec3& to, int axis) : from_(from), to_(to), axis_(axis) {}
  Vec3 color_at(const Vec3& point) const override;

 private:
  Vec3 from_, to_;
  int axis_;
};

// UV texture atlas, sampled nearest-texel; requires a mesh with uvs.
class AtlasTarget final : public TargetSource {
 public:
  explicit AtlasTarget(Image atlas) : atlas_(std::move(atlas)) {}
  Image render(const ViewContext& view) const override;

 private:
  Image atlas_;
};

// Render of a texture field (e.g. the field being optimized).
class FieldTarget final : public TargetSource {
 public:
  explicit FieldTarget(std::shared_ptr<const TextureField> field) : field_(std::move(field)) {}
  Image render(const ViewContext& view) const override;

 private:
  std::shared_ptr<const TextureField> field_;
};

// Fixed image independent of the camera.
class ImageTarget final : public TargetSource {
 public:
  explicit ImageTarget(Image image) : image_(std::move(image)) {}
  Image render(const ViewContext&) const override { return image_; }

 private:
  Image image_;
};

struct GuidanceInput {
  const Image* noisy = nullptr;  // x_t, 3 channels
  int timestep = 1;
  const Image* depth = nullptr;  // normalized depth, 1 channel; may be absent
  std::string condition;
  std::optional<std::string> negative_condition;
  ViewContext view;
};

// Depth-conditioned noise predictor.
class GuidanceModel {
 public:
  virtual ~GuidanceModel() = default;
  // Prediction for input.condition. Must be deterministic.
  virtual Image predict_noise(const GuidanceInput& input) const = 0;
  virtual bool has_condition(const std::string& id) const = 0;
  // Mean of the clean-data distribution for input.condition; used as the
  // reference image when scoring renders.
  virtual Image mean_target(const GuidanceInput& input) const = 0;
};

// Point-mass data distribution at the target image mu:
//   eps_hat = (x_t - sqrt(abar) mu) / sqrt(1 - abar)
class DeltaOracle final : public GuidanceModel {
 public:
  DeltaOracle(NoiseSchedule schedule, std::map<std::string, TargetPtr> targets);
  Image predict_noise(const GuidanceInput& input) const override;
  bool has_condition(const std::string& id) const override { return targets_.count(id) > 0; }
  Image mean_target(const GuidanceInput& input) const override;

 private:
  NoiseSchedule schedule_;
  std::map<std::string, TargetPtr> targets_;
};

struct MixtureMode {
  double weight = 1.0;
  TargetPtr target;
};

// Weighted point masses; eps_hat = -sqrt(1 - abar) grad log p_t(x_t), i.e.
// the responsibility-weighted average of per-mode delta predictions.
class MixtureOracle final : public GuidanceModel {
 public:
  MixtureOracle(NoiseSchedule schedule, std::map<std::string, std::vector<MixtureMode>> modes);
  Image predict_noise(const GuidanceInput& input) const override;
  bool has_condition(const std::string& id) const override { return modes_.count(id) > 0; }
  Image mean_target(const GuidanceInput& input) const override;

  // Posterior responsibilities of each mode given x_t.
  std::vector<double> responsibilities(const GuidanceInput& input) const;

 private:
  NoiseSchedule schedule_;
  std::map<std::string, std::vector<MixtureMode>> modes_;
};

struct DepthRouting {
  TargetPtr near_target;
  TargetPtr far_target;
  double threshold = 0.0;
  // Route near_target where depth < threshold instead of >= threshold.
  bool invert = false;
  // Without a depth channel: use near_target everywhere instead of failing.
  bool fallback_without_depth = false;
};

// Per pixel: near_target where normalized depth >= threshold, far_target
// otherwise, then the delta formula.
class DepthRoutedOracle final : public GuidanceModel {
 public:
  DepthRoutedOracle(NoiseSchedule schedule, std::map<std::string, DepthRouting> routes);
  Image predict_noise(const GuidanceInput& input) const override;
  bool has_condition(const std::string& id) const override { return routes_.count(id) > 0; }
  Image mean_target(const GuidanceInput& input) const override { return routed_target(input); }

  // The clean image the oracle is pulling towards.
  Image routed_target(const GuidanceInput& input) const;

 private:
  NoiseSchedule schedule_;
  std::map<std::string, DepthRouting> routes_;
};

// Delta-oracle formula for a given clean target.
Image delta_prediction(const Image& noisy, const Image& target, double alpha_bar);

// Classifier-free guided prediction: the negative condition (when set)
// serves as the base; otherwise the base is the conditional prediction
// itself, since the point-mass oracles carry no separate unconditional
// distribution.
Image predict_guided(const GuidanceModel& model, const GuidanceInput& input, double scale);

}  // namespace sdstex
