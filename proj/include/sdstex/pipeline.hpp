#pragma once

#include "sdstex/guidance.hpp"
#include "sdstex/optimizer.hpp"
#include "sdstex/random.hpp"
#include "sdstex/renderer.hpp"
#include "sdstex/texture_field.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sdstex {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Range&) const = default;
};

struct SdsConfig {
  int batch_size = 8;
  Range elevation{10.0, 80.0};
  Range azimuth{0.0, 360.0};
  Range distance{1.0, 1.5};
  Range t_frac{0.02, 0.98};
  double guidance_scale = 100.0;
  int steps = 5000;
  std::uint64_t seed = 0;
  int resolution = 64;
  double fov = 45.0;
  double background = kBackground;
  AdamConfig adam;
  double clip_max_norm = 0.0;  // <= 0 disables clipping
  bool depth_conditioning = true;
  std::string condition = "positive";
  std::optional<std::string> negative_condition;
  int threads = 1;

  void validate() const;
};

struct CameraPose {
  double elevation = 0.0;
  double azimuth = 0.0;
  double distance = 1.0;
};

CameraPose sample_camera(const SdsConfig& config, Rng& rng);
std::vector<CameraPose> sample_cameras(const SdsConfig& config, Rng& rng);
Camera make_camera(const CameraPose& pose, const SdsConfig& config);

// Integer timestep bounds [ceil(lo*N), floor(hi*N)] clamped to [1, N].
std::pair<int, int> timestep_range(const SdsConfig& config, const NoiseSchedule& schedule);

// Random draws of one view in one step.
struct ViewDraw {
  CameraPose pose;
  int timestep = 1;
  std::uint64_t noise_seed = 0;
};

// Per-view draws from generators forked off `step_seed`, so the result
// does not depend on how views are scheduled.
std::vector<ViewDraw> draw_views(const SdsConfig& config, const NoiseSchedule& schedule,
                                 std::uint64_t step_seed);

std::uint64_t step_seed(std::uint64_t run_seed, std::int64_t step);

struct SdsGradient {
  std::vector<double> gradient;  // averaged over views
  double residual = 0.0;         // mean over views of mean_hit ||w(t)(eps_hat - eps)||^2
  std::vector<int> timesteps;
};

// Renders each view, noises it, queries guidance and pulls w(t)(eps_hat - eps)
// on hit pixels back through shade_backward. The per-view gradients are
// summed in view order and divided by the view count.
SdsGradient compute_sds_gradient(const TextureField& field, const TriangleMesh& mesh,
                                 const SdsConfig& config, const NoiseSchedule& schedule,
                                 const GuidanceModel& guidance, std::span<const ViewDraw> draws);

struct TrainRecord {
  int step = 0;
  double residual = 0.0;
  double grad_norm = 0.0;
  std::vector<int> timesteps;
  std::vector<CameraPose> cameras;
  double elapsed_ms = 0.0;
};

// One SDS iteration: draw views, compute the averaged gradient, optionally
// clip, and apply Adam. `step` is 1-based.
TrainRecord sds_step(TextureField& field, const TriangleMesh& mesh, const SdsConfig& config,
                     const NoiseSchedule& schedule, const GuidanceModel& guidance, int step,
                     AdamState& adam);

std::vector<Camera> turntable_cameras(int count, double elevation, double distance, double fov,
                                      int resolution);

// Mean absolute error over hit pixels and channels between renders of
// `field` and the guidance model's mean target.
double hit_pixel_mae(const TextureField& field, const TriangleMesh& mesh,
                     const GuidanceModel& guidance, const SdsConfig& config,
                     std::span<const Camera> cameras);

struct GenerateOptions {
  std::filesystem::path output_dir;  // empty: no files written
  int snapshot_every = 100;          // 0 disables snapshots
  int snapshot_views = 4;
  int bake_resolution = 512;
  bool log_wall_clock = false;
  std::function<void(const TrainRecord&)> on_step;
};

struct GenerateResult {
  TextureField field;
  std::vector<TrainRecord> records;
  std::optional<Image> texture;
};

std::uint64_t field_seed(std::uint64_t run_seed);

// Full run: random init, `config.steps` SDS steps, bake when the mesh has uvs.
GenerateResult generate_texture(const TriangleMesh& mesh, const SdsConfig& config,
                                const HashGridConfig& grid, const NoiseSchedule& schedule,
                                const GuidanceModel& guidance, const GenerateOptions& options);

void write_metrics_csv(const std::filesystem::path& path, std::span<const TrainRecord> records,
                       bool wall_clock);

struct VarianceEstimate {
  int batch_size = 0;
  int trials = 0;
  double trace_variance = 0.0;
};

// Trace of the covariance of the batch-averaged SDS gradient at a fixed
// field, from `trials` independent draws per batch size.
std::vector<VarianceEstimate> gradient_variance_probe(const TextureField& field,
                                                      const TriangleMesh& mesh,
                                                      const SdsConfig& config,
                                                      const NoiseSchedule& schedule,
                                                      const GuidanceModel& guidance,
                                                      std::span<const int> batch_sizes,
                                                      int trials, std::uint64_t seed);

// Least-squares slope of log(variance) against log(batch size).
double loglog_slope(std::span<const VarianceEstimate> estimates);

}  // namespace sdstex
