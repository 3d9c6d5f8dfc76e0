#include "sdstex/pipeline.hpp"

#include "sdstex/baking.hpp"
#include "sdstex/parallel.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <fstream>

namespace sdstex {

void SdsConfig::validate() const {
  if (batch_size < 1) throw ConfigError("sds.batch_size", "must be >= 1");
  if (!(t_frac.lo >= 0.0 && t_frac.lo < t_frac.hi && t_frac.hi <= 1.0))
    throw ConfigError("sds.t_frac_range", "require 0 <= min < max <= 1");
  if (!(elevation.lo >= -90.0 && elevation.hi <= 90.0 && elevation.lo <= elevation.hi))
    throw ConfigError("sds.elevation_range", "must be an ordered range within [-90, 90]");
  if (!(azimuth.lo <= azimuth.hi)) throw ConfigError("sds.azimuth_range", "must be ordered");
  if (!(distance.lo > 0.0 && distance.lo <= distance.hi))
    throw ConfigError("sds.camera_distance_range", "must be an ordered positive range");
  if (steps < 0) throw ConfigError("sds.steps", "must be >= 0");
  if (resolution < 1) throw ConfigError("render.resolution", "must be >= 1");
  if (!(fov > 0.0 && fov < 180.0)) throw ConfigError("render.fov", "must be in (0, 180)");
  if (!(adam.lr > 0.0)) throw ConfigError("sds.lr", "must be positive");
  if (threads < 1) throw ConfigError("threads", "must be >= 1");
}

CameraPose sample_camera(const SdsConfig& config, Rng& rng) {
  CameraPose p;
  p.elevation = rng.uniform(config.elevation.lo, config.elevation.hi);
  p.azimuth = rng.uniform(config.azimuth.lo, config.azimuth.hi);
  p.distance = rng.uniform(config.distance.lo, config.distance.hi);
  return p;
}

std::vector<CameraPose> sample_cameras(const SdsConfig& config, Rng& rng) {
  std::vector<CameraPose> poses;
  poses.reserve(config.batch_size);
  for (int i = 0; i < config.batch_size; ++i) poses.push_back(sample_camera(config, rng));
  return poses;
}

Camera make_camera(const CameraPose& pose, const SdsConfig& config) {
  return camera_from_spherical(pose.elevation, pose.azimuth, pose.distance, config.fov,
                               config.resolution);
}

std::pair<int, int> timestep_range(const SdsConfig& config, const NoiseSchedule& schedule) {
  const int n = schedule.steps;
  const int lo = std::max(1, static_cast<int>(std::ceil(config.t_frac.lo * n - 1e-9)));
  const int hi = std::min(n, static_cast<int>(std::floor(config.t_frac.hi * n + 1e-9)));
  if (lo > hi) throw ConfigError("sds.t_frac_range", "contains no integer timestep");
  return {lo, hi};
}

std::uint64_t step_seed(std::uint64_t run_seed, std::int64_t step) {
  return mix_seed({run_seed, 0x5354455053ULL, static_cast<std::uint64_t>(step)});
}

std::uint64_t field_seed(std::uint64_t run_seed) { return mix_seed({run_seed, 0x4649454c44ULL}); }

std::vector<ViewDraw> draw_views(const SdsConfig& config, const NoiseSchedule& schedule,
                                 std::uint64_t seed) {
  const auto [t_lo, t_hi] = timestep_range(config, schedule);
  std::vector<ViewDraw> draws(static_cast<std::size_t>(config.batch_size));
  for (int v = 0; v < config.batch_size; ++v) {
    Rng rng(mix_seed({seed, static_cast<std::uint64_t>(v)}));
    draws[v].pose = sample_camera(config, rng);
    draws[v].timestep = static_cast<int>(rng.uniform_int(t_lo, t_hi));
    draws[v].noise_seed = rng.next_u64();
  }
  return draws;
}

namespace {

struct ViewResult {
  std::vector<double> gradient;
  double residual = 0.0;
};

ViewResult view_gradient(const TextureField& field, const TriangleMesh& mesh,
                         const SdsConfig& config, const NoiseSchedule& schedule,
                         const GuidanceModel& guidance, const ViewDraw& draw) {
  const Camera camera = make_camera(draw.pose, config);
  const GBuffer gb = rasterize(mesh, camera);
  const Image x0 = shade(gb, field, config.background);
  const Image depth = normalize_depth(gb);

  Image eps(x0.width, x0.height, x0.channels);
  Rng rng(draw.noise_seed);
  for (double& e : eps.data) e = rng.normal();
  const Image xt = add_noise(x0, schedule, draw.timestep, eps);

  GuidanceInput in;
  in.noisy = &xt;
  in.timestep = draw.timestep;
  in.depth = config.depth_conditioning ? &depth : nullptr;
  in.condition = config.condition;
  in.negative_condition = config.negative_condition;
  in.view = ViewContext{&mesh, &camera, &gb, config.background};
  const Image eps_hat = predict_guided(guidance, in, config.guidance_scale);

  const double w = schedule.weight(draw.timestep);
  Image upstream(x0.width, x0.height, 3, 0.0);
  double sq = 0.0;
  std::size_t hits = 0;
  for (std::size_t p = 0; p < gb.pixel_count(); ++p) {
    if (!gb.hit(p)) continue;
    ++hits;
    for (int c = 0; c < 3; ++c) {
      const double r = w * (eps_hat.data[p * 3 + c] - eps.data[p * 3 + c]);
      upstream.data[p * 3 + c] = r;
      sq += r * r;
    }
  }
  ViewResult out;
  out.residual = hits ? sq / static_cast<double>(hits) : 0.0;
  out.gradient.assign(field.parameter_count(), 0.0);
  shade_backward(gb, field, upstream, out.gradient);
  return out;
}

}  // namespace

SdsGradient compute_sds_gradient(const TextureField& field, const TriangleMesh& mesh,
                                 const SdsConfig& config, const NoiseSchedule& schedule,
                                 const GuidanceModel& guidance, std::span<const ViewDraw> draws) {
  if (draws.empty()) throw Error("compute_sds_gradient: no views");
  std::vector<ViewResult> views(draws.size());
  parallel_for(draws.size(), config.threads, [&](std::size_t v) {
    views[v] = view_gradient(field, mesh, config, schedule, guidance, draws[v]);
  });

  SdsGradient out;
  out.gradient.assign(field.parameter_count(), 0.0);
  for (const auto& v : views) {
    for (std::size_t i = 0; i < out.gradient.size(); ++i) out.gradient[i] += v.gradient[i];
    out.residual += v.residual;
  }
  const auto n = static_cast<double>(draws.size());
  for (double& g : out.gradient) g /= n;
  out.residual /= n;
  for (const auto& d : draws) out.timesteps.push_back(d.timestep);
  return out;
}

TrainRecord sds_step(TextureField& field, const TriangleMesh& mesh, const SdsConfig& config,
                     const NoiseSchedule& schedule, const GuidanceModel& guidance, int step,
                     AdamState& adam) {
  const auto start = std::chrono::steady_clock::now();
  const auto draws = draw_views(config, schedule, step_seed(config.seed, step));
  SdsGradient g = compute_sds_gradient(field, mesh, config, schedule, guidance, draws);
  if (!std::isfinite(g.residual))
    throw NonFiniteError(fmt::format("non-finite SDS residual at step {}", step));

  TrainRecord rec;
  rec.step = step;
  rec.residual = g.residual;
  rec.timesteps = std::move(g.timesteps);
  for (const auto& d : draws) rec.cameras.push_back(d.pose);
  rec.grad_norm = config.clip_max_norm > 0.0 ? clip_global_norm(g.gradient, config.clip_max_norm)
                                             : global_norm(g.gradient);
  try {
    adam_step(field.parameters(), g.gradient, adam);
  } catch (const NonFiniteError& e) {
    throw NonFiniteError(fmt::format("step {}: {}", step, e.what()));
  }
  rec.elapsed_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

std::vector<Camera> turntable_cameras(int count, double elevation, double distance, double fov,
                                      int resolution) {
  std::vector<Camera> cams;
  for (int i = 0; i < count; ++i)
    cams.push_back(camera_from_spherical(elevation, 360.0 * i / count, distance, fov, resolution));
  return cams;
}

double hit_pixel_mae(const TextureField& field, const TriangleMesh& mesh,
                     const GuidanceModel& guidance, const SdsConfig& config,
                     std::span<const Camera> cameras) {
  double total = 0.0;
  std::size_t n = 0;
  for (const Camera& cam : cameras) {
    const GBuffer gb = rasterize(mesh, cam);
    const Image render = shade(gb, field, config.background);
    const Image depth = normalize_depth(gb);
    GuidanceInput in;
    in.noisy = &render;
    in.depth = config.depth_conditioning ? &depth : nullptr;
    in.condition = config.condition;
    in.view = ViewContext{&mesh, &cam, &gb, config.background};
    const Image target = guidance.mean_target(in);
    for (std::size_t p = 0; p < gb.pixel_count(); ++p) {
      if (!gb.hit(p)) continue;
      for (int c = 0; c < 3; ++c) total += std::abs(render.data[p * 3 + c] - target.data[p * 3 + c]);
      n += 3;
    }
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const TrainRecord> records,
                       bool wall_clock) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
  out << "step,residual,grad_norm,t_values,elapsed_ms\n";
  double elapsed = 0.0;
  for (const auto& r : records) {
    elapsed += r.elapsed_ms;
    out << fmt::format("{},{},{},{},", r.step, r.residual, r.grad_norm,
                       fmt::join(r.timesteps, ";"));
    if (wall_clock) out << fmt::format("{:.3f}", elapsed);
    out << '\n';
  }
  if (!out) throw Error(fmt::format("failed writing '{}'", path.string()));
}

namespace {

void write_snapshot(const std::filesystem::path& dir, int step, const TextureField& field,
                    const TriangleMesh& mesh, const SdsConfig& config, int views) {
  const double dist = 0.5 * (config.distance.lo + config.distance.hi);
  const auto cams = turntable_cameras(views, 30.0, dist, config.fov, config.resolution);
  for (std::size_t i = 0; i < cams.size(); ++i) {
    const GBuffer gb = rasterize(mesh, cams[i]);
    write_png(dir / fmt::format("step_{:06d}_view{}.png", step, i), shade(gb, field, config.background));
  }
}

}  // namespace

GenerateResult generate_texture(const TriangleMesh& mesh, const SdsConfig& config,
                                const HashGridConfig& grid, const NoiseSchedule& schedule,
                                const GuidanceModel& guidance, const GenerateOptions& options) {
  config.validate();
  GenerateResult result;
  result.field = init_random(grid, field_seed(config.seed));
  AdamState adam(result.field.parameter_count(), config.adam);

  const bool io = !options.output_dir.empty();
  const auto snap_dir = options.output_dir / "snapshots";
  if (io) std::filesystem::create_directories(snap_dir);

  result.records.reserve(static_cast<std::size_t>(config.steps));
  for (int step = 1; step <= config.steps; ++step) {
    result.records.push_back(sds_step(result.field, mesh, config, schedule, guidance, step, adam));
    if (options.on_step) options.on_step(result.records.back());
    if (io && options.snapshot_every > 0 && step % options.snapshot_every == 0)
      write_snapshot(snap_dir, step, result.field, mesh, config, options.snapshot_views);
  }

  if (mesh.has_uvs() && options.bake_resolution > 0)
    result.texture = bake_texture(result.field, mesh, options.bake_resolution).image;

  if (io) {
    write_metrics_csv(options.output_dir / "metrics.csv", result.records, options.log_wall_clock);
    save_checkpoint(result.field, options.output_dir / "field.ckpt");
    if (result.texture) write_png(options.output_dir / "texture.png", *result.texture);
  }
  return result;
}

std::vector<VarianceEstimate> gradient_variance_probe(const TextureField& field,
                                                      const TriangleMesh& mesh,
                                                      const SdsConfig& config,
                                                      const NoiseSchedule& schedule,
                                                      const GuidanceModel& guidance,
                                                      std::span<const int> batch_sizes,
                                                      int trials, std::uint64_t seed) {
  if (trials < 2) throw Error("gradient_variance_probe: trials must be >= 2");
  std::vector<VarianceEstimate> out;
  const std::size_t n = field.parameter_count();
  for (int b : batch_sizes) {
    SdsConfig cfg = config;
    cfg.batch_size = b;
    cfg.validate();
    std::vector<double> mean(n, 0.0);
    std::vector<double> m2(n, 0.0);
    for (int k = 0; k < trials; ++k) {
      const auto draws = draw_views(
          cfg, schedule, mix_seed({seed, static_cast<std::uint64_t>(b), static_cast<std::uint64_t>(k)}));
      const SdsGradient g = compute_sds_gradient(field, mesh, cfg, schedule, guidance, draws);
      const double count = k + 1;
      for (std::size_t i = 0; i < n; ++i) {
        const double delta = g.gradient[i] - mean[i];
        mean[i] += delta / count;
        m2[i] += delta * (g.gradient[i] - mean[i]);
      }
    }
    double trace = 0.0;
    for (double v : m2) trace += v;
    out.push_back({b, trials, trace / (trials - 1)});
  }
  return out;
}

double loglog_slope(std::span<const VarianceEstimate> est) {
  if (est.size() < 2) throw Error("loglog_slope: need at least two batch sizes");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& e : est) {
    const double x = std::log(static_cast<double>(e.batch_size));
    const double y = std::log(e.trace_variance);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(est.size());
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace sdstex
