#include "sdstex/harness.hpp"

#include "sdstex/baking.hpp"
#include "sdstex/gradcheck.hpp"
#include "sdstex/image.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include <cctype>
#include <cmath>
#include <fstream>
#include <ostream>

namespace sdstex {
namespace {

namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
}

void echo_config(const RunConfig& config, const fs::path& dir) {
  fs::create_directories(dir);
  write_text(dir / "config.yaml", dump_run_config(config));
}

void write_sidecar(const RunConfig& config, const fs::path& dir) {
  nlohmann::ordered_json j;
  j["mesh"] = config.mesh.string();
  j["config_hash"] = fmt::format("fnv1a64:{:016x}", fnv1a64(dump_run_config(config)));
  j["seed"] = config.sds.seed;
  j["tool_version"] = kToolVersion;
  write_text(dir / "texture.json", j.dump(2) + "\n");
}

fs::path require_output(const RunConfig& config) {
  if (config.output_dir.empty()) throw ConfigError("output", "no output directory given");
  return config.output_dir;
}

std::vector<Camera> eval_cameras(const RunConfig& config) {
  const auto& d = config.sds;
  return turntable_cameras(config.generate.eval_views, 30.0,
                           0.5 * (d.distance.lo + d.distance.hi), d.fov, d.resolution);
}

struct RunOutput {
  GenerateResult result;
  double final_mae = 0.0;
};

RunOutput run_generate(const RunConfig& config, const TriangleMesh& mesh,
                       const NoiseSchedule& schedule, const GuidanceModel& guidance) {
  const fs::path dir = require_output(config);
  echo_config(config, dir);
  GenerateOptions opt;
  opt.output_dir = dir;
  opt.snapshot_every = config.generate.snapshot_every;
  opt.snapshot_views = config.generate.snapshot_views;
  opt.bake_resolution = config.generate.bake_resolution;
  opt.log_wall_clock = config.generate.wall_clock;
  RunOutput out{generate_texture(mesh, config.sds, config.grid, schedule, guidance, opt)};
  if (out.result.texture) write_sidecar(config, dir);
  const auto cams = eval_cameras(config);
  out.final_mae = hit_pixel_mae(out.result.field, mesh, guidance, config.sds, cams);
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

std::string dir_label(const std::string& value) {
  std::string out;
  for (char c : value) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-';
    if (keep) out += c;
    else if (!out.empty() && out.back() != '_') out += '_';
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out.empty() ? "value" : out;
}

TextureField constant_field(const HashGridConfig& grid, const Vec3& color) {
  TextureField f(grid);
  for (int c = 0; c < 3; ++c) {
    const double v = color[c];
    if (!(v > 0.0 && v < 1.0)) throw ConfigError("views.constant_color", "entries must be in (0, 1)");
    f.parameters()[f.bias_offset(c)] = std::log(v / (1.0 - v));
  }
  return f;
}

}  // namespace

void apply_overrides(RunConfig& config, const CliOverrides& o) {
  if (o.seed) config.sds.seed = *o.seed;
  if (o.output_dir) config.output_dir = fs::absolute(*o.output_dir).lexically_normal();
  if (o.threads) {
    if (*o.threads < 1) throw ConfigError("threads", "must be >= 1");
    config.sds.threads = *o.threads;
  }
  if (o.axis) config.ablate.axis = *o.axis;
  if (!o.values.empty()) config.ablate.values = o.values;
}

std::uint64_t sweep_seed(std::uint64_t base_seed, const std::string& axis,
                         const std::string& value) {
  return mix_seed({base_seed, fnv1a64(axis), fnv1a64(value)});
}

void write_summary_csv(const fs::path& path, const std::vector<AblationRow>& rows) {
  std::string text =
      "value,seed,final_mae,residual_first,residual_mid,residual_final,coverage_zero_texels,"
      "coverage_fraction,grad_variance\n";
  for (const auto& r : rows) {
    text += fmt::format("{},{},{},{},{},{},{},{},{}\n", csv_field(r.value), r.seed, r.final_mae,
                        r.residual_first, r.residual_mid, r.residual_final,
                        r.coverage_zero_texels ? fmt::format("{}", *r.coverage_zero_texels) : "",
                        r.coverage_fraction ? fmt::format("{}", *r.coverage_fraction) : "",
                        r.grad_variance);
  }
  fs::path tmp = path;
  tmp += ".tmp";
  write_text(tmp, text);
  fs::rename(tmp, path);
}

int cmd_generate(const RunConfig& config, std::ostream& out) {
  const TriangleMesh mesh = load_run_mesh(config);
  const NoiseSchedule schedule = build_schedule(config.schedule);
  const auto guidance = build_guidance(config, schedule);
  const RunOutput run = run_generate(config, mesh, schedule, *guidance);
  const auto& rec = run.result.records;
  fmt::print(out, "generate: {} steps, final residual {}, hit-pixel MAE {:.6f}\n", rec.size(),
             rec.empty() ? 0.0 : rec.back().residual, run.final_mae);
  fmt::print(out, "wrote {}\n", config.output_dir.string());
  return kExitOk;
}

int cmd_ablate(const RunConfig& config, std::ostream& out) {
  const auto& a = config.ablate;
  if (a.axis.empty()) throw ConfigError("ablate.axis", "no sweep axis given");
  if (a.values.empty()) throw ConfigError("ablate.values", "no sweep values given");
  if (a.variance_trials < 2) throw ConfigError("ablate.variance_trials", "must be >= 2");
  const fs::path root = require_output(config);

  // Validate every value up front so a bad entry fails before any run.
  std::vector<RunConfig> subs;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    RunConfig sub = config;
    apply_ablation(sub, a.axis, a.values[i]);
    sub.sds.seed = sweep_seed(config.sds.seed, a.axis, a.values[i]);
    sub.output_dir = root / fmt::format("{:02d}_{}", i, dir_label(a.values[i]));
    subs.push_back(std::move(sub));
  }

  const TriangleMesh mesh = load_run_mesh(config);
  const NoiseSchedule schedule = build_schedule(config.schedule);
  const auto guidance = build_guidance(config, schedule);
  const TextureField probe_field = init_random(config.grid, field_seed(config.sds.seed));
  echo_config(config, root);

  std::vector<AblationRow> rows;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    const RunConfig& sub = subs[i];
    const RunOutput run = run_generate(sub, mesh, schedule, *guidance);
    AblationRow row;
    row.value = a.values[i];
    row.seed = sub.sds.seed;
    row.final_mae = run.final_mae;
    const auto& rec = run.result.records;
    if (!rec.empty()) {
      row.residual_first = rec.front().residual;
      row.residual_mid = rec[(rec.size() - 1) / 2].residual;
      row.residual_final = rec.back().residual;
    }
    if (mesh.has_uvs()) {
      std::vector<Camera> cams;
      for (const auto& r : rec)
        for (const auto& pose : r.cameras)
          if (static_cast<int>(cams.size()) < a.coverage_views)
            cams.push_back(make_camera(pose, sub.sds));
      const CoverageMap cov = coverage_map(mesh, cams, a.coverage_resolution);
      row.coverage_zero_texels = cov.zero_view_texels();
      row.coverage_fraction = cov.covered_fraction();
    }
    const int b = sub.sds.batch_size;
    row.grad_variance = gradient_variance_probe(probe_field, mesh, sub.sds, schedule, *guidance,
                                                std::span<const int>(&b, 1), a.variance_trials,
                                                sub.sds.seed)
                            .front()
                            .trace_variance;
    fmt::print(out, "{} = {}: final MAE {:.6f}, grad variance {:.6g}\n", a.axis, row.value,
               row.final_mae, row.grad_variance);
    rows.push_back(std::move(row));
  }
  write_summary_csv(root / "summary.csv", rows);
  fmt::print(out, "wrote {}\n", (root / "summary.csv").string());
  return kExitOk;
}

int cmd_gradcheck(const RunConfig& config, std::ostream& out) {
  const TriangleMesh mesh = load_run_mesh(config);
  const auto& g = config.gradcheck;
  if (g.trials < 1) throw ConfigError("gradcheck.trials", "must be >= 1");
  if (g.params_per_trial < 1) throw ConfigError("gradcheck.params_per_trial", "must be >= 1");
  if (!(g.step > 0)) throw ConfigError("gradcheck.step", "must be positive");
  if (g.stencil != 2 && g.stencil != 4 && g.stencil != 6)
    throw ConfigError("gradcheck.stencil", "must be 2, 4 or 6");
  GradcheckOptions opt;
  opt.trials = g.trials;
  opt.params_per_trial = g.params_per_trial;
  opt.stencil = g.stencil;
  opt.step = g.step;
  opt.tolerance = g.tolerance;
  opt.resolution = g.resolution;
  opt.seed = config.sds.seed;
  opt.inject_sign_flip = g.inject_sign_flip;
  const GradcheckReport report = run_gradcheck(mesh, config.grid, opt);

  std::string text;
  for (const auto& s : report.suites)
    text += fmt::format("{:<12} checked {:>5}  max relative error {:.3e}  tolerance {:.1e}  {}\n",
                        s.name, s.checked, s.max_relative_error, g.tolerance,
                        s.passed ? "ok" : "FAILED");
  out << text;
  if (!config.output_dir.empty()) {
    echo_config(config, config.output_dir);
    write_text(config.output_dir / "gradcheck.txt", text);
  }
  return report.passed() ? kExitOk : kExitCheckFailed;
}

int cmd_views(const RunConfig& config, std::ostream& out) {
  const auto& v = config.views;
  if (v.count == 0) {
    fmt::print(out, "views: nothing to render\n");
    return kExitOk;
  }
  const fs::path dir = require_output(config);
  const TriangleMesh mesh = load_run_mesh(config);
  TextureField field;
  if (!v.checkpoint.empty()) field = load_checkpoint(v.checkpoint);
  else if (v.constant_color) field = constant_field(config.grid, *v.constant_color);
  else field = init_random(config.grid, field_seed(config.sds.seed));

  echo_config(config, dir);
  const int res = v.resolution > 0 ? v.resolution : config.sds.resolution;
  const auto cams = turntable_cameras(v.count, v.elevation, v.distance, config.sds.fov, res);
  for (std::size_t i = 0; i < cams.size(); ++i) {
    const GBuffer gb = rasterize(mesh, cams[i]);
    write_png(dir / fmt::format("view_{:03d}.png", i), shade(gb, field, config.sds.background));
    write_depth_png(dir / fmt::format("depth_{:03d}.png", i), normalize_depth(gb));
  }
  fmt::print(out, "views: wrote {} RGB/depth pairs to {}\n", cams.size(), dir.string());
  return kExitOk;
}

int cmd_bake(const RunConfig& config, std::ostream& out) {
  if (config.bake.checkpoint.empty()) throw ConfigError("bake.checkpoint", "no checkpoint given");
  if (config.bake.resolution < 1) throw ConfigError("bake.resolution", "must be >= 1");
  const fs::path dir = require_output(config);
  const TriangleMesh mesh = load_run_mesh(config);
  if (!mesh.has_uvs()) throw ConfigError("mesh", "mesh has no uv coordinates; baking needs them");
  const TextureField field = load_checkpoint(config.bake.checkpoint);
  const BakedTexture baked = bake_texture(field, mesh, config.bake.resolution);
  echo_config(config, dir);
  write_png(dir / "texture.png", baked.image);
  write_sidecar(config, dir);
  fmt::print(out, "bake: {}x{} atlas, {} covered texels, wrote {}\n", config.bake.resolution,
             config.bake.resolution, baked.raster.covered_count(),
             (dir / "texture.png").string());
  return kExitOk;
}

int run_command(const std::string& name, const fs::path& config_path,
                const CliOverrides& overrides, std::ostream& out, std::ostream& err) {
  try {
    RunConfig config = load_run_config(config_path);
    apply_overrides(config, overrides);
    if (name == "generate") return cmd_generate(config, out);
    if (name == "ablate") return cmd_ablate(config, out);
    if (name == "gradcheck") return cmd_gradcheck(config, out);
    if (name == "views") return cmd_views(config, out);
    if (name == "bake") return cmd_bake(config, out);
    fmt::print(err, "unknown command '{}'\n", name);
    return kExitUsage;
  } catch (const ConfigError& e) {
    fmt::print(err, "config error: {}\n", e.what());
    return kExitUsage;
  } catch (const ParseError& e) {
    fmt::print(err, "mesh parse error: {}\n", e.what());
    return kExitUsage;
  } catch (const IndexError& e) {
    fmt::print(err, "mesh index error: {}\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitCheckFailed;
  }
}

}  // namespace sdstex
