#pragma once

#include "sdstex/guidance.hpp"
#include "sdstex/mesh.hpp"
#include "sdstex/pipeline.hpp"
#include "sdstex/texture_field.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sdstex {

// kind: solid (colors[0]), checkerboard (colors[0], colors[1], cells),
// gradient (colors[0] -> colors[1] along axis) or image (UV atlas PNG).
struct TargetSpec {
  std::string kind = "solid";
  std::vector<Vec3> colors{Vec3(0.5, 0.5, 0.5)};
  double cells = 2.0;
  int axis = 1;
  std::filesystem::path path;
};

struct ModeSpec {
  double weight = 1.0;
  TargetSpec target;
};

// One condition id. Which members are used depends on the oracle kind.
struct ConditionSpec {
  TargetSpec target;            // delta
  std::vector<ModeSpec> modes;  // mixture
  TargetSpec near_target;       // depth_routed
  TargetSpec far_target;
  double threshold = 0.0;
  bool invert = false;
};

struct OracleSpec {
  std::string kind = "delta";  // delta | mixture | depth_routed
  std::map<std::string, ConditionSpec> conditions;
  bool fallback_without_depth = false;
};

struct ScheduleSpec {
  int steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 2e-2;
  std::string weighting = "one_minus_alpha_bar";  // or "unit"
};

struct GenerateSection {
  int snapshot_every = 100;
  int snapshot_views = 4;
  int bake_resolution = 512;
  int eval_views = 8;
  bool wall_clock = false;
};

struct AblateSection {
  std::string axis;
  std::vector<std::string> values;  // YAML flow text of each value
  int variance_trials = 64;
  int coverage_resolution = 128;
  int coverage_views = 64;  // first cameras drawn by each sub-run
  std::string negative_condition = "negative";
};

struct GradcheckSection {
  int trials = 50;
  int params_per_trial = 20;
  int stencil = 6;
  double step = 0.03;
  double tolerance = 1e-5;
  int resolution = 32;
  bool inject_sign_flip = false;
};

struct ViewsSection {
  int count = 8;
  double elevation = 30.0;
  double distance = 1.25;
  int resolution = 0;  // 0: sds.resolution
  std::optional<Vec3> constant_color;
  std::filesystem::path checkpoint;
};

struct BakeSection {
  std::filesystem::path checkpoint;
  int resolution = 512;
};

struct RunConfig {
  std::filesystem::path mesh;
  std::filesystem::path output_dir;
  SdsConfig sds;  // sds.seed is the top-level `seed` key
  HashGridConfig grid;
  ScheduleSpec schedule;
  OracleSpec oracle;
  GenerateSection generate;
  AblateSection ablate;
  GradcheckSection gradcheck;
  ViewsSection views;
  BakeSection bake;
};

// Relative paths are resolved against `base_dir`. Throws ConfigError with
// the dotted key path of the offending entry.
RunConfig parse_run_config(std::string_view yaml, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& file);

// Effective config as YAML, headed by the tool version. Parsing the output
// yields an identical config.
std::string dump_run_config(const RunConfig& config);

NoiseSchedule build_schedule(const ScheduleSpec& spec);
TargetPtr build_target(const TargetSpec& spec);
std::unique_ptr<GuidanceModel> build_guidance(const RunConfig& config,
                                              const NoiseSchedule& schedule);

// Loads and normalizes the configured mesh; ConfigError("mesh") when unset.
TriangleMesh load_run_mesh(const RunConfig& config);

const std::vector<std::string>& ablation_axes();
// Applies one sweep value (YAML text) to the config; ConfigError on an
// unknown axis (listing the valid ones) or a malformed value.
void apply_ablation(RunConfig& config, const std::string& axis, const std::string& value);

std::uint64_t fnv1a64(std::string_view data);

}  // namespace sdstex
