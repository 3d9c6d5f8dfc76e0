#pragma once

#include "sdstex/pipeline.hpp"
#include "sdstex/run_config.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace sdstex {

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitUsage = 2 };

// Command-line values that take precedence over the config file.
struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> output_dir;
  std::optional<int> threads;
  std::optional<std::string> axis;
  std::vector<std::string> values;
};

void apply_overrides(RunConfig& config, const CliOverrides& overrides);

struct AblationRow {
  std::string value;
  std::uint64_t seed = 0;
  double final_mae = 0.0;
  double residual_first = 0.0;
  double residual_mid = 0.0;
  double residual_final = 0.0;
  std::optional<std::size_t> coverage_zero_texels;  // absent without uvs
  std::optional<double> coverage_fraction;
  double grad_variance = 0.0;
};

// Sub-run seed: hash of (base seed, axis, value text).
std::uint64_t sweep_seed(std::uint64_t base_seed, const std::string& axis,
                         const std::string& value);

// Writes `rows` to `path` through a temporary file and a rename.
void write_summary_csv(const std::filesystem::path& path, const std::vector<AblationRow>& rows);

// Each command throws on failure; run_command maps exceptions to exit codes.
int cmd_generate(const RunConfig& config, std::ostream& out);
int cmd_ablate(const RunConfig& config, std::ostream& out);
int cmd_gradcheck(const RunConfig& config, std::ostream& out);
int cmd_views(const RunConfig& config, std::ostream& out);
int cmd_bake(const RunConfig& config, std::ostream& out);

// Loads the config, applies overrides and dispatches. Config, mesh and
// usage problems return kExitUsage; other failures kExitCheckFailed.
int run_command(const std::string& name, const std::filesystem::path& config_path,
                const CliOverrides& overrides, std::ostream& out, std::ostream& err);

}  // namespace sdstex
