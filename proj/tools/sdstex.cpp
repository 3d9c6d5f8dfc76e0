#include "sdstex/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Texture generation by score distillation over a hash-grid texture field"};
  app.set_version_flag("--version", sdstex::kToolVersion);
  app.require_subcommand(1);

  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  std::optional<std::string> axis;
  std::vector<std::string> values;

  const std::vector<std::pair<const char*, const char*>> commands{
      {"generate", "run SDS texture generation"},
      {"ablate", "sweep one parameter and write summary.csv"},
      {"gradcheck", "finite-difference checks of the analytic gradients"},
      {"views", "render turntable RGB and depth images"},
      {"bake", "bake a field checkpoint into a UV atlas"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config, "run config (YAML)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("-o,--out", out, "override the output directory");
    sub->add_option("-j,--threads", threads, "worker threads");
    if (std::string(name) == "ablate") {
      sub->add_option("--axis", axis, "sweep axis");
      sub->add_option("--value", values, "sweep value as YAML, repeatable (e.g. --value '[10, 80]')");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : sdstex::kExitUsage;
  }

  sdstex::CliOverrides o;
  o.seed = seed;
  if (out) o.output_dir = *out;
  o.threads = threads;
  o.axis = axis;
  o.values = values;
  const std::string name = app.get_subcommands().front()->get_name();
  return sdstex::run_command(name, config, o, std::cout, std::cerr);
}
