#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "magloop/commands.hpp"
#include "magloop/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"magloop: periodic magnetic geodesics on surfaces"};
  app.require_subcommand(1, 1);

  std::string config_path;
  magloop::RunOptions opts;
  opts.log = &std::cout;
  std::uint64_t seed = 0;
  int threads = 0;

  const std::pair<const char*, const char*> commands[] = {
      {"simulate", "integrate a trajectory and write trajectory.csv"},
      {"find", "search for periodic orbits and compute their index reports"},
      {"index", "recompute index reports for stored orbit records"},
      {"mane", "bracket the critical values c and c_u"},
      {"scan", "Poincare scan for fixed points of the return map"},
      {"report", "validate a results file and tabulate its orbit records"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opts.out_dir, "output directory")->capture_default_str();
    sub->add_option("--seed", seed, "random seed (overrides the config)");
    sub->add_option("--threads", threads, "worker threads (overrides the config)")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : magloop::kExitConfig;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  const CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--seed")) opts.seed = seed;
  if (sub->count("--threads")) opts.threads = threads;

  try {
    const auto cfg = magloop::RunConfig::load(config_path);
    return magloop::run_command(name, cfg, opts).exit_code;
  } catch (const magloop::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return magloop::exit_code_for(e.kind());
  }
}
