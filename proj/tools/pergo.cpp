#include "pergo/config.hpp"
#include "pergo/parallel.hpp"
#include "pergo/runner.hpp"

#include <CLI11.hpp>

#include <iostream>

int
main(int argc, char** argv)
{
  CLI::App app{ "Simulate periodic SDEs, check ergodicity conditions and validate invariant laws." };
  app.set_version_flag("--version", pergo::version);

  std::string command, config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  double level = 0.01;

  app.add_option("command", command, "check | simulate | ergodic | invariant-test | report")
    ->required()
    ->check(CLI::IsMember(pergo::command_names()));
  app.add_option("--config", config_path, "INI config file")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (overrides [output] directory)");
  app.add_option("--seed", seed, "master seed (overrides [plan] seed)");
  app.add_option("--threads", threads, "worker threads; affects speed only (fallback: PERGO_THREADS)")
    ->check(CLI::PositiveNumber);
  app.add_option("--level", level, "KS test level")->check(CLI::IsMember({ 0.05, 0.01 }));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (threads)
      pergo::set_thread_count(*threads);
    const pergo::RunConfig cfg = pergo::load_config(config_path);
    pergo::RunOptions opt;
    opt.out_dir = out_dir;
    opt.seed = seed;
    opt.level = level;
    return pergo::run_command(command, cfg, opt, std::cout);
  } catch (const pergo::ConfigError& err) {
    std::cerr << config_path << ": invalid config\n";
    for (const auto& m : err.messages())
      std::cerr << "  " << config_path << ":" << m << '\n';
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
}
