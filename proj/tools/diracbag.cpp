#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "diracbag/cli.hpp"

using namespace diracbag;

int main(int argc, char** argv) {
  CLI::App app{"Dirac eigenvalue curves on balls and smooth surfaces"};
  std::string config_path, out, cache_flag;
  int threads = 0;
  app.add_option("--config", config_path, "key=value configuration file")->required();
  app.add_option("--out", out, "output path (overrides 'out'; '-' for stdout)");
  app.add_option("--threads", threads, "worker threads for scans")->check(CLI::PositiveNumber);
  app.add_option("--cache-dir", cache_flag, "directory for the Bessel zero cache");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? exit_ok : exit_usage;
  }

  RunConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const ConfigError& e) {
    std::cerr << config_path << ": " << e.what() << '\n';
    return exit_usage;
  } catch (const DomainError& e) {
    std::cerr << config_path << ": " << e.what() << '\n';
    return exit_usage;
  }
  if (!out.empty()) cfg.out = out;
  if (threads > 0) cfg.threads = threads;
  cfg.cache_dir = resolve_cache_dir(cache_flag, cfg.cache_dir);

  std::string cache_file;
  if (!cfg.cache_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.cache_dir, ec);
    cache_file = zero_cache_path(cfg.cache_dir);
    zero_cache().load(cache_file);
  }

  int rc = exit_ok;
  try {
    rc = run(cfg);
  } catch (const NoEigenvalueError& e) {
    std::cerr << "bie_spectrum: " << e.what() << '\n';
    return exit_solver;
  } catch (const BesselPoleError& e) {
    std::cerr << "halfint_bessel: " << e.what() << '\n';
    return exit_solver;
  } catch (const DomainError& e) {
    std::cerr << mode_name(cfg.mode) << ": " << e.what() << '\n';
    return exit_solver;
  } catch (const std::exception& e) {
    std::cerr << mode_name(cfg.mode) << ": " << e.what() << '\n';
    return exit_solver;
  }

  if (!cache_file.empty()) {
    try {
      zero_cache().save(cache_file);
    } catch (const std::exception& e) {
      std::cerr << "warning: " << e.what() << '\n';
    }
  }
  return rc;
}
