// raddich <command> --config <file> [--out <dir>] [--threads <k>]

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "raddich/cli/run.hpp"

int main(int argc, char** argv) {
  using namespace raddich;
  CLI::App app{"Radial spatial dynamics: dichotomies, eigenvalue scans and nonlinear solves"};
  std::vector<std::string> names;
  for (const auto& [name, unused] : cli::command_names()) names.push_back(name);
  std::string command, config_path, out_dir;
  int threads = 0;
  app.add_option("command", command, "command to run")->required()->check(CLI::IsMember(names));
  app.add_option("--config,-c", config_path, "JSON run configuration")->required();
  app.add_option("--out,-o", out_dir, "output directory (overrides out_dir)");
  app.add_option("--threads,-j", threads, "worker threads (overrides threads)")->check(CLI::PositiveNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  cli::RunConfig config;
  try {
    std::ifstream is(config_path);
    if (!is) fail(ErrorKind::io, "cannot read " + config_path);
    std::stringstream ss;
    ss << is.rdbuf();
    config = cli::parse_config(ss.str());
    if (cli::to_string(config.command) != command)
      fail(ErrorKind::config, "config command '" + cli::to_string(config.command) + "' does not match '" + command + "'");
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::exit_code(e.kind());
  }
  if (!out_dir.empty()) config.out_dir = out_dir;
  if (threads > 0) config.threads = threads;
  return cli::run_guarded(config);
}
