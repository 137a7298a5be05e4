#include <iostream>

#include <CLI11.hpp>

#include "cloakopt/scenario.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Optimal-control design of passive thermal cloaks"};
  cloakopt::CommandOptions opts;
  std::string config, out, design;
  double sx = 0.0, sy = 0.0;
  int threads = 1;

  app.add_option("command", opts.command, "reference | uncloaked | optimize | evaluate | transfer | check-gradient")
      ->required()
      ->check(CLI::IsMember({"reference", "uncloaked", "optimize", "evaluate", "transfer", "check-gradient"}));
  app.add_option("--config", config, "scenario file")->required();
  auto* out_opt = app.add_option("--out", out, "output directory (default: the config's `output`)");
  auto* design_opt = app.add_option("--design", design, "design file for evaluate/transfer; warm start for optimize");
  auto* sx_opt = app.add_option("--source-x", sx, "override the source centre x");
  auto* sy_opt = app.add_option("--source-y", sy, "override the source centre y");
  auto* threads_opt = app.add_option("--threads", threads, "worker threads (CLOAKOPT_THREADS wins)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  opts.config = config;
  if (*out_opt) opts.out = out;
  if (*design_opt) opts.design = design;
  if (*sx_opt) opts.source_x = sx;
  if (*sy_opt) opts.source_y = sy;
  if (*threads_opt) opts.threads = threads;
  return cloakopt::run_command(opts, std::cout, std::cerr);
}
