// Command-line front end. Talks to the library only through the C API.
#include "descentlab/descentlab.h"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>

namespace {

int exit_code(dl_status st) {
  switch (st) {
    case DL_OK:
      return 0;
    case DL_ERR_CONFIG:
    case DL_ERR_HYPOTHESIS:
    case DL_ERR_INVALID_ARGUMENT:
    case DL_ERR_IO:
      return 2;
    case DL_ERR_DIVERGENCE:
      return 3;
    case DL_ERR_VERDICT_FAILED:
      return 4;
    default:
      return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"descentlab: first-order method experiments, bound verification and complexity tables"};
  app.set_version_flag("--version", std::string(dl_version()));
  app.require_subcommand(1);

  std::string config;
  std::string out_dir = ".";
  std::size_t jobs = 1;
  std::uint64_t seed_override = 0;

  app.add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--out-dir", out_dir, "directory for traces, manifests and reports");
  app.add_option("--jobs", jobs, "worker threads for independent trials")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed-override", seed_override, "replace the config seed");

  using Cmd = dl_status (*)(const char*, const dl_command_options*, char**);
  Cmd selected = nullptr;
  auto add = [&](const char* name, const char* help, Cmd fn) {
    app.add_subcommand(name, help)->fallthrough()->callback([&selected, fn] { selected = fn; });
  };
  add("run", "run an experiment and write the trace CSV plus manifest", &dl_cmd_run);
  add("verify", "check a convergence bound and print the verdict JSON", &dl_cmd_verify);
  add("table", "print the iteration-complexity table", &dl_cmd_table);
  add("suite", "run the property suite and print its report", &dl_cmd_suite);

  CLI11_PARSE(app, argc, argv);

  dl_command_options opts{};
  opts.out_dir = out_dir.c_str();
  opts.jobs = jobs;
  opts.has_seed_override = seed_opt->count() > 0 ? 1 : 0;
  opts.seed_override = seed_override;

  char* output = nullptr;
  const dl_status st = selected(config.c_str(), &opts, &output);
  if (output) {
    std::fputs(output, stdout);
    std::fflush(stdout);
    dl_string_free(output);
  }
  if (st != DL_OK) std::cerr << "descentlab: " << dl_status_name(st) << ": " << dl_last_error() << "\n";
  return exit_code(st);
}
