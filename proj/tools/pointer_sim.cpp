// SPDX-License-Identifier: Apache-2.0
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "psim/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"pointer-sim: schedule and memory simulator for point-cloud accelerators"};
  app.require_subcommand(1);

  std::string run_config;
  auto* run = app.add_subcommand("run", "simulate all configured variants and write reports");
  run->add_option("--config", run_config, "experiment config (JSON, or a manifest.json)")
      ->required();

  std::string sweep_config;
  std::vector<std::size_t> sweep_caps;
  auto* sweep = app.add_subcommand("sweep-buffer", "hit-rate curves over buffer capacities");
  sweep->add_option("--config", sweep_config, "experiment config (JSON, or a manifest.json)")
      ->required();
  sweep->add_option("--capacities", sweep_caps,
                    "override sweep capacities (entries, space separated)");

  std::string toy = "fig2";
  auto* golden = app.add_subcommand("golden", "print a worked scheduling example");
  golden->add_option("toy", toy, "which example (default fig2)");

  std::string validate_config;
  auto* validate = app.add_subcommand("validate-config", "check a config and report the"
                                      " crossbar allocation");
  validate->add_option("--config", validate_config, "experiment config (JSON)")->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return psim::exp::cmd_run(run_config);
  if (sweep->parsed()) return psim::exp::cmd_sweep_buffer(sweep_config, sweep_caps);
  if (golden->parsed()) return psim::exp::cmd_golden(toy, std::cout);
  if (validate->parsed()) return psim::exp::cmd_validate_config(validate_config);
  return 1;
}
