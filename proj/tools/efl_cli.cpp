// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "efl/cli/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Federated training with partial-model weak clients"};
  app.require_subcommand(1);

  efl::cli::RunOptions run;
  std::string out_dir = "out";
  auto* run_cmd = app.add_subcommand("run", "Run an experiment from a JSON config");
  run_cmd->add_option("config", run.config_path, "Experiment config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  run_cmd->add_option("--out", out_dir, "Output directory");
  run_cmd->add_option("--parallel-clients", run.parallel_clients,
                      "Clients trained concurrently (results do not depend on it)")
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--seed-override", run.seed_overrides,
                      "Replace a seed: data=, init=, rounds= or clients=<int>");

  std::string ckpt_dir, eval_path, svcca_out;
  std::size_t k = 4, eval_count = 500;
  auto* svcca_cmd =
      app.add_subcommand("svcca", "Pairwise-max SVCCA per layer over saved client checkpoints");
  svcca_cmd->add_option("dir", ckpt_dir, "Directory of round_<r>_client_<id>.ckpt files")
      ->required();
  svcca_cmd->add_option("--eval", eval_path, "IDX image file used as probe inputs")->required();
  svcca_cmd->add_option("--k", k, "Singular directions kept per layer");
  svcca_cmd->add_option("--eval-count", eval_count, "Probe images used (0 = all)");
  svcca_cmd->add_option("--out", svcca_out, "Write the CSV here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      run.out_dir = out_dir;
      efl::cli::run_command(run, std::cerr);
      return 0;
    }
    const auto rows = efl::cli::svcca_series(ckpt_dir, eval_path, k, eval_count);
    if (svcca_out.empty()) {
      efl::cli::write_svcca_rows(std::cout, rows);
    } else {
      std::ofstream out(svcca_out, std::ios::trunc);
      if (!out) throw std::runtime_error("cannot write " + svcca_out);
      efl::cli::write_svcca_rows(out, rows);
    }
    return 0;
  } catch (const efl::cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
