// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

// psl-sim: partition, train, attack and report over split-learning runs.
// Exit codes: 0 success, 2 config error, 3 runtime error.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "psl/cli/commands.hpp"
#include "psl/cli/config.hpp"
#include "psl/common/errors.hpp"

namespace {

constexpr int kConfigExit = 2;
constexpr int kRuntimeExit = 3;

struct Common {
  std::string config;
  std::string out;
  std::vector<std::string> seed_overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "experiment config (JSON)")->required();
  cmd->add_option("--out", c.out, "output directory (defaults to output_dir in the config)");
  cmd->add_option("--seed-override", c.seed_overrides, "KEY=VALUE for data, init, scheduler or attack")
      ->take_all();
}

psl::cli::ExperimentConfig load(const Common& c) {
  auto config = psl::cli::load_config(c.config);
  for (const auto& o : c.seed_overrides) psl::cli::apply_seed_override(config, o);
  config.validate();
  return config;
}

std::filesystem::path out_dir(const Common& c, const psl::cli::ExperimentConfig& config) {
  return c.out.empty() ? std::filesystem::path(config.output_dir) : std::filesystem::path(c.out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"split-learning simulator"};
  app.require_subcommand(1);

  Common common;
  bool deterministic = false, verbose_ledger = false;
  std::vector<std::string> runs;
  std::string report_out = "report";

  auto* partition = app.add_subcommand("partition", "write shard assignments and a summary");
  add_common(partition, common);
  auto* train = app.add_subcommand("train", "run a training scheme");
  add_common(train, common);
  train->add_flag("--deterministic", deterministic, "single-threaded, wall clock recorded as 0");
  train->add_flag("--verbose-ledger", verbose_ledger, "keep message payloads (needed by attack)");
  auto* attack = app.add_subcommand("attack", "reconstruct victims' inputs from a stored run");
  add_common(attack, common);
  auto* report = app.add_subcommand("report", "compare runs: CSV tables and SVG plots");
  report->add_option("runs", runs, "run directories")->required();
  report->add_option("--out", report_out, "report directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigExit;
  }

  try {
    if (*partition) {
      const auto config = load(common);
      const auto out = out_dir(common, config);
      psl::cli::cmd_partition(config, out);
      std::cout << "wrote " << (out / "partition.json").string() << '\n';
    } else if (*train) {
      auto config = load(common);
      if (verbose_ledger) config.verbose_ledger = true;
      const auto out = out_dir(common, config);
      const auto m = psl::cli::cmd_train(config, out, deterministic);
      std::cout << "mean final accuracy " << m["mean_final_accuracy"].get<double>() << ", hash "
                << m["hash"].get<std::string>() << ", wrote " << (out / "manifest.json").string() << '\n';
    } else if (*attack) {
      const auto config = load(common);
      const auto out = out_dir(common, config);
      const auto j = psl::cli::cmd_attack(config, out);
      std::cout << "cross-client SSIM " << j["cross_client_ssim"].get<double>() << ", wrote "
                << (out / "leakage.json").string() << '\n';
    } else if (*report) {
      std::vector<std::filesystem::path> dirs(runs.begin(), runs.end());
      psl::cli::cmd_report(dirs, report_out);
      std::cout << "wrote " << report_out << '\n';
    }
  } catch (const psl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeExit;
  }
  return 0;
}
