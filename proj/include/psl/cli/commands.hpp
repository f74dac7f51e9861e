// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "psl/attack/attack.hpp"
#include "psl/cli/config.hpp"

namespace psl::cli {

inline constexpr int kManifestVersion = 1;
inline constexpr const char* kEngineVersion = "0.1.0";

std::uint64_t fnv1a64(std::string_view bytes);

/// Hex FNV-1a of the manifest with `hash` and `wall_clock_seconds` removed,
/// so it covers the config snapshot and every numeric result.
std::string manifest_hash(const nlohmann::json& manifest);

/// Reads manifest.json from a run directory. Throws FormatError on a version
/// or hash mismatch.
nlohmann::json load_manifest(const std::filesystem::path& run_dir);

/// Writes partition.json (summary) and shards.json (indices). Returns the summary.
nlohmann::json cmd_partition(const ExperimentConfig& config, const std::filesystem::path& out);

/// Runs the configured scheme (or newcomer scenario) and writes manifest.json,
/// config.json, accuracy.csv, costs.csv, ledger.jsonl and checkpoints/. In
/// deterministic mode threads are off and the wall clock is recorded as 0, so
/// the manifest file itself is byte-for-byte reproducible.
nlohmann::json cmd_train(ExperimentConfig config, const std::filesystem::path& out,
                         bool deterministic);

struct AttackOutcome {
  attack::TrainedDecoder decoder;
  attack::LeakageReport report;
};

/// Attack pipeline: trains the decoder on the attacker's view and scores
/// every victim's captured smashed data.
AttackOutcome run_attack(const Workspace& workspace, const AttackSection& section,
                         std::uint64_t seed, const nn::ParameterSet& attacker_u,
                         const protocol::MessageLedger& ledger);

/// Writes leakage.json (and PGM dumps when asked) and records the leakage
/// summary in the run's manifest.
nlohmann::json cmd_attack(const ExperimentConfig& config, const std::filesystem::path& run_dir);

/// Comparison tables and SVG plots over one or more run directories.
void cmd_report(const std::vector<std::filesystem::path>& run_dirs,
                const std::filesystem::path& out);

}  // namespace psl::cli
