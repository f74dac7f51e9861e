// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "psl/attack/attack.hpp"
#include "psl/data/dataset.hpp"
#include "psl/data/partition.hpp"
#include "psl/protocol/scheme.hpp"

namespace psl::cli {

inline constexpr int kSchemaVersion = 1;

struct DatasetConfig {
  std::string source = "synthetic";  // synthetic | series | idx | csv
  std::size_t samples = 2000;
  std::size_t test_samples = 1000;
  std::size_t classes = 10;  // 0 for file sources means "infer"
  nn::Shape shape{1, 12, 12};
  data::ClassificationSynth synth{1.0, 1.0, 1.0};
  std::size_t series_length = 64;
  data::SeriesSynth series;
  std::string train_images, train_labels, test_images, test_labels;  // idx
  std::string train_csv, test_csv;                                   // csv
  friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

struct NewcomerSection {
  std::vector<std::size_t> existing;
  std::vector<std::size_t> newcomers;
  protocol::NewcomerPolicy policy = protocol::NewcomerPolicy::train_new;
  bool cache_enabled = false;
  std::size_t phase1_epochs = 1;
  std::size_t phase2_epochs = 1;
  protocol::CacheConfig cache;
  friend bool operator==(const NewcomerSection&, const NewcomerSection&) = default;
};

struct AttackSection {
  attack::AttackScenario scenario;
  attack::DecoderTraining decoder;  // seed comes from seeds.attack
  std::size_t pgm_dumps = 0;        // reconstructions written per victim
  friend bool operator==(const AttackSection&, const AttackSection&) = default;
};

struct Seeds {
  std::uint64_t data = 1;
  std::uint64_t init = 2;
  std::uint64_t scheduler = 3;
  std::uint64_t attack = 4;
  friend bool operator==(const Seeds&, const Seeds&) = default;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  DatasetConfig dataset;
  data::PartitionSpec partition;  // seed is taken from seeds.data
  std::string preset = "tiny-conv2";
  protocol::SchemeConfig scheme;
  bool concurrent = false;
  bool verbose_ledger = false;
  std::optional<NewcomerSection> newcomer;
  std::optional<AttackSection> attack;
  Seeds seeds;
  std::string output_dir = "run";

  /// Throws ConfigError naming the offending field. Checks that do not need
  /// the data itself; building the run checks the rest.
  void validate() const;
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

nlohmann::json to_json(const ExperimentConfig& config);
/// Strict: unknown keys and wrong types are ConfigErrors naming the field.
ExperimentConfig config_from_json(const nlohmann::json& j);
/// Parses text; syntax errors are ConfigErrors carrying line and column.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string dump_config(const ExperimentConfig& config);

/// "data=7" style override of one seed.
void apply_seed_override(ExperimentConfig& config, const std::string& assignment);

/// Everything a run reads, built from a config.
struct Workspace {
  data::Dataset train;
  data::Dataset test;
  nn::SplitModelSpec model;
  std::vector<data::ClientShard> shards;
  data::PartitionSpec partition;

  protocol::Federation federation() const;
};

Workspace build_workspace(const ExperimentConfig& config);
protocol::RunOptions run_options(const ExperimentConfig& config);

}  // namespace psl::cli
