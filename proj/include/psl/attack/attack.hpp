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

#include "psl/data/dataset.hpp"
#include "psl/nn/network.hpp"
#include "psl/protocol/messages.hpp"

namespace psl::attack {

enum class AttackerRole { client, server };
std::string to_string(AttackerRole r);
AttackerRole attacker_role_from_string(const std::string& s);

struct AttackScenario {
  AttackerRole role = AttackerRole::client;
  /// Whose client model the decoder is trained against. For a server
  /// attacker this is the client it queries as a black box.
  std::size_t attacker_client = 0;
  std::vector<std::size_t> victims;
  std::size_t query_budget = 256;  // server attacker only

  /// Throws ConfigError naming the offending field.
  void validate(std::size_t client_count) const;
  friend bool operator==(const AttackScenario&, const AttackScenario&) = default;
};

/// Paired (smashed, raw) training data for the decoder.
struct AttackPairs {
  nn::Tensor smashed;  // [n, split shape]
  nn::Tensor raw;      // [n, sample shape]
  std::size_t size() const { return raw.rank() ? raw.dim(0) : 0; }
};

/// Attacker as a client: (f_u(x), x) for every sample it owns.
AttackPairs build_attack_dataset(const nn::NetworkSpec& client_spec, const nn::ParameterSet& u,
                                 const data::Dataset& attacker_data);

/// Attacker as the server: black-box queries of a client model over the first
/// `budget` samples of a query bag.
AttackPairs build_query_dataset(const nn::NetworkSpec& client_spec, const nn::ParameterSet& u,
                                const data::Dataset& query_bag, std::size_t budget);

/// Inverse of a client part: each conv becomes the stride-1 conv that undoes
/// its shape change (a transposed conv in disguise), each dense a dense back to
/// its input width, each flatten a reshape; relus between, sigmoid on top.
nn::NetworkSpec default_decoder(const nn::NetworkSpec& client_spec);

struct DecoderTraining {
  std::size_t epochs = 200;
  double learning_rate = 0.002;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  friend bool operator==(const DecoderTraining&, const DecoderTraining&) = default;
};

struct TrainedDecoder {
  nn::NetworkSpec spec;
  nn::ParameterSet params;
  double final_loss = 0.0;  // per-element MSE over all pairs after training
};

/// Momentum SGD on squared reconstruction error (summed over a sample, averaged over
/// the batch).
TrainedDecoder train_decoder(const nn::NetworkSpec& decoder, const AttackPairs& pairs,
                             const DecoderTraining& training);

/// Decoder forward pass, clamped to [0, 1].
nn::Tensor reconstruct(const TrainedDecoder& decoder, const nn::Tensor& smashed);

struct VictimLeakage {
  std::size_t client_id = 0;
  bool self = false;
  std::size_t samples = 0;
  double ssim = 0.0;
  double mse = 0.0;
  std::optional<double> dtw;  // 1D data only
  std::optional<double> dc;
};

struct LeakageReport {
  AttackScenario scenario;
  double decoder_loss = 0.0;
  std::vector<VictimLeakage> victims;
  std::optional<VictimLeakage> self_heldout;
  /// Means over victims that are not the attacker.
  double cross_ssim = 0.0;
  double cross_mse = 0.0;
  /// Self SSIM: held-out when available, else the attacker's own ledger entry.
  std::optional<double> self_ssim;

  nlohmann::json to_json() const;
};

/// Per-sample quality of `reconstructed` against `raw` (same shape, batch
/// leading).
VictimLeakage score_reconstruction(std::size_t client_id, const nn::Tensor& raw,
                                   const nn::Tensor& reconstructed);

/// Reconstructs every captured SmashedBatch of each victim and compares it
/// with the raw training samples it came from. Throws StateError when the
/// ledger carries no payloads for a victim.
LeakageReport evaluate_leakage(const TrainedDecoder& decoder, const AttackScenario& scenario,
                               const protocol::MessageLedger& ledger,
                               const data::Dataset& train);

/// Self-reconstruction on data the decoder never saw.
VictimLeakage self_reconstruction(const TrainedDecoder& decoder, const nn::NetworkSpec& client_spec,
                                  const nn::ParameterSet& u, std::size_t client_id,
                                  const data::Dataset& heldout);

/// Binary P5 greymap of one [H,W] or [1,H,W] sample in [0,1].
void write_pgm(const std::filesystem::path& path, const nn::Tensor& image);
std::string encode_pgm(const nn::Tensor& image);

}  // namespace psl::attack
