// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "psl/data/dataset.hpp"
#include "psl/data/partition.hpp"
#include "psl/nn/network.hpp"
#include "psl/protocol/cache.hpp"
#include "psl/protocol/cost.hpp"
#include "psl/protocol/messages.hpp"

namespace psl::protocol {

enum class Scheme { sl_vanilla, sl_roundrobin, sfl, msl, psl, psl_parallel, psl_cache };
enum class OrderPolicy { fixed, random };

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);
std::string to_string(OrderPolicy p);
OrderPolicy order_policy_from_string(const std::string& s);

/// True for schemes in which clients never exchange weights.
bool is_psl_family(Scheme s);

struct ParallelConfig {
  std::size_t instances = 2;
  /// Snapshots buffered before aggregation; 0 means `instances`.
  std::size_t snapshots_per_aggregation = 0;
  friend bool operator==(const ParallelConfig&, const ParallelConfig&) = default;
};

struct CacheConfig {
  /// Maximum entries; 0 means one entry per training sample in the run.
  std::size_t capacity = 0;
  /// Cache rows mixed in per incoming batch, as a fraction of its size.
  double sampling_fraction = 1.0;
  friend bool operator==(const CacheConfig&, const CacheConfig&) = default;
};

struct SchemeConfig {
  Scheme scheme = Scheme::psl;
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  double learning_rate = 0.05;
  OrderPolicy order = OrderPolicy::fixed;
  std::optional<ParallelConfig> parallel;  // psl_parallel only
  std::optional<CacheConfig> cache;        // psl_cache only

  /// Throws ConfigError naming the offending field.
  void validate(std::size_t client_count) const;
  friend bool operator==(const SchemeConfig&, const SchemeConfig&) = default;
};

struct RunOptions {
  SchemeConfig scheme;
  std::uint64_t init_seed = 1;
  std::uint64_t scheduler_seed = 2;
  bool verbose_ledger = false;
  /// Run parallel P-SL sessions on real threads. Results are identical to the
  /// sequential simulation.
  bool concurrent = false;
  /// Evaluate every client on the test set after each epoch.
  bool evaluate_each_epoch = true;
};

/// Read-only inputs shared by every participant.
struct Federation {
  const nn::SplitModelSpec* model = nullptr;
  const data::Dataset* train = nullptr;
  std::vector<data::ClientShard> shards;
  const data::Dataset* test = nullptr;

  std::size_t client_count() const { return shards.size(); }
};

struct ClientState {
  std::size_t client_id = 0;
  nn::ParameterSet params;  // u_i
};

struct ServerInstance {
  std::size_t instance_id = 0;
  nn::ParameterSet params;  // w_j
  bool busy = false;
};

/// One minibatch as it leaves a client's shard.
struct Batch {
  std::vector<std::size_t> indices;
  std::uint64_t batch_id = 0;
  std::size_t epoch = 0;
};

/// Where a step's messages and costs go.
struct Channel {
  MessageLedger* ledger;
  CostLedger* costs;
  void send(Message message, std::uint64_t items = 0);
};

struct ServerStepResult {
  GradientPayload gradients;  // rows of the incoming batch only
  double loss = 0.0;
  std::vector<CacheEntry> sampled;  // cache rows mixed in, in concatenation order
};

/// Plain server step (Alg. 1 box): forward, loss, backward, SGD.
ServerStepResult server_step(const nn::SplitModelSpec& model, ServerInstance& server,
                             const SmashedPayload& incoming, double learning_rate);

/// Cache-based server step. Cache rows are sampled from the pool as it stood
/// before this batch arrived, concatenated after the incoming rows, and the
/// incoming batch is then cached. Returns the first batch-size rows of the
/// split-layer gradient.
ServerStepResult server_step_cached(const nn::SplitModelSpec& model, ServerInstance& server,
                                    CachePool& pool, std::size_t client_id,
                                    const SmashedPayload& incoming, double learning_rate,
                                    std::uint64_t sample_seed);

struct StepResult {
  double loss = 0.0;
};

/// One vanilla-SL iteration between a client and a server instance. When
/// `pool` is non-null the server runs the cache-based step.
StepResult client_step(const Federation& fed, ClientState& client, ServerInstance& server,
                       const Batch& batch, double learning_rate, Channel channel,
                       CachePool* pool = nullptr, std::uint64_t cache_seed = 0);

struct EpochReport {
  std::size_t epoch = 0;
  std::vector<double> accuracy;   // per client, test set; empty if not evaluated
  std::vector<double> mean_loss;  // per client, training batches this epoch
};

/// Mutable state of a run.
struct RunState {
  std::vector<ClientState> clients;
  std::vector<ServerInstance> servers;
  std::optional<CachePool> cache;
  MessageLedger ledger;
  CostLedger costs;
  std::size_t epoch = 0;  // last completed epoch
  std::vector<nn::ParameterSet> snapshot_buffer;
  std::size_t last_client = 0;  // sl_roundrobin: holder of the freshest weights
  bool have_last_client = false;
};

/// Initial state for `options.scheme`. Clients in the P-SL family and mSL get
/// independent initializations; SL and SFL clients start from client 0's.
RunState init_run(const Federation& fed, const RunOptions& options);

/// Shard batches for one client in one epoch (seeded shuffle, last batch may
/// be short).
std::vector<Batch> make_batches(const Federation& fed, const RunOptions& options,
                                std::size_t client, std::size_t epoch);
std::vector<std::size_t> client_order(const RunOptions& options, std::size_t clients,
                                      std::size_t epoch);

EpochReport run_sl_epoch(const Federation& fed, RunState& state, const RunOptions& options);
EpochReport run_sl_roundrobin_epoch(const Federation& fed, RunState& state,
                                    const RunOptions& options);
EpochReport run_sfl_epoch(const Federation& fed, RunState& state, const RunOptions& options);
EpochReport run_msl_epoch(const Federation& fed, RunState& state, const RunOptions& options);
/// Sequential P-SL (Alg. 1); with a cache in `state` it runs Alg. 2 at the server.
EpochReport run_psl_epoch(const Federation& fed, RunState& state, const RunOptions& options,
                          const std::vector<std::size_t>* participants = nullptr);
EpochReport run_psl_parallel_epoch(const Federation& fed, RunState& state,
                                   const RunOptions& options);

/// sl_roundrobin: final u_N goes to every other client.
void broadcast_final_weights(const Federation& fed, RunState& state);

/// Server instance paired with `client` for inference.
const nn::ParameterSet& server_for(const RunState& state, Scheme scheme, std::size_t client);

double evaluate_accuracy(const nn::SplitModelSpec& model, const nn::ParameterSet& client,
                         const nn::ParameterSet& server, const data::Dataset& test);
std::vector<double> evaluate_clients(const Federation& fed, const RunState& state,
                                     Scheme scheme);

struct RunResult {
  RunState state;
  std::vector<EpochReport> epochs;
  std::vector<double> final_accuracy;
};

/// Full run: init, all epochs, final broadcast where applicable.
RunResult run_scheme(const Federation& fed, const RunOptions& options);

enum class NewcomerPolicy { train_all, train_new };
std::string to_string(NewcomerPolicy p);
NewcomerPolicy newcomer_policy_from_string(const std::string& s);

struct NewcomerConfig {
  std::vector<std::size_t> existing;
  std::vector<std::size_t> newcomers;
  NewcomerPolicy policy = NewcomerPolicy::train_new;
  bool cache_enabled = false;
  std::size_t phase1_epochs = 1;
  std::size_t phase2_epochs = 1;
  CacheConfig cache;
};

struct NewcomerReport {
  std::vector<double> before;  // per client after phase 1
  std::vector<double> after;   // per client after phase 2
  std::vector<EpochReport> epochs;
  double existing_before = 0.0;  // mean over existing clients
  double existing_after = 0.0;
  double newcomers_after = 0.0;
  RunState state;
};

/// Two-phase P-SL: existing clients train first, then phase 2 trains either
/// everyone or only newcomers, optionally with the server cache.
NewcomerReport run_newcomer_scenario(const Federation& fed, const RunOptions& options,
                                     const NewcomerConfig& config);

}  // namespace psl::protocol
