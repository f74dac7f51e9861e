// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "psl/protocol/scheme.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <set>
#include <thread>

#include "psl/common/errors.hpp"
#include "psl/common/rng.hpp"
#include "psl/metrics/metrics.hpp"

namespace psl::protocol {
namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kClientInit = 0x11;
constexpr std::uint64_t kServerInit = 0x12;
constexpr std::uint64_t kBatches = 0x21;
constexpr std::uint64_t kOrder = 0x22;
constexpr std::uint64_t kInterleave = 0x23;
constexpr std::uint64_t kAssign = 0x24;
constexpr std::uint64_t kCacheSample = 0x25;

bool shares_weights(Scheme s) {
  return s == Scheme::sl_vanilla || s == Scheme::sl_roundrobin || s == Scheme::sfl;
}

void check_federation(const Federation& fed) {
  if (fed.model == nullptr || fed.train == nullptr) {
    throw StateError("federation needs a model and a training set");
  }
  if (fed.shards.empty()) throw ConfigError("partition.clients", "no client shards");
  if (fed.train->sample_shape() != fed.model->network().input_shape()) {
    throw ConfigError("model", "architecture input " +
                                   nn::shape_to_string(fed.model->network().input_shape()) +
                                   " does not match data samples " +
                                   nn::shape_to_string(fed.train->sample_shape()));
  }
}

void check_incoming(const nn::SplitModelSpec& model, const SmashedPayload& in) {
  const auto& a = in.activations;
  if (a.rank() < 2) throw ProtocolError("smashed batch without a batch axis");
  const nn::Shape row(a.shape().begin() + 1, a.shape().end());
  if (row != model.split_shape()) {
    throw ProtocolError("smashed data shape " + nn::shape_to_string(row) +
                        " does not match server input " +
                        nn::shape_to_string(model.split_shape()));
  }
  if (a.dim(0) != in.labels.size()) {
    throw ProtocolError("smashed batch has " + std::to_string(a.dim(0)) + " rows but " +
                        std::to_string(in.labels.size()) + " labels");
  }
}

void begin_epoch(RunState& state, EpochReport& report, std::size_t clients) {
  state.epoch += 1;
  report.epoch = state.epoch;
  report.mean_loss.assign(clients, 0.0);
}

// Trains `client` over its shard for the current epoch against `server`.
double train_session(const Federation& fed, RunState& state, const RunOptions& options,
                     std::size_t client, ServerInstance& server, Channel channel,
                     CachePool* pool) {
  const auto batches = make_batches(fed, options, client, state.epoch);
  double loss = 0.0;
  std::size_t items = 0;
  for (const auto& b : batches) {
    const auto seed = derive_seed(options.scheduler_seed, {kCacheSample, b.batch_id});
    const auto r = client_step(fed, state.clients[client], server, b,
                               options.scheme.learning_rate, channel, pool, seed);
    loss += r.loss * static_cast<double>(b.indices.size());
    items += b.indices.size();
  }
  return items == 0 ? 0.0 : loss / static_cast<double>(items);
}

void finish_epoch(const Federation& fed, const RunState& state, const RunOptions& options,
                  EpochReport& report) {
  if (options.evaluate_each_epoch && fed.test != nullptr) {
    report.accuracy = evaluate_clients(fed, state, options.scheme.scheme);
  }
}

void send_weights(RunState& state, Role from, Role to, const nn::ParameterSet& params,
                  Purpose purpose, std::size_t epoch) {
  Message m;
  m.envelope.variant = Variant::weight_snapshot;
  m.envelope.sender = from;
  m.envelope.receiver = to;
  m.envelope.epoch = epoch;
  m.envelope.scalars = params.scalar_count();
  m.envelope.purpose = purpose;
  if (state.ledger.verbose()) m.payload = WeightPayload{params};
  Channel{&state.ledger, &state.costs}.send(std::move(m));
}

nn::ParameterSet client_init(const nn::SplitModelSpec& model, std::uint64_t seed, std::size_t i) {
  return model.split_parameters(init_parameters(model.network(), derive_seed(seed, {kClientInit, i})))
      .first;
}

nn::ParameterSet server_init(const nn::SplitModelSpec& model, std::uint64_t seed, std::size_t j) {
  return model.split_parameters(init_parameters(model.network(), derive_seed(seed, {kServerInit, j})))
      .second;
}

}  // namespace

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::sl_vanilla: return "sl_vanilla";
    case Scheme::sl_roundrobin: return "sl_roundrobin";
    case Scheme::sfl: return "sfl";
    case Scheme::msl: return "msl";
    case Scheme::psl: return "psl";
    case Scheme::psl_parallel: return "psl_parallel";
    case Scheme::psl_cache: return "psl_cache";
  }
  return "?";
}

Scheme scheme_from_string(const std::string& s) {
  for (auto v : {Scheme::sl_vanilla, Scheme::sl_roundrobin, Scheme::sfl, Scheme::msl, Scheme::psl,
                 Scheme::psl_parallel, Scheme::psl_cache}) {
    if (to_string(v) == s) return v;
  }
  throw ConfigError("scheme.scheme", "unknown scheme '" + s + "'");
}

std::string to_string(OrderPolicy p) { return p == OrderPolicy::fixed ? "fixed" : "random"; }

OrderPolicy order_policy_from_string(const std::string& s) {
  if (s == "fixed") return OrderPolicy::fixed;
  if (s == "random") return OrderPolicy::random;
  throw ConfigError("scheme.order", "expected 'fixed' or 'random', got '" + s + "'");
}

bool is_psl_family(Scheme s) {
  return s == Scheme::psl || s == Scheme::psl_parallel || s == Scheme::psl_cache;
}

void SchemeConfig::validate(std::size_t client_count) const {
  if (epochs < 1) throw ConfigError("scheme.epochs", "must be at least 1");
  if (batch_size < 1) throw ConfigError("scheme.batch_size", "must be at least 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("scheme.learning_rate", "must be finite and non-negative");
  }
  if (scheme == Scheme::psl_parallel) {
    if (!parallel) throw ConfigError("scheme.parallel", "required for psl_parallel");
    if (parallel->instances < 1) throw ConfigError("scheme.parallel.instances", "must be at least 1");
  } else if (parallel) {
    throw ConfigError("scheme.parallel", "only valid for psl_parallel");
  }
  if (scheme == Scheme::psl_cache) {
    if (!cache) throw ConfigError("scheme.cache", "required for psl_cache");
    if (!(cache->sampling_fraction >= 0.0) || !std::isfinite(cache->sampling_fraction)) {
      throw ConfigError("scheme.cache.sampling_fraction", "must be finite and non-negative");
    }
  } else if (cache) {
    throw ConfigError("scheme.cache", "only valid for psl_cache");
  }
  if (scheme == Scheme::sl_vanilla && client_count != 1) {
    throw ConfigError("scheme.scheme", "sl_vanilla runs exactly one client; use sl_roundrobin");
  }
}

void Channel::send(Message message, std::uint64_t items) {
  costs->charge(message.envelope, items);
  ledger->append(std::move(message));
}

ServerStepResult server_step(const nn::SplitModelSpec& model, ServerInstance& server,
                             const SmashedPayload& incoming, double learning_rate) {
  check_incoming(model, incoming);
  auto fr = nn::forward(model.server(), server.params, incoming.activations);
  const auto loss = nn::loss_softmax_ce(fr.output, incoming.labels);
  auto br = nn::backward(model.server(), server.params, fr.tape, loss.grad);
  nn::sgd_update(server.params, br.param_grads, learning_rate);
  ServerStepResult r;
  r.gradients.gradients = std::move(br.input_grad);
  r.loss = loss.loss;
  return r;
}

ServerStepResult server_step_cached(const nn::SplitModelSpec& model, ServerInstance& server,
                                    CachePool& pool, std::size_t client_id,
                                    const SmashedPayload& incoming, double learning_rate,
                                    std::uint64_t sample_seed) {
  check_incoming(model, incoming);
  const std::size_t batch = incoming.labels.size();
  auto sampled = pool.sample(pool.sample_count(batch), sample_seed);
  ServerStepResult r;
  if (sampled.empty()) {
    r = server_step(model, server, incoming, learning_rate);
  } else {
    std::vector<nn::Tensor> parts{incoming.activations};
    std::vector<nn::Label> labels = incoming.labels;
    nn::Shape row{1};
    row.insert(row.end(), model.split_shape().begin(), model.split_shape().end());
    for (const auto& e : sampled) {
      parts.push_back(e.activations.reshaped(row));
      labels.push_back(e.label);
    }
    const auto z = nn::concat_rows(parts);
    auto fr = nn::forward(model.server(), server.params, z);
    const auto loss = nn::loss_softmax_ce(fr.output, labels);
    auto br = nn::backward(model.server(), server.params, fr.tape, loss.grad);
    nn::sgd_update(server.params, br.param_grads, learning_rate);
    r.gradients.gradients = br.input_grad.rows(0, batch);
    r.loss = loss.loss;
  }
  pool.insert_batch(client_id, incoming.activations, incoming.labels);
  r.sampled = std::move(sampled);
  return r;
}

StepResult client_step(const Federation& fed, ClientState& client, ServerInstance& server,
                       const Batch& batch, double learning_rate, Channel channel,
                       CachePool* pool, std::uint64_t cache_seed) {
  const auto& model = *fed.model;
  const auto x = fed.train->inputs().gather_rows(batch.indices);
  auto cf = nn::forward(model.client(), client.params, x);

  SmashedPayload smashed{cf.output, fed.train->labels_at(batch.indices), batch.indices};
  Message up;
  up.envelope.variant = Variant::smashed_batch;
  up.envelope.sender = Role::client(client.client_id);
  up.envelope.receiver = Role::server(server.instance_id);
  up.envelope.epoch = batch.epoch;
  up.envelope.batch_id = batch.batch_id;
  up.envelope.scalars = cf.output.size();
  if (channel.ledger->verbose()) up.payload = smashed;
  channel.send(std::move(up), batch.indices.size());

  auto sr = pool ? server_step_cached(model, server, *pool, client.client_id, smashed,
                                      learning_rate, cache_seed)
                 : server_step(model, server, smashed, learning_rate);
  if (sr.gradients.gradients.shape() != cf.output.shape()) {
    throw ProtocolError("split gradients shape " +
                        nn::shape_to_string(sr.gradients.gradients.shape()) +
                        " does not match smashed data " + nn::shape_to_string(cf.output.shape()));
  }

  Message down;
  down.envelope.variant = Variant::split_gradients;
  down.envelope.sender = Role::server(server.instance_id);
  down.envelope.receiver = Role::client(client.client_id);
  down.envelope.epoch = batch.epoch;
  down.envelope.batch_id = batch.batch_id;
  down.envelope.scalars = sr.gradients.gradients.size();
  if (channel.ledger->verbose()) down.payload = sr.gradients;
  channel.send(std::move(down));

  const auto cb = nn::backward(model.client(), client.params, cf.tape, sr.gradients.gradients);
  nn::sgd_update(client.params, cb.param_grads, learning_rate);
  return {sr.loss};
}

RunState init_run(const Federation& fed, const RunOptions& options) {
  check_federation(fed);
  const auto& sc = options.scheme;
  const std::size_t n = fed.client_count();
  sc.validate(n);
  const auto& model = *fed.model;

  RunState state;
  state.ledger = MessageLedger(options.verbose_ledger);
  state.costs = CostLedger(n);
  const bool shared = shares_weights(sc.scheme);
  const auto shared_init = client_init(model, options.init_seed, 0);
  for (std::size_t i = 0; i < n; ++i) {
    state.clients.push_back({i, shared ? shared_init : client_init(model, options.init_seed, i)});
  }
  std::size_t instances = 1;
  if (sc.scheme == Scheme::msl) instances = n;
  if (sc.scheme == Scheme::psl_parallel) instances = sc.parallel->instances;
  for (std::size_t j = 0; j < instances; ++j) {
    const std::size_t seed_index = sc.scheme == Scheme::msl ? j : 0;
    state.servers.push_back({j, server_init(model, options.init_seed, seed_index), false});
  }
  if (sc.scheme == Scheme::psl_cache) {
    std::size_t capacity = sc.cache->capacity;
    if (capacity == 0) {
      for (const auto& s : fed.shards) capacity += s.indices.size();
    }
    state.cache.emplace(std::max<std::size_t>(capacity, 1), sc.cache->sampling_fraction);
  }
  if (sc.scheme == Scheme::sfl) {
    // The Fed server hands every client the same starting point.
    for (std::size_t i = 0; i < n; ++i) {
      send_weights(state, Role::fed(), Role::client(i), shared_init, Purpose::fed_download, 0);
    }
  }
  return state;
}

std::vector<Batch> make_batches(const Federation& fed, const RunOptions& options,
                                std::size_t client, std::size_t epoch) {
  auto order = fed.shards.at(client).indices;
  Rng rng(derive_seed(options.scheduler_seed, {kBatches, epoch, client}));
  rng.shuffle(std::span<std::size_t>(order));
  const std::size_t bs = options.scheme.batch_size;
  std::vector<Batch> out;
  for (std::size_t b = 0, k = 0; b < order.size(); b += bs, ++k) {
    const auto end = std::min(order.size(), b + bs);
    out.push_back({std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(b),
                                            order.begin() + static_cast<std::ptrdiff_t>(end)),
                   make_batch_id(epoch, client, k), epoch});
  }
  return out;
}

std::vector<std::size_t> client_order(const RunOptions& options, std::size_t clients,
                                      std::size_t epoch) {
  std::vector<std::size_t> order(clients);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (options.scheme.order == OrderPolicy::random) {
    Rng rng(derive_seed(options.scheduler_seed, {kOrder, epoch}));
    rng.shuffle(std::span<std::size_t>(order));
  }
  return order;
}

EpochReport run_sl_epoch(const Federation& fed, RunState& state, const RunOptions& options) {
  EpochReport report;
  begin_epoch(state, report, fed.client_count());
  report.mean_loss[0] = train_session(fed, state, options, 0, state.servers[0],
                                      Channel{&state.ledger, &state.costs}, nullptr);
  finish_epoch(fed, state, options, report);
  return report;
}

EpochReport run_sl_roundrobin_epoch(const Federation& fed, RunState& state,
                                    const RunOptions& options) {
  EpochReport report;
  begin_epoch(state, report, fed.client_count());
  const auto order = client_order(options, fed.client_count(), state.epoch);
  for (std::size_t p = 0; p < order.size(); ++p) {
    const auto i = order[p];
    if (state.have_last_client && state.last_client != i) {
      const auto& prev = state.clients[state.last_client].params;
      send_weights(state, Role::client(state.last_client), Role::client(i), prev,
                   p == 0 ? Purpose::wraparound : Purpose::handoff, state.epoch);
      state.clients[i].params = prev;
    }
    report.mean_loss[i] = train_session(fed, state, options, i, state.servers[0],
                                        Channel{&state.ledger, &state.costs}, nullptr);
    state.last_client = i;
    state.have_last_client = true;
  }
  finish_epoch(fed, state, options, report);
  return report;
}

void broadcast_final_weights(const Federation& fed, RunState& state) {
  if (!state.have_last_client) return;
  const auto src = state.last_client;
  for (std::size_t i = 0; i < fed.client_count(); ++i) {
    if (i == src) continue;
    send_weights(state, Role::client(src), Role::client(i), state.clients[src].params,
                 Purpose::broadcast, state.epoch + 1);
    state.clients[i].params = state.clients[src].params;
  }
}

EpochReport run_sfl_epoch(const Federation& fed, RunState& state, const RunOptions& options) {
  EpochReport report;
  const std::size_t n = fed.client_count();
  begin_epoch(state, report, n);
  std::vector<std::vector<Batch>> batches;
  std::size_t rounds = 0;
  for (std::size_t i = 0; i < n; ++i) {
    batches.push_back(make_batches(fed, options, i, state.epoch));
    rounds = std::max(rounds, batches.back().size());
  }
  std::vector<std::size_t> items(n, 0);
  Channel channel{&state.ledger, &state.costs};
  for (std::size_t r = 0; r < rounds; ++r) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(options.scheduler_seed, {kInterleave, state.epoch, r}));
    rng.shuffle(std::span<std::size_t>(order));
    for (auto i : order) {
      if (r >= batches[i].size()) continue;
      const auto& b = batches[i][r];
      const auto res = client_step(fed, state.clients[i], state.servers[0], b,
                                   options.scheme.learning_rate, channel);
      report.mean_loss[i] += res.loss * static_cast<double>(b.indices.size());
      items[i] += b.indices.size();
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (items[i] > 0) report.mean_loss[i] /= static_cast<double>(items[i]);
  }
  // Fed server synchronization.
  std::vector<nn::ParameterSet> uploads;
  for (std::size_t i = 0; i < n; ++i) {
    send_weights(state, Role::client(i), Role::fed(), state.clients[i].params, Purpose::fed_upload,
                 state.epoch);
    uploads.push_back(state.clients[i].params);
  }
  const auto avg = nn::average_parameters(uploads);
  for (std::size_t i = 0; i < n; ++i) {
    send_weights(state, Role::fed(), Role::client(i), avg, Purpose::fed_download, state.epoch);
    state.clients[i].params = avg;
  }
  finish_epoch(fed, state, options, report);
  return report;
}

EpochReport run_msl_epoch(const Federation& fed, RunState& state, const RunOptions& options) {
  EpochReport report;
  begin_epoch(state, report, fed.client_count());
  for (std::size_t i = 0; i < fed.client_count(); ++i) {
    report.mean_loss[i] = train_session(fed, state, options, i, state.servers[i],
                                        Channel{&state.ledger, &state.costs}, nullptr);
  }
  finish_epoch(fed, state, options, report);
  return report;
}

EpochReport run_psl_epoch(const Federation& fed, RunState& state, const RunOptions& options,
                          const std::vector<std::size_t>* participants) {
  EpochReport report;
  begin_epoch(state, report, fed.client_count());
  std::vector<std::size_t> order;
  if (participants == nullptr) {
    order = client_order(options, fed.client_count(), state.epoch);
  } else {
    const auto perm = client_order(options, participants->size(), state.epoch);
    for (auto k : perm) order.push_back((*participants)[k]);
  }
  CachePool* pool = state.cache ? &*state.cache : nullptr;
  for (auto i : order) {
    report.mean_loss[i] = train_session(fed, state, options, i, state.servers[0],
                                        Channel{&state.ledger, &state.costs}, pool);
  }
  finish_epoch(fed, state, options, report);
  return report;
}

EpochReport run_psl_parallel_epoch(const Federation& fed, RunState& state,
                                   const RunOptions& options) {
  EpochReport report;
  const std::size_t n = fed.client_count();
  begin_epoch(state, report, n);
  const auto& pc = *options.scheme.parallel;
  const std::size_t m = state.servers.size();
  const std::size_t k_snap = pc.snapshots_per_aggregation == 0 ? m : pc.snapshots_per_aggregation;
  const auto order = client_order(options, n, state.epoch);

  auto aggregate = [&] {
    const auto avg = nn::average_parameters(state.snapshot_buffer);
    for (auto& s : state.servers) s.params = avg;
    state.snapshot_buffer.clear();
  };

  for (std::size_t pos = 0, round = 0; pos < n; ++round) {
    const std::size_t group = std::min(m, n - pos);
    std::vector<std::size_t> free(m);
    std::iota(free.begin(), free.end(), std::size_t{0});
    Rng rng(derive_seed(options.scheduler_seed, {kAssign, state.epoch, round}));
    rng.shuffle(std::span<std::size_t>(free));

    struct Session {
      std::size_t client;
      std::size_t instance;
      MessageLedger ledger;
      CostLedger costs;
      double loss = 0.0;
      std::exception_ptr error;
    };
    std::vector<Session> sessions;
    for (std::size_t k = 0; k < group; ++k) {
      sessions.push_back({order[pos + k], free[k], MessageLedger(state.ledger.verbose()),
                          CostLedger(n), 0.0, nullptr});
      state.servers[free[k]].busy = true;
    }
    auto run = [&](Session& s) {
      try {
        s.loss = train_session(fed, state, options, s.client, state.servers[s.instance],
                               Channel{&s.ledger, &s.costs}, nullptr);
      } catch (...) {
        s.error = std::current_exception();
      }
    };
    if (options.concurrent && group > 1) {
      std::vector<std::thread> threads;
      for (auto& s : sessions) threads.emplace_back(run, std::ref(s));
      for (auto& t : threads) t.join();
    } else {
      for (auto& s : sessions) run(s);
    }
    for (auto& s : sessions) {
      if (s.error) std::rethrow_exception(s.error);
      state.ledger.merge(std::move(s.ledger));
      state.costs.merge(s.costs);
      report.mean_loss[s.client] = s.loss;
      state.servers[s.instance].busy = false;
      state.snapshot_buffer.push_back(state.servers[s.instance].params);
    }
    if (state.snapshot_buffer.size() >= k_snap) aggregate();
    pos += group;
  }
  if (!state.snapshot_buffer.empty()) aggregate();
  finish_epoch(fed, state, options, report);
  return report;
}

const nn::ParameterSet& server_for(const RunState& state, Scheme scheme, std::size_t client) {
  return scheme == Scheme::msl ? state.servers.at(client).params : state.servers.at(0).params;
}

double evaluate_accuracy(const nn::SplitModelSpec& model, const nn::ParameterSet& client,
                         const nn::ParameterSet& server, const data::Dataset& test) {
  if (test.empty()) throw DomainError("evaluation on an empty test set");
  constexpr std::size_t kChunk = 256;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t b = 0; b < test.size(); b += kChunk) {
    const auto end = std::min(test.size(), b + kChunk);
    idx.resize(end - b);
    std::iota(idx.begin(), idx.end(), b);
    const auto z = nn::infer(model.client(), client, test.inputs().gather_rows(idx));
    const auto logits = nn::infer(model.server(), server, z);
    const std::size_t k = logits.dim(1);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const std::span<const double> row(logits.data() + i * k, k);
      correct += metrics::argmax(row) == test.labels()[b + i];
    }
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

std::vector<double> evaluate_clients(const Federation& fed, const RunState& state,
                                     Scheme scheme) {
  if (fed.test == nullptr) throw StateError("no test set to evaluate on");
  std::vector<double> acc;
  for (std::size_t i = 0; i < fed.client_count(); ++i) {
    acc.push_back(evaluate_accuracy(*fed.model, state.clients[i].params,
                                    server_for(state, scheme, i), *fed.test));
  }
  return acc;
}

RunResult run_scheme(const Federation& fed, const RunOptions& options) {
  RunResult result{init_run(fed, options), {}, {}};
  auto& state = result.state;
  for (std::size_t e = 0; e < options.scheme.epochs; ++e) {
    switch (options.scheme.scheme) {
      case Scheme::sl_vanilla: result.epochs.push_back(run_sl_epoch(fed, state, options)); break;
      case Scheme::sl_roundrobin:
        result.epochs.push_back(run_sl_roundrobin_epoch(fed, state, options));
        break;
      case Scheme::sfl: result.epochs.push_back(run_sfl_epoch(fed, state, options)); break;
      case Scheme::msl: result.epochs.push_back(run_msl_epoch(fed, state, options)); break;
      case Scheme::psl:
      case Scheme::psl_cache: result.epochs.push_back(run_psl_epoch(fed, state, options)); break;
      case Scheme::psl_parallel:
        result.epochs.push_back(run_psl_parallel_epoch(fed, state, options));
        break;
    }
  }
  if (options.scheme.scheme == Scheme::sl_roundrobin) broadcast_final_weights(fed, state);
  if (fed.test != nullptr) {
    result.final_accuracy = evaluate_clients(fed, state, options.scheme.scheme);
  }
  return result;
}

std::string to_string(NewcomerPolicy p) {
  return p == NewcomerPolicy::train_all ? "train_all" : "train_new";
}

NewcomerPolicy newcomer_policy_from_string(const std::string& s) {
  if (s == "train_all") return NewcomerPolicy::train_all;
  if (s == "train_new") return NewcomerPolicy::train_new;
  throw ConfigError("newcomer.policy", "expected 'train_all' or 'train_new', got '" + s + "'");
}

NewcomerReport run_newcomer_scenario(const Federation& fed, const RunOptions& options,
                                     const NewcomerConfig& config) {
  if (fed.test == nullptr) throw StateError("newcomer scenario needs a test set");
  std::set<std::size_t> seen;
  for (const auto* group : {&config.existing, &config.newcomers}) {
    for (auto c : *group) {
      if (c >= fed.client_count()) {
        throw ConfigError("newcomer.clients", "client " + std::to_string(c) + " does not exist");
      }
      if (!seen.insert(c).second) {
        throw ConfigError("newcomer.clients", "client " + std::to_string(c) + " listed twice");
      }
    }
  }
  if (config.existing.empty() || config.newcomers.empty()) {
    throw ConfigError("newcomer.clients", "need at least one existing client and one newcomer");
  }

  RunOptions opts = options;
  opts.scheme.scheme = Scheme::psl;
  opts.scheme.parallel.reset();
  opts.scheme.cache.reset();
  opts.evaluate_each_epoch = true;

  NewcomerReport report;
  report.state = init_run(fed, opts);
  auto& state = report.state;
  if (config.cache_enabled) {
    std::size_t capacity = config.cache.capacity;
    if (capacity == 0) {
      for (auto c : seen) capacity += fed.shards[c].indices.size();
    }
    state.cache.emplace(std::max<std::size_t>(capacity, 1), config.cache.sampling_fraction);
  }

  // Phase 1: plain P-SL over the existing clients. With the cache enabled the
  // server records what it sees; a zero sampling fraction keeps the steps plain.
  std::optional<CachePool> pool = std::move(state.cache);
  if (pool) state.cache.emplace(pool->capacity(), 0.0);
  for (std::size_t e = 0; e < config.phase1_epochs; ++e) {
    report.epochs.push_back(run_psl_epoch(fed, state, opts, &config.existing));
  }
  if (pool) {
    for (const auto& entry : state.cache->entries()) pool->insert(entry);
  }
  report.before = evaluate_clients(fed, state, Scheme::psl);

  std::vector<std::size_t> phase2;
  if (config.policy == NewcomerPolicy::train_all) {
    phase2.assign(seen.begin(), seen.end());
  } else {
    phase2 = config.newcomers;
  }
  state.cache = std::move(pool);
  for (std::size_t e = 0; e < config.phase2_epochs; ++e) {
    report.epochs.push_back(run_psl_epoch(fed, state, opts, &phase2));
  }
  report.after = evaluate_clients(fed, state, Scheme::psl);

  auto mean = [](const std::vector<double>& v, const std::vector<std::size_t>& ids) {
    double s = 0.0;
    for (auto i : ids) s += v[i];
    return s / static_cast<double>(ids.size());
  };
  report.existing_before = mean(report.before, config.existing);
  report.existing_after = mean(report.after, config.existing);
  report.newcomers_after = mean(report.after, config.newcomers);
  return report;
}

}  // namespace psl::protocol
