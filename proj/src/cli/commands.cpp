// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "psl/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "psl/cli/svg.hpp"
#include "psl/common/errors.hpp"
#include "psl/nn/checkpoint.hpp"

namespace psl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw FormatError("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw StateError("cannot open " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Shortest text that reads back to the same double.
std::string exact(double v) { return json(v).dump(); }

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

json ledger_digest(const protocol::MessageLedger& ledger) {
  using protocol::Purpose;
  using protocol::Variant;
  json by_variant = json::object(), by_purpose = json::object();
  for (auto v : {Variant::smashed_batch, Variant::split_gradients, Variant::weight_snapshot}) {
    by_variant[protocol::to_string(v)] = ledger.count(v);
  }
  for (auto p : {Purpose::handoff, Purpose::wraparound, Purpose::broadcast, Purpose::fed_upload,
                 Purpose::fed_download}) {
    by_purpose[protocol::to_string(p)] = ledger.count(Variant::weight_snapshot, p);
  }
  return {{"messages", ledger.size()},
          {"by_variant", by_variant},
          {"weight_snapshots_by_purpose", by_purpose},
          {"client_to_client_weight_messages", ledger.client_to_client_weight_messages()},
          {"verbose", ledger.verbose()}};
}

std::string costs_csv(const std::vector<protocol::CostRow>& rows) {
  std::ostringstream o;
  o << "client,epoch,items,weight_updates,smashed_up,gradients_down,weights_up,weights_down,"
       "communication,predicted_items,predicted_updates,predicted_communication,"
       "communication_difference\n";
  for (const auto& r : rows) {
    const auto& m = r.measured;
    o << r.client << ',' << r.epoch << ',' << m.items << ',' << m.weight_updates << ','
      << m.smashed_up << ',' << m.gradients_down << ',' << m.weights_up << ',' << m.weights_down
      << ',' << m.communication() << ',' << exact(r.predicted_items) << ',' << r.predicted_updates
      << ',' << exact(r.predicted_communication) << ',' << exact(r.communication_difference) << '\n';
  }
  return o.str();
}

bool shares_weights(protocol::Scheme s) {
  return s == protocol::Scheme::sl_roundrobin || s == protocol::Scheme::sfl;
}

// Greyscale dumps only make sense for single-channel 2D samples.
bool is_image(const nn::Shape& s) { return s.size() == 2 || (s.size() == 3 && s[0] == 1); }

void dump_pgms(const fs::path& dir, const attack::TrainedDecoder& decoder,
               const attack::AttackScenario& scenario, const protocol::MessageLedger& ledger,
               const data::Dataset& train, std::size_t count) {
  const auto shape = train.sample_shape();
  if (!is_image(shape)) return;
  for (auto victim : scenario.victims) {
    std::size_t written = 0;
    for (const auto& m : ledger.messages()) {
      if (written >= count) break;
      if (m.envelope.variant != protocol::Variant::smashed_batch ||
          m.envelope.sender != protocol::Role::client(victim)) {
        continue;
      }
      const auto* p = std::get_if<protocol::SmashedPayload>(&m.payload);
      if (p == nullptr) continue;
      const auto take = std::min(count - written, p->sample_indices.size());
      const auto rec = attack::reconstruct(decoder, p->activations.rows(0, take));
      for (std::size_t k = 0; k < take; ++k, ++written) {
        const auto stem = "client" + std::to_string(victim) + "_" + std::to_string(written);
        const std::size_t idx = p->sample_indices[k];
        attack::write_pgm(dir / (stem + "_raw.pgm"),
                          train.inputs().rows(idx, idx + 1).reshaped(shape));
        attack::write_pgm(dir / (stem + "_rec.pgm"), rec.rows(k, k + 1).reshaped(shape));
      }
    }
  }
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string manifest_hash(const json& manifest) {
  json copy = manifest;
  copy.erase("hash");
  copy.erase("wall_clock_seconds");
  // Where a run was written is not a result.
  if (copy.contains("config") && copy["config"].is_object()) copy["config"].erase("output_dir");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(copy.dump())));
  return buf;
}

json load_manifest(const fs::path& run_dir) {
  const auto path = run_dir / "manifest.json";
  json m;
  try {
    m = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  const int version = m.value("manifest_version", -1);
  if (version != kManifestVersion) {
    throw FormatError(path.string() + ": manifest_version " + std::to_string(version) +
                      " is not supported (expected " + std::to_string(kManifestVersion) + ")");
  }
  if (m.value("hash", std::string()) != manifest_hash(m)) {
    throw FormatError(path.string() + ": hash does not match contents");
  }
  return m;
}

json cmd_partition(const ExperimentConfig& config, const fs::path& out) {
  const auto ws = build_workspace(config);
  auto summary = data::shard_summary(ws.train, ws.partition, ws.shards);
  json shards = json::array();
  for (const auto& s : ws.shards) shards.push_back({{"client_id", s.client_id}, {"indices", s.indices}});
  write_text(out / "partition.json", summary.dump(2) + "\n");
  write_text(out / "shards.json", shards.dump() + "\n");
  return summary;
}

json cmd_train(ExperimentConfig config, const fs::path& out, bool deterministic) {
  if (deterministic) config.concurrent = false;
  config.output_dir = out.string();
  const auto ws = build_workspace(config);
  const auto fed = ws.federation();
  const auto opts = run_options(config);
  const auto start = std::chrono::steady_clock::now();

  protocol::RunState state;
  std::vector<protocol::EpochReport> epochs;
  std::vector<double> final_accuracy;
  json newcomer = nullptr;
  if (config.newcomer) {
    const auto& s = *config.newcomer;
    protocol::NewcomerConfig nc{s.existing,      s.newcomers,     s.policy, s.cache_enabled,
                                s.phase1_epochs, s.phase2_epochs, s.cache};
    auto r = protocol::run_newcomer_scenario(fed, opts, nc);
    newcomer = {{"policy", protocol::to_string(s.policy)},
                {"cache_enabled", s.cache_enabled},
                {"before", r.before},
                {"after", r.after},
                {"existing_before", r.existing_before},
                {"existing_after", r.existing_after},
                {"existing_drop", r.existing_before - r.existing_after},
                {"newcomers_after", r.newcomers_after}};
    state = std::move(r.state);
    epochs = std::move(r.epochs);
    final_accuracy = std::move(r.after);
  } else {
    auto r = protocol::run_scheme(fed, opts);
    state = std::move(r.state);
    epochs = std::move(r.epochs);
    final_accuracy = std::move(r.final_accuracy);
  }
  const double seconds =
      deterministic ? 0.0
                    : std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  fs::create_directories(out / "checkpoints");
  for (const auto& c : state.clients) {
    nn::save_checkpoint(out / "checkpoints" / ("client_" + std::to_string(c.client_id) + ".pslw"), c.params);
  }
  for (const auto& s : state.servers) {
    nn::save_checkpoint(out / "checkpoints" / ("server_" + std::to_string(s.instance_id) + ".pslw"), s.params);
  }
  {
    std::ofstream f(out / "ledger.jsonl", std::ios::binary);
    state.ledger.write_jsonl(f);
    if (!f) throw FormatError("failed writing ledger.jsonl");
  }

  std::size_t items = 0;
  json shard_sizes = json::array();
  for (const auto& s : ws.shards) {
    items += s.indices.size();
    shard_sizes.push_back(s.indices.size());
  }
  const protocol::CostModel cost_model{shares_weights(config.scheme.scheme), ws.shards.size(), items,
                                       ws.model.split_size(),
                                       state.clients.empty() ? 0 : state.clients[0].params.scalar_count()};
  const auto rows = protocol::cost_report(state.costs, cost_model, epochs.size());
  json totals = json::array();
  for (std::size_t c = 0; c < ws.shards.size(); ++c) {
    const auto t = state.costs.total(c);
    totals.push_back({{"client", c},
                      {"items", t.items},
                      {"weight_updates", t.weight_updates},
                      {"smashed_up", t.smashed_up},
                      {"gradients_down", t.gradients_down},
                      {"weights_up", t.weights_up},
                      {"weights_down", t.weights_down},
                      {"communication", t.communication()}});
  }

  std::ostringstream acc;
  acc << "epoch,client,accuracy,mean_loss\n";
  json epoch_json = json::array();
  for (const auto& e : epochs) {
    for (std::size_t c = 0; c < e.accuracy.size(); ++c) {
      acc << e.epoch << ',' << c << ',' << exact(e.accuracy[c]) << ','
          << (c < e.mean_loss.size() ? exact(e.mean_loss[c]) : "") << '\n';
    }
    epoch_json.push_back({{"epoch", e.epoch}, {"accuracy", e.accuracy}, {"mean_loss", e.mean_loss}});
  }

  json manifest{{"manifest_version", kManifestVersion},
                {"engine_version", kEngineVersion},
                {"config", to_json(config)},
                {"scheme", protocol::to_string(config.scheme.scheme)},
                {"clients", ws.shards.size()},
                {"shard_sizes", shard_sizes},
                {"split_size", ws.model.split_size()},
                {"epochs", epoch_json},
                {"final_accuracy", final_accuracy},
                {"mean_final_accuracy", mean(final_accuracy)},
                {"costs", {{"model", {{"dataset_items", items}, {"client_params", cost_model.client_params}}},
                           {"rows", protocol::cost_rows_to_json(rows)},
                           {"totals", totals}}},
                {"ledger", ledger_digest(state.ledger)},
                {"newcomer", newcomer},
                {"leakage_report", nullptr},
                {"leakage", nullptr},
                {"deterministic", deterministic},
                {"wall_clock_seconds", seconds}};
  manifest["hash"] = manifest_hash(manifest);

  write_text(out / "config.json", dump_config(config));
  write_text(out / "accuracy.csv", acc.str());
  write_text(out / "costs.csv", costs_csv(rows));
  write_text(out / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

AttackOutcome run_attack(const Workspace& ws, const AttackSection& section, std::uint64_t seed,
                         const nn::ParameterSet& attacker_u, const protocol::MessageLedger& ledger) {
  const auto& sc = section.scenario;
  sc.validate(ws.shards.size());
  const auto& client = ws.model.client();
  const auto pairs =
      sc.role == attack::AttackerRole::client
          ? attack::build_attack_dataset(client, attacker_u, ws.train.subset(ws.shards[sc.attacker_client].indices))
          : attack::build_query_dataset(client, attacker_u, ws.test, sc.query_budget);
  auto training = section.decoder;
  training.seed = seed;
  auto dec = attack::train_decoder(attack::default_decoder(client), pairs, training);
  auto report = attack::evaluate_leakage(dec, sc, ledger, ws.train);
  if (sc.role == attack::AttackerRole::client) {
    report.self_heldout = attack::self_reconstruction(dec, client, attacker_u, sc.attacker_client, ws.test);
    report.self_ssim = report.self_heldout->ssim;
  }
  return {std::move(dec), std::move(report)};
}

json cmd_attack(const ExperimentConfig& config, const fs::path& run_dir) {
  if (!config.attack) throw ConfigError("attack", "config has no attack section");
  auto manifest = load_manifest(run_dir);
  // The run's own config rebuilds the exact data the ledger refers to.
  const auto run_config = load_config(run_dir / "config.json");
  const auto ws = build_workspace(run_config);
  config.attack->scenario.validate(ws.shards.size());

  std::ifstream lf(run_dir / "ledger.jsonl", std::ios::binary);
  if (!lf) throw StateError("no ledger.jsonl in " + run_dir.string() + "; run train first");
  const auto ledger = protocol::MessageLedger::read_jsonl(lf);
  const auto a = config.attack->scenario.attacker_client;
  const auto u = nn::load_checkpoint(run_dir / "checkpoints" / ("client_" + std::to_string(a) + ".pslw"));

  const auto& section = *config.attack;
  auto training = section.decoder;
  training.seed = config.seeds.attack;
  const auto outcome = run_attack(ws, section, config.seeds.attack, u, ledger);
  const auto& report = outcome.report;

  json j = report.to_json();
  j["decoder"] = {{"epochs", training.epochs},
                  {"learning_rate", training.learning_rate},
                  {"momentum", training.momentum},
                  {"batch_size", training.batch_size},
                  {"seed", training.seed}};
  write_text(run_dir / "leakage.json", j.dump(2) + "\n");

  if (section.pgm_dumps > 0) {
    fs::create_directories(run_dir / "reconstructions");
    dump_pgms(run_dir / "reconstructions", outcome.decoder, section.scenario, ledger, ws.train, section.pgm_dumps);
  }

  manifest["leakage_report"] = "leakage.json";
  manifest["leakage"] = {{"attacker_role", attack::to_string(section.scenario.role)},
                         {"attacker_client", a},
                         {"cross_client_ssim", report.cross_ssim},
                         {"cross_client_mse", report.cross_mse},
                         {"self_ssim", report.self_ssim ? json(*report.self_ssim) : json(nullptr)}};
  manifest["hash"] = manifest_hash(manifest);
  write_text(run_dir / "manifest.json", manifest.dump(2) + "\n");
  return j;
}

void cmd_report(const std::vector<fs::path>& run_dirs, const fs::path& out) {
  if (run_dirs.empty()) throw ConfigError("runs", "need at least one run directory");
  struct Run {
    std::string label;
    json manifest;
  };
  std::vector<Run> runs;
  std::map<std::string, int> seen;
  for (const auto& dir : run_dirs) {
    auto m = load_manifest(dir);
    auto name = fs::path(dir).lexically_normal().filename().string();
    if (name.empty()) name = fs::path(dir).lexically_normal().parent_path().filename().string();
    const int n = seen[name]++;
    if (n > 0) name += "#" + std::to_string(n + 1);
    runs.push_back({name, std::move(m)});
  }

  std::size_t clients = 0;
  for (const auto& r : runs) clients = std::max<std::size_t>(clients, r.manifest["final_accuracy"].size());

  // Final accuracy per client; with exactly two runs a diff column (second
  // minus first) follows.
  std::ostringstream table;
  table << "client";
  for (const auto& r : runs) table << ',' << r.label;
  if (runs.size() == 2) table << ",diff";
  table << '\n';
  for (std::size_t c = 0; c < clients; ++c) {
    table << c;
    std::vector<std::optional<double>> cells;
    for (const auto& r : runs) {
      const auto& fa = r.manifest["final_accuracy"];
      if (c < fa.size()) {
        cells.push_back(fa[c].get<double>());
        table << ',' << exact(*cells.back());
      } else {
        cells.push_back(std::nullopt);
        table << ',';
      }
    }
    if (runs.size() == 2) {
      table << ',';
      if (cells[0] && cells[1]) table << exact(*cells[1] - *cells[0]);
    }
    table << '\n';
  }
  write_text(out / "accuracy_table.csv", table.str());

  std::ostringstream schemes;
  schemes << "run,scheme,clients,mean_accuracy,min_accuracy,max_accuracy,communication_total,"
             "cross_client_ssim\n";
  std::vector<Bar> mean_bars;
  for (const auto& r : runs) {
    const auto fa = r.manifest["final_accuracy"].get<std::vector<double>>();
    std::uint64_t comm = 0;
    for (const auto& t : r.manifest["costs"]["totals"]) comm += t["communication"].get<std::uint64_t>();
    const auto& leak = r.manifest["leakage"];
    schemes << r.label << ',' << r.manifest["scheme"].get<std::string>() << ',' << fa.size() << ','
            << exact(mean(fa)) << ','
            << (fa.empty() ? "" : exact(*std::min_element(fa.begin(), fa.end()))) << ','
            << (fa.empty() ? "" : exact(*std::max_element(fa.begin(), fa.end()))) << ',' << comm << ','
            << (leak.is_object() ? exact(leak["cross_client_ssim"].get<double>()) : "") << '\n';
    mean_bars.push_back({r.label, mean(fa)});
  }
  write_text(out / "schemes.csv", schemes.str());

  // Leakage, most leaky scheme first.
  std::vector<std::pair<double, const Run*>> leaky;
  for (const auto& r : runs) {
    if (r.manifest["leakage"].is_object()) {
      leaky.emplace_back(r.manifest["leakage"]["cross_client_ssim"].get<double>(), &r);
    }
  }
  std::stable_sort(leaky.begin(), leaky.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::ostringstream leak_csv;
  leak_csv << "run,scheme,cross_client_ssim,self_ssim,dissimilarity\n";
  std::vector<Bar> leak_bars;
  for (const auto& [ssim, r] : leaky) {
    const auto& self = r->manifest["leakage"]["self_ssim"];
    leak_csv << r->label << ',' << r->manifest["scheme"].get<std::string>() << ',' << exact(ssim) << ','
             << (self.is_number() ? exact(self.get<double>()) : "") << ',' << exact(1.0 - ssim) << '\n';
    leak_bars.push_back({r->label, ssim});
  }
  write_text(out / "leakage.csv", leak_csv.str());

  for (const auto& r : runs) {
    std::vector<Series> series(r.manifest["final_accuracy"].size());
    for (std::size_t c = 0; c < series.size(); ++c) series[c].name = "client " + std::to_string(c);
    for (const auto& e : r.manifest["epochs"]) {
      const auto acc = e["accuracy"].get<std::vector<double>>();
      for (std::size_t c = 0; c < acc.size() && c < series.size(); ++c) {
        series[c].points.emplace_back(e["epoch"].get<double>(), acc[c]);
      }
    }
    write_text(out / "plots" / ("accuracy_" + r.label + ".svg"),
               line_chart(r.label + " (" + r.manifest["scheme"].get<std::string>() + ")", "epoch",
                          "test accuracy", series));
  }
  write_text(out / "plots" / "mean_accuracy.svg", bar_chart("Mean final accuracy", "accuracy", mean_bars));
  if (!leak_bars.empty()) {
    write_text(out / "plots" / "leakage.svg", bar_chart("Cross-client SSIM", "SSIM", leak_bars));
  }
}

}  // namespace psl::cli
