// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "psl/cli/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "psl/common/errors.hpp"
#include "psl/nn/presets.hpp"

namespace psl::cli {

using nlohmann::json;

namespace {

// Walks one JSON object, remembering which keys were read so leftovers can be
// reported by name.
class Fields {
 public:
  Fields(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw ConfigError(where(), "expected an object");
  }

  std::string path(const std::string& key) const {
    return prefix_.empty() ? key : prefix_ + "." + key;
  }

  // Marks the key as read; an explicit null counts as absent.
  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    try {
      check_kind<T>(v, key);
      out = v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path(key), "wrong type");
    }
  }

  void skip(const std::string& key) { seen_.insert(key); }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(path(k), "unknown field");
    }
  }

 private:
  std::string where() const { return prefix_.empty() ? "config" : prefix_; }

  template <typename T>
  void check_kind(const json& v, const std::string& key) const {
    bool ok = true;
    if constexpr (std::is_same_v<T, bool>) {
      ok = v.is_boolean();
    } else if constexpr (std::is_floating_point_v<T>) {
      ok = v.is_number();
    } else if constexpr (std::is_integral_v<T>) {
      ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
      if (!ok) throw ConfigError(path(key), "expected a non-negative integer");
    } else if constexpr (std::is_same_v<T, std::string>) {
      ok = v.is_string();
    } else {
      ok = v.is_array();
    }
    if (!ok) throw ConfigError(path(key), "wrong type");
  }

  const json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

json cache_json(const protocol::CacheConfig& c) {
  return {{"capacity", c.capacity}, {"sampling_fraction", c.sampling_fraction}};
}

protocol::CacheConfig cache_from(const json& j, const std::string& prefix) {
  Fields f(j, prefix);
  protocol::CacheConfig c;
  f.get("capacity", c.capacity);
  f.get("sampling_fraction", c.sampling_fraction);
  f.finish();
  return c;
}

DatasetConfig dataset_from(const json& j) {
  Fields f(j, "dataset");
  DatasetConfig d;
  f.get("source", d.source);
  f.get("samples", d.samples);
  f.get("test_samples", d.test_samples);
  f.get("classes", d.classes);
  f.get("shape", d.shape);
  f.get("separation", d.synth.separation);
  f.get("noise", d.synth.noise);
  f.get("smoothness", d.synth.smoothness);
  f.get("series_length", d.series_length);
  f.get("series_noise", d.series.noise);
  f.get("train_images", d.train_images);
  f.get("train_labels", d.train_labels);
  f.get("test_images", d.test_images);
  f.get("test_labels", d.test_labels);
  f.get("train_csv", d.train_csv);
  f.get("test_csv", d.test_csv);
  f.finish();
  return d;
}

json dataset_json(const DatasetConfig& d) {
  return {{"source", d.source},
          {"samples", d.samples},
          {"test_samples", d.test_samples},
          {"classes", d.classes},
          {"shape", d.shape},
          {"separation", d.synth.separation},
          {"noise", d.synth.noise},
          {"smoothness", d.synth.smoothness},
          {"series_length", d.series_length},
          {"series_noise", d.series.noise},
          {"train_images", d.train_images},
          {"train_labels", d.train_labels},
          {"test_images", d.test_images},
          {"test_labels", d.test_labels},
          {"train_csv", d.train_csv},
          {"test_csv", d.test_csv}};
}

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace

json to_json(const ExperimentConfig& c) {
  json scheme{{"scheme", protocol::to_string(c.scheme.scheme)},
              {"epochs", c.scheme.epochs},
              {"batch_size", c.scheme.batch_size},
              {"learning_rate", c.scheme.learning_rate},
              {"order", protocol::to_string(c.scheme.order)}};
  if (c.scheme.parallel) {
    scheme["parallel"] = {{"instances", c.scheme.parallel->instances},
                          {"snapshots_per_aggregation", c.scheme.parallel->snapshots_per_aggregation}};
  }
  if (c.scheme.cache) scheme["cache"] = cache_json(*c.scheme.cache);

  json partition{{"mode", data::to_string(c.partition.mode)}, {"clients", c.partition.client_count}};
  if (!c.partition.ratios.empty()) partition["ratios"] = c.partition.ratios;
  if (c.partition.classes_per_client) partition["classes_per_client"] = c.partition.classes_per_client;

  json j{{"schema_version", c.schema_version},
         {"dataset", dataset_json(c.dataset)},
         {"partition", partition},
         {"model", {{"preset", c.preset}}},
         {"scheme", scheme},
         {"concurrent", c.concurrent},
         {"verbose_ledger", c.verbose_ledger},
         {"seeds",
          {{"data", c.seeds.data},
           {"init", c.seeds.init},
           {"scheduler", c.seeds.scheduler},
           {"attack", c.seeds.attack}}},
         {"output_dir", c.output_dir}};
  if (c.newcomer) {
    const auto& n = *c.newcomer;
    j["newcomer"] = {{"existing", n.existing},
                     {"newcomers", n.newcomers},
                     {"policy", protocol::to_string(n.policy)},
                     {"cache_enabled", n.cache_enabled},
                     {"phase1_epochs", n.phase1_epochs},
                     {"phase2_epochs", n.phase2_epochs},
                     {"cache", cache_json(n.cache)}};
  }
  if (c.attack) {
    const auto& a = *c.attack;
    j["attack"] = {{"role", attack::to_string(a.scenario.role)},
                   {"attacker_client", a.scenario.attacker_client},
                   {"victims", a.scenario.victims},
                   {"query_budget", a.scenario.query_budget},
                   {"epochs", a.decoder.epochs},
                   {"learning_rate", a.decoder.learning_rate},
                   {"momentum", a.decoder.momentum},
                   {"batch_size", a.decoder.batch_size},
                   {"pgm_dumps", a.pgm_dumps}};
  }
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  Fields top(j, "");
  ExperimentConfig c;
  top.get("schema_version", c.schema_version);
  if (c.schema_version != kSchemaVersion) {
    throw ConfigError("schema_version", "expected " + std::to_string(kSchemaVersion) + ", got " +
                                            std::to_string(c.schema_version));
  }
  if (top.has("dataset")) c.dataset = dataset_from(top.raw("dataset"));

  if (top.has("partition")) {
    Fields f(top.raw("partition"), "partition");
    std::string mode = data::to_string(c.partition.mode);
    f.get("mode", mode);
    c.partition.mode = data::partition_mode_from_string(mode);
    f.get("clients", c.partition.client_count);
    f.get("ratios", c.partition.ratios);
    f.get("classes_per_client", c.partition.classes_per_client);
    f.finish();
  }
  if (top.has("model")) {
    Fields f(top.raw("model"), "model");
    f.get("preset", c.preset);
    f.finish();
  }
  if (top.has("scheme")) {
    Fields f(top.raw("scheme"), "scheme");
    std::string name = protocol::to_string(c.scheme.scheme), order = protocol::to_string(c.scheme.order);
    f.get("scheme", name);
    c.scheme.scheme = protocol::scheme_from_string(name);
    f.get("epochs", c.scheme.epochs);
    f.get("batch_size", c.scheme.batch_size);
    f.get("learning_rate", c.scheme.learning_rate);
    f.get("order", order);
    c.scheme.order = protocol::order_policy_from_string(order);
    if (f.has("parallel")) {
      Fields p(f.raw("parallel"), "scheme.parallel");
      protocol::ParallelConfig pc;
      p.get("instances", pc.instances);
      p.get("snapshots_per_aggregation", pc.snapshots_per_aggregation);
      p.finish();
      c.scheme.parallel = pc;
    } else {
      f.skip("parallel");  // absent or null
    }
    if (f.has("cache")) {
      c.scheme.cache = cache_from(f.raw("cache"), "scheme.cache");
    } else {
      f.skip("cache");
    }
    f.finish();
  }
  top.get("concurrent", c.concurrent);
  top.get("verbose_ledger", c.verbose_ledger);

  if (top.has("newcomer")) {
    Fields f(top.raw("newcomer"), "newcomer");
    NewcomerSection n;
    std::string policy = protocol::to_string(n.policy);
    f.get("existing", n.existing);
    f.get("newcomers", n.newcomers);
    f.get("policy", policy);
    n.policy = protocol::newcomer_policy_from_string(policy);
    f.get("cache_enabled", n.cache_enabled);
    f.get("phase1_epochs", n.phase1_epochs);
    f.get("phase2_epochs", n.phase2_epochs);
    if (f.has("cache")) n.cache = cache_from(f.raw("cache"), "newcomer.cache");
    f.finish();
    c.newcomer = n;
  } else {
    top.skip("newcomer");
  }
  if (top.has("attack")) {
    Fields f(top.raw("attack"), "attack");
    AttackSection a;
    std::string role = attack::to_string(a.scenario.role);
    f.get("role", role);
    a.scenario.role = attack::attacker_role_from_string(role);
    f.get("attacker_client", a.scenario.attacker_client);
    f.get("victims", a.scenario.victims);
    f.get("query_budget", a.scenario.query_budget);
    f.get("epochs", a.decoder.epochs);
    f.get("learning_rate", a.decoder.learning_rate);
    f.get("momentum", a.decoder.momentum);
    f.get("batch_size", a.decoder.batch_size);
    f.get("pgm_dumps", a.pgm_dumps);
    f.finish();
    c.attack = a;
  } else {
    top.skip("attack");
  }
  if (top.has("seeds")) {
    Fields f(top.raw("seeds"), "seeds");
    f.get("data", c.seeds.data);
    f.get("init", c.seeds.init);
    f.get("scheduler", c.seeds.scheduler);
    f.get("attack", c.seeds.attack);
    f.finish();
  }
  top.get("output_dir", c.output_dir);
  top.finish();
  c.partition.seed = c.seeds.data;
  return c;
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // Turn the byte offset into something an editor can jump to.
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError("config", "JSON syntax error at line " + std::to_string(line) + ", column " +
                                    std::to_string(col));
  }
  return config_from_json(j);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("--config", "cannot open " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const ExperimentConfig& config) { return to_json(config).dump(2) + "\n"; }

void apply_seed_override(ExperimentConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("--seed-override", "expected KEY=VALUE, got '" + assignment + "'");
  }
  const auto key = assignment.substr(0, eq);
  const auto value = assignment.substr(eq + 1);
  std::uint64_t v = 0;
  try {
    std::size_t used = 0;
    if (value.empty() || value[0] == '-') throw std::invalid_argument("negative");
    v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ConfigError("seeds." + key, "'" + value + "' is not a non-negative integer");
  }
  if (key == "data") {
    config.seeds.data = v;
    config.partition.seed = v;
  } else if (key == "init") {
    config.seeds.init = v;
  } else if (key == "scheduler") {
    config.seeds.scheduler = v;
  } else if (key == "attack") {
    config.seeds.attack = v;
  } else {
    throw ConfigError("seeds." + key, "unknown seed; expected data, init, scheduler or attack");
  }
}

void ExperimentConfig::validate() const {
  if (schema_version != kSchemaVersion) throw ConfigError("schema_version", "unsupported version");
  const auto& d = dataset;
  if (d.source == "synthetic" || d.source == "series") {
    if (d.samples < 1) throw ConfigError("dataset.samples", "must be at least 1");
    if (d.test_samples < 1) throw ConfigError("dataset.test_samples", "must be at least 1");
    if (d.classes < 2) throw ConfigError("dataset.classes", "need at least two classes");
    if (d.source == "synthetic") {
      if (d.shape.empty()) throw ConfigError("dataset.shape", "must not be empty");
      for (auto s : d.shape) {
        if (s == 0) throw ConfigError("dataset.shape", "dimensions must be positive");
      }
      if (!finite_nonneg(d.synth.separation)) throw ConfigError("dataset.separation", "must be finite and non-negative");
      if (!finite_nonneg(d.synth.noise)) throw ConfigError("dataset.noise", "must be finite and non-negative");
      if (!finite_nonneg(d.synth.smoothness)) throw ConfigError("dataset.smoothness", "must be finite and non-negative");
    } else {
      if (d.series_length < 2) throw ConfigError("dataset.series_length", "must be at least 2");
      if (!finite_nonneg(d.series.noise)) throw ConfigError("dataset.series_noise", "must be finite and non-negative");
    }
  } else if (d.source == "idx") {
    for (const auto& [name, v] : {std::pair{"train_images", &d.train_images}, {"train_labels", &d.train_labels},
                                  {"test_images", &d.test_images}, {"test_labels", &d.test_labels}}) {
      if (v->empty()) throw ConfigError(std::string("dataset.") + name, "required for idx data");
    }
  } else if (d.source == "csv") {
    if (d.train_csv.empty()) throw ConfigError("dataset.train_csv", "required for csv data");
    if (d.test_csv.empty()) throw ConfigError("dataset.test_csv", "required for csv data");
  } else {
    throw ConfigError("dataset.source", "expected synthetic, series, idx or csv, got '" + d.source + "'");
  }

  const auto names = nn::preset_names();
  if (std::find(names.begin(), names.end(), preset) == names.end()) {
    throw ConfigError("model.preset", "unknown preset '" + preset + "'");
  }
  if (partition.client_count < 1) throw ConfigError("partition.clients", "must be at least 1");
  scheme.validate(partition.client_count);

  if (newcomer) {
    if (scheme.scheme != protocol::Scheme::psl) {
      throw ConfigError("scheme.scheme", "newcomer scenarios run plain psl");
    }
    if (newcomer->phase1_epochs < 1) throw ConfigError("newcomer.phase1_epochs", "must be at least 1");
    if (newcomer->phase2_epochs < 1) throw ConfigError("newcomer.phase2_epochs", "must be at least 1");
    if (scheme.epochs != newcomer->phase1_epochs + newcomer->phase2_epochs) {
      throw ConfigError("scheme.epochs", "must equal newcomer.phase1_epochs + newcomer.phase2_epochs");
    }
    if (!finite_nonneg(newcomer->cache.sampling_fraction)) {
      throw ConfigError("newcomer.cache.sampling_fraction", "must be finite and non-negative");
    }
  }
  if (attack) {
    attack->scenario.validate(partition.client_count);
    if (attack->decoder.batch_size < 1) throw ConfigError("attack.batch_size", "must be positive");
    if (!(std::isfinite(attack->decoder.learning_rate) && attack->decoder.learning_rate > 0)) {
      throw ConfigError("attack.learning_rate", "must be positive");
    }
    if (!(attack->decoder.momentum >= 0.0 && attack->decoder.momentum < 1.0)) {
      throw ConfigError("attack.momentum", "must lie in [0, 1)");
    }
  }
  if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
}

protocol::Federation Workspace::federation() const {
  return protocol::Federation{&model, &train, shards, &test};
}

Workspace build_workspace(const ExperimentConfig& config) {
  config.validate();
  const auto& d = config.dataset;
  Workspace w;
  if (d.source == "synthetic") {
    w.train = data::synth_classification(d.samples, d.classes, d.shape, config.seeds.data, d.synth, 0);
    w.test = data::synth_classification(d.test_samples, d.classes, d.shape, config.seeds.data, d.synth, 1);
  } else if (d.source == "series") {
    w.train = data::synth_series(d.samples, d.classes, d.series_length, config.seeds.data, d.series, 0);
    w.test = data::synth_series(d.test_samples, d.classes, d.series_length, config.seeds.data, d.series, 1);
  } else if (d.source == "idx") {
    w.train = data::load_idx(d.train_images, d.train_labels, d.classes);
    w.test = data::load_idx(d.test_images, d.test_labels, d.classes ? d.classes : w.train.class_count());
  } else {
    w.train = data::load_csv_series(d.train_csv, d.classes);
    w.test = data::load_csv_series(d.test_csv, d.classes ? d.classes : w.train.class_count());
  }
  if (w.test.sample_shape() != w.train.sample_shape()) {
    throw ConfigError("dataset", "train and test samples differ in shape");
  }
  w.model = nn::make_preset(config.preset, w.train.sample_shape(), w.train.class_count());
  w.partition = config.partition;
  w.partition.seed = config.seeds.data;
  w.shards = data::partition(w.train, w.partition);
  return w;
}

protocol::RunOptions run_options(const ExperimentConfig& config) {
  protocol::RunOptions o;
  o.scheme = config.scheme;
  o.init_seed = config.seeds.init;
  o.scheduler_seed = config.seeds.scheduler;
  o.verbose_ledger = config.verbose_ledger;
  o.concurrent = config.concurrent;
  return o;
}

}  // namespace psl::cli
