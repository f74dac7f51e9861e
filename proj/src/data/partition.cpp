// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "psl/data/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "psl/common/errors.hpp"
#include "psl/common/rng.hpp"

namespace psl::data {
namespace {

double std_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
}

// Dataset indices shuffled, then stably grouped by label: shuffled within
// each class.
std::vector<std::vector<std::size_t>> shuffled_by_class(const Dataset& ds, std::uint64_t seed) {
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, {0x7061727469}));
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> by_class(ds.class_count());
  for (auto i : order) by_class[ds.labels()[i]].push_back(i);
  return by_class;
}

std::vector<ClientShard> empty_shards(std::size_t n) {
  std::vector<ClientShard> shards(n);
  for (std::size_t i = 0; i < n; ++i) shards[i].client_id = i;
  return shards;
}

std::vector<ClientShard> balanced(const Dataset& ds, const PartitionSpec& spec) {
  auto shards = empty_shards(spec.client_count);
  std::size_t cursor = 0;
  for (const auto& cls : shuffled_by_class(ds, spec.seed)) {
    for (auto i : cls) shards[cursor++ % spec.client_count].indices.push_back(i);
  }
  return shards;
}

std::vector<ClientShard> imbalanced(const Dataset& ds, const PartitionSpec& spec) {
  // Interleave classes so every prefix of the sequence is close to the global
  // class mix, then cut contiguous chunks of the target sizes.
  struct Keyed {
    double key;
    std::size_t cls;
    std::size_t index;
  };
  std::vector<Keyed> seq;
  seq.reserve(ds.size());
  const auto by_class = shuffled_by_class(ds, spec.seed);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    const double n = static_cast<double>(by_class[c].size());
    for (std::size_t k = 0; k < by_class[c].size(); ++k) {
      seq.push_back({(static_cast<double>(k) + 0.5) / n, c, by_class[c][k]});
    }
  }
  std::sort(seq.begin(), seq.end(), [](const Keyed& a, const Keyed& b) {
    return a.key != b.key ? a.key < b.key : a.cls < b.cls;
  });
  const auto counts = largest_remainder_counts(spec.effective_ratios(), ds.size());
  auto shards = empty_shards(spec.client_count);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    for (std::size_t k = 0; k < counts[i]; ++k) shards[i].indices.push_back(seq[pos++].index);
  }
  return shards;
}

std::vector<ClientShard> noniid(const Dataset& ds, const PartitionSpec& spec) {
  const std::size_t classes = ds.class_count();
  std::vector<std::size_t> perm(classes);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(derive_seed(spec.seed, {0x636c6173}));
  rng.shuffle(std::span<std::size_t>(perm));

  std::vector<std::vector<std::size_t>> holders(classes);
  for (std::size_t i = 0; i < spec.client_count; ++i) {
    for (std::size_t j = 0; j < spec.classes_per_client; ++j) {
      holders[perm[(i * spec.classes_per_client + j) % classes]].push_back(i);
    }
  }
  auto shards = empty_shards(spec.client_count);
  const auto by_class = shuffled_by_class(ds, spec.seed);
  for (std::size_t c = 0; c < classes; ++c) {
    const auto& h = holders[c];
    if (h.empty()) continue;
    for (std::size_t k = 0; k < by_class[c].size(); ++k) {
      shards[h[(c + k) % h.size()]].indices.push_back(by_class[c][k]);
    }
  }
  return shards;
}

}  // namespace

std::string to_string(PartitionMode mode) {
  switch (mode) {
    case PartitionMode::balanced: return "balanced";
    case PartitionMode::imbalanced: return "imbalanced";
    case PartitionMode::noniid: return "noniid";
  }
  return "?";
}

PartitionMode partition_mode_from_string(const std::string& s) {
  if (s == "balanced") return PartitionMode::balanced;
  if (s == "imbalanced") return PartitionMode::imbalanced;
  if (s == "noniid") return PartitionMode::noniid;
  throw ConfigError("partition.mode", "unknown mode '" + s + "'");
}

const std::vector<double>& reference_ratios_six() {
  static const std::vector<double> r{0.01, 0.03, 0.09, 0.19, 0.30, 0.38};
  return r;
}

std::vector<double> default_imbalanced_ratios(std::size_t n) {
  if (n < 2) throw DomainError("default_imbalanced_ratios needs at least 2 clients");
  std::vector<double> r(n);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double x = 2.0 - 2.0 * static_cast<double>(k) / static_cast<double>(n - 1);
    r[k] = std_normal_pdf(x);
    total += r[k];
  }
  for (auto& v : r) v /= total;
  return r;
}

std::vector<std::size_t> largest_remainder_counts(const std::vector<double>& ratios,
                                                  std::size_t total) {
  std::vector<std::size_t> counts(ratios.size());
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    const double exact = ratios[i] * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[i];
    rem.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(rem.begin(), rem.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total && k < rem.size(); ++k, ++assigned) {
    ++counts[rem[k].second];
  }
  return counts;
}

void PartitionSpec::validate(std::size_t class_count) const {
  if (client_count < 1) throw ConfigError("partition.clients", "must be at least 1");
  if (mode == PartitionMode::imbalanced) {
    if (!ratios.empty()) {
      if (ratios.size() != client_count) {
        throw ConfigError("partition.ratios", "needs one entry per client (" +
                                                  std::to_string(client_count) + ")");
      }
      double sum = 0.0;
      for (double r : ratios) {
        if (!(r > 0.0) || !std::isfinite(r)) {
          throw ConfigError("partition.ratios", "entries must be positive");
        }
        sum += r;
      }
      if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("partition.ratios", "must sum to 1");
    }
  } else if (!ratios.empty()) {
    throw ConfigError("partition.ratios", "only valid in imbalanced mode");
  }
  if (mode == PartitionMode::noniid) {
    if (classes_per_client < 1 || classes_per_client > class_count) {
      throw ConfigError("partition.classes_per_client",
                        "must lie in [1, " + std::to_string(class_count) + "]");
    }
  } else if (classes_per_client != 0) {
    throw ConfigError("partition.classes_per_client", "only valid in noniid mode");
  }
}

std::vector<double> PartitionSpec::effective_ratios() const {
  if (!ratios.empty()) return ratios;
  if (client_count == 1) return {1.0};
  if (client_count == 6) return reference_ratios_six();
  return default_imbalanced_ratios(client_count);
}

std::vector<ClientShard> partition(const Dataset& dataset, const PartitionSpec& spec) {
  if (dataset.empty()) throw DomainError("cannot partition an empty dataset");
  spec.validate(dataset.class_count());
  if (spec.client_count > dataset.size()) {
    throw DomainError("more clients (" + std::to_string(spec.client_count) + ") than samples (" +
                      std::to_string(dataset.size()) + ")");
  }
  switch (spec.mode) {
    case PartitionMode::balanced: return balanced(dataset, spec);
    case PartitionMode::imbalanced: return imbalanced(dataset, spec);
    case PartitionMode::noniid: return noniid(dataset, spec);
  }
  return {};
}

nlohmann::json shard_summary(const Dataset& dataset, const PartitionSpec& spec,
                             const std::vector<ClientShard>& shards) {
  nlohmann::json clients = nlohmann::json::array();
  std::vector<bool> seen(dataset.size(), false);
  std::set<std::size_t> covered;
  for (const auto& s : shards) {
    std::vector<std::size_t> hist(dataset.class_count(), 0);
    for (auto i : s.indices) {
      ++hist[dataset.labels()[i]];
      seen[i] = true;
    }
    std::vector<std::size_t> present;
    for (std::size_t c = 0; c < hist.size(); ++c) {
      if (hist[c] > 0) {
        present.push_back(c);
        covered.insert(c);
      }
    }
    clients.push_back({{"client_id", s.client_id},
                       {"count", s.indices.size()},
                       {"class_histogram", hist},
                       {"classes", present}});
  }
  std::vector<std::size_t> uncovered;
  const auto global = dataset.class_histogram();
  for (std::size_t c = 0; c < global.size(); ++c) {
    if (global[c] > 0 && !covered.count(c)) uncovered.push_back(c);
  }
  const auto unassigned =
      static_cast<std::size_t>(std::count(seen.begin(), seen.end(), false));
  nlohmann::json out{{"mode", to_string(spec.mode)},
                     {"client_count", spec.client_count},
                     {"seed", spec.seed},
                     {"samples", dataset.size()},
                     {"class_count", dataset.class_count()},
                     {"clients", clients},
                     {"unassigned_samples", unassigned},
                     {"uncovered_classes", uncovered}};
  if (spec.mode == PartitionMode::imbalanced) out["ratios"] = spec.effective_ratios();
  if (spec.mode == PartitionMode::noniid) out["classes_per_client"] = spec.classes_per_client;
  return out;
}

}  // namespace psl::data
