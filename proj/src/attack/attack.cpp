// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "psl/attack/attack.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "psl/common/errors.hpp"
#include "psl/common/rng.hpp"
#include "psl/metrics/metrics.hpp"

namespace psl::attack {
namespace {

constexpr std::size_t kChunk = 256;

nn::Shape batch_of(std::size_t n, const nn::Shape& row) {
  nn::Shape s{n};
  s.insert(s.end(), row.begin(), row.end());
  return s;
}

// Forward in chunks so huge shards do not build one giant tape.
nn::Tensor infer_all(const nn::NetworkSpec& spec, const nn::ParameterSet& params,
                     const nn::Tensor& x) {
  const std::size_t n = x.dim(0);
  if (n <= kChunk) return nn::infer(spec, params, x);
  std::vector<nn::Tensor> parts;
  for (std::size_t b = 0; b < n; b += kChunk) {
    parts.push_back(nn::infer(spec, params, x.rows(b, std::min(n, b + kChunk))));
  }
  return nn::concat_rows(parts);
}

bool is_series(const nn::Shape& sample) {
  return sample.size() == 1 || (sample.size() == 2 && sample[0] == 1);
}

nn::Tensor row_tensor(const nn::Tensor& batch, std::size_t i, const nn::Shape& sample) {
  return batch.rows(i, i + 1).reshaped(sample);
}

nlohmann::json victim_json(const VictimLeakage& v) {
  nlohmann::json j{{"client_id", v.client_id}, {"self", v.self},   {"samples", v.samples},
                   {"ssim", v.ssim},           {"mse", v.mse}};
  if (v.dtw) j["dtw"] = *v.dtw;
  if (v.dc) j["dc"] = *v.dc;
  return j;
}

}  // namespace

std::string to_string(AttackerRole r) { return r == AttackerRole::client ? "client" : "server"; }

AttackerRole attacker_role_from_string(const std::string& s) {
  if (s == "client") return AttackerRole::client;
  if (s == "server") return AttackerRole::server;
  throw ConfigError("attack.role", "expected 'client' or 'server', got '" + s + "'");
}

void AttackScenario::validate(std::size_t client_count) const {
  if (attacker_client >= client_count) {
    throw ConfigError("attack.attacker_client", "client " + std::to_string(attacker_client) +
                                                    " does not exist");
  }
  if (victims.empty()) throw ConfigError("attack.victims", "no victims listed");
  for (auto v : victims) {
    if (v >= client_count) {
      throw ConfigError("attack.victims", "client " + std::to_string(v) + " does not exist");
    }
  }
  if (role == AttackerRole::server && query_budget == 0) {
    throw ConfigError("attack.query_budget", "must be positive for a server attacker");
  }
}

AttackPairs build_attack_dataset(const nn::NetworkSpec& client_spec, const nn::ParameterSet& u,
                                 const data::Dataset& attacker_data) {
  if (attacker_data.empty()) throw DomainError("attacker has no data");
  if (attacker_data.sample_shape() != client_spec.input_shape()) {
    throw ShapeError("attacker data " + nn::shape_to_string(attacker_data.sample_shape()) +
                     " does not fit client input " + nn::shape_to_string(client_spec.input_shape()));
  }
  return {infer_all(client_spec, u, attacker_data.inputs()), attacker_data.inputs()};
}

AttackPairs build_query_dataset(const nn::NetworkSpec& client_spec, const nn::ParameterSet& u,
                                const data::Dataset& query_bag, std::size_t budget) {
  if (budget == 0 || query_bag.empty()) throw DomainError("empty query bag");
  if (budget > query_bag.size()) {
    throw DomainError("query budget " + std::to_string(budget) + " exceeds the bag of " +
                      std::to_string(query_bag.size()));
  }
  std::vector<std::size_t> idx(budget);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return build_attack_dataset(client_spec, u, query_bag.subset(idx));
}

nn::NetworkSpec default_decoder(const nn::NetworkSpec& client_spec) {
  using L = nn::LayerSpec;
  std::vector<L> layers;
  bool pending_relu = false;
  for (std::size_t i = client_spec.layer_count(); i-- > 0;) {
    const auto& l = client_spec.layers()[i];
    const auto& in = client_spec.activation_shape(i);
    switch (l.kind) {
      case nn::LayerKind::relu:
      case nn::LayerKind::sigmoid:
        break;
      case nn::LayerKind::flatten:
      case nn::LayerKind::reshape:
        layers.push_back(L::reshape(in));
        break;
      case nn::LayerKind::dense:
        if (pending_relu) layers.push_back(L::relu());
        layers.push_back(L::dense(in[0]));
        pending_relu = true;
        break;
      case nn::LayerKind::conv2d:
      case nn::LayerKind::conv1d:
        if (l.stride != 1 || l.padding >= l.kernel) {
          throw ShapeError("decoder mirror needs stride-1 convolutions with padding < kernel");
        }
        if (pending_relu) layers.push_back(L::relu());
        layers.push_back(l.kind == nn::LayerKind::conv2d
                             ? L::conv2d(in[0], l.kernel, 1, l.kernel - 1 - l.padding)
                             : L::conv1d(in[0], l.kernel, 1, l.kernel - 1 - l.padding));
        pending_relu = true;
        break;
      case nn::LayerKind::maxpool2d:
        throw ShapeError("no decoder mirror for maxpool2d in the client part");
    }
  }
  if (!pending_relu) throw ShapeError("client part has no parameterized layer to invert");
  layers.push_back(L::sigmoid());
  nn::NetworkSpec dec(client_spec.output_shape(), std::move(layers));
  if (dec.output_shape() != client_spec.input_shape()) {
    throw ShapeError("decoder output " + nn::shape_to_string(dec.output_shape()) +
                     " does not match raw input " + nn::shape_to_string(client_spec.input_shape()));
  }
  return dec;
}

TrainedDecoder train_decoder(const nn::NetworkSpec& decoder, const AttackPairs& pairs,
                             const DecoderTraining& training) {
  const std::size_t n = pairs.size();
  if (n == 0) throw DomainError("no attack pairs to train on");
  if (pairs.smashed.rank() == 0 || pairs.smashed.dim(0) != n) {
    throw ShapeError("smashed and raw pair counts differ");
  }
  if (batch_of(n, decoder.input_shape()) != pairs.smashed.shape()) {
    throw ShapeError("decoder input " + nn::shape_to_string(decoder.input_shape()) +
                     " vs smashed " + nn::shape_to_string(pairs.smashed.shape()));
  }
  if (batch_of(n, decoder.output_shape()) != pairs.raw.shape()) {
    throw ShapeError("decoder output " + nn::shape_to_string(decoder.output_shape()) +
                     " vs raw " + nn::shape_to_string(pairs.raw.shape()));
  }
  if (training.batch_size == 0) throw ConfigError("attack.batch_size", "must be positive");

  TrainedDecoder out{decoder, nn::init_parameters(decoder, derive_seed(training.seed, {0xdec})), 0.0};
  const double row = static_cast<double>(pairs.raw.row_size());
  std::vector<std::size_t> order(n);
  nn::MomentumSgd opt(training.learning_rate, training.momentum);
  for (std::size_t e = 0; e < training.epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(training.seed, {0xba7c, e}));
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t b = 0; b < n; b += training.batch_size) {
      const std::span<const std::size_t> idx(order.data() + b,
                                             std::min(n, b + training.batch_size) - b);
      auto fr = nn::forward(decoder, out.params, pairs.smashed.gather_rows(idx));
      auto loss = nn::loss_mse(fr.output, pairs.raw.gather_rows(idx));
      // loss_mse averages over every element; rescale to a per-sample sum.
      for (auto& g : loss.grad.values()) g *= row;
      const auto br = nn::backward(decoder, out.params, fr.tape, loss.grad);
      opt.step(out.params, br.param_grads);
    }
  }
  out.final_loss = metrics::mse(pairs.raw, infer_all(decoder, out.params, pairs.smashed));
  return out;
}

nn::Tensor reconstruct(const TrainedDecoder& decoder, const nn::Tensor& smashed) {
  if (smashed.rank() == 0 || batch_of(smashed.dim(0), decoder.spec.input_shape()) != smashed.shape()) {
    throw ShapeError("smashed batch " + nn::shape_to_string(smashed.shape()) +
                     " does not fit decoder input " +
                     nn::shape_to_string(decoder.spec.input_shape()));
  }
  auto out = infer_all(decoder.spec, decoder.params, smashed);
  for (auto& v : out.values()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

VictimLeakage score_reconstruction(std::size_t client_id, const nn::Tensor& raw,
                                   const nn::Tensor& reconstructed) {
  if (raw.shape() != reconstructed.shape() || raw.rank() < 2) {
    throw ShapeError("reconstruction " + nn::shape_to_string(reconstructed.shape()) + " vs raw " +
                     nn::shape_to_string(raw.shape()));
  }
  const nn::Shape sample(raw.shape().begin() + 1, raw.shape().end());
  const std::size_t n = raw.dim(0);
  const bool series = is_series(sample);
  VictimLeakage v;
  v.client_id = client_id;
  v.samples = n;
  double dtw = 0.0, dc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = row_tensor(raw, i, sample);
    const auto b = row_tensor(reconstructed, i, sample);
    v.ssim += metrics::ssim(a, b);
    v.mse += metrics::mse(a, b);
    if (series) {
      dtw += metrics::dtw(a.values(), b.values());
      const nn::Shape flat{a.size()};
      dc += metrics::distance_correlation(a.reshaped(flat), b.reshaped(flat));
    }
  }
  const auto k = static_cast<double>(n);
  v.ssim /= k;
  v.mse /= k;
  if (series) {
    v.dtw = dtw / k;
    v.dc = dc / k;
  }
  return v;
}

LeakageReport evaluate_leakage(const TrainedDecoder& decoder, const AttackScenario& scenario,
                               const protocol::MessageLedger& ledger,
                               const data::Dataset& train) {
  LeakageReport report;
  report.scenario = scenario;
  report.decoder_loss = decoder.final_loss;
  std::size_t cross = 0;
  for (auto victim : scenario.victims) {
    std::vector<nn::Tensor> smashed;
    std::vector<std::size_t> indices;
    for (const auto& m : ledger.messages()) {
      if (m.envelope.variant != protocol::Variant::smashed_batch ||
          m.envelope.sender != protocol::Role::client(victim)) {
        continue;
      }
      const auto* p = std::get_if<protocol::SmashedPayload>(&m.payload);
      if (p == nullptr) continue;
      smashed.push_back(p->activations);
      indices.insert(indices.end(), p->sample_indices.begin(), p->sample_indices.end());
    }
    if (smashed.empty()) {
      throw StateError("no captured smashed data for client " + std::to_string(victim) +
                       "; rerun training with --verbose-ledger");
    }
    const auto z = nn::concat_rows(smashed);
    auto v = score_reconstruction(victim, train.inputs().gather_rows(indices), reconstruct(decoder, z));
    v.self = scenario.role == AttackerRole::client && victim == scenario.attacker_client;
    if (!v.self) {
      report.cross_ssim += v.ssim;
      report.cross_mse += v.mse;
      ++cross;
    } else if (!report.self_ssim) {
      report.self_ssim = v.ssim;
    }
    report.victims.push_back(std::move(v));
  }
  if (cross > 0) {
    report.cross_ssim /= static_cast<double>(cross);
    report.cross_mse /= static_cast<double>(cross);
  }
  return report;
}

VictimLeakage self_reconstruction(const TrainedDecoder& decoder, const nn::NetworkSpec& client_spec,
                                  const nn::ParameterSet& u, std::size_t client_id,
                                  const data::Dataset& heldout) {
  const auto pairs = build_attack_dataset(client_spec, u, heldout);
  auto v = score_reconstruction(client_id, pairs.raw, reconstruct(decoder, pairs.smashed));
  v.self = true;
  return v;
}

nlohmann::json LeakageReport::to_json() const {
  nlohmann::json j;
  j["attacker_role"] = to_string(scenario.role);
  j["attacker_client"] = scenario.attacker_client;
  if (scenario.role == AttackerRole::server) j["query_budget"] = scenario.query_budget;
  j["decoder_loss"] = decoder_loss;
  j["victims"] = nlohmann::json::array();
  for (const auto& v : victims) j["victims"].push_back(victim_json(v));
  if (self_heldout) j["self_heldout"] = victim_json(*self_heldout);
  j["cross_client_ssim"] = cross_ssim;
  j["cross_client_mse"] = cross_mse;
  j["cross_client_dissimilarity"] = 1.0 - cross_ssim;
  j["self_ssim"] = self_ssim ? nlohmann::json(*self_ssim) : nlohmann::json(nullptr);
  return j;
}

std::string encode_pgm(const nn::Tensor& image) {
  std::size_t h = 0, w = 0;
  if (image.rank() == 2) {
    h = image.dim(0);
    w = image.dim(1);
  } else if (image.rank() == 3 && image.dim(0) == 1) {
    h = image.dim(1);
    w = image.dim(2);
  } else {
    throw ShapeError("PGM needs a single-channel image, got " + nn::shape_to_string(image.shape()));
  }
  std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  for (double v : image.values()) {
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, const nn::Tensor& image) {
  const auto bytes = encode_pgm(image);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path.string() + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace psl::attack
