// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "psl/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "psl/common/errors.hpp"

namespace psl::nn {
namespace {

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>(u & 0xff));
    u = static_cast<U>(u >> 8);
  }
}

void put_f64(std::string& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(const std::string& b) : bytes_(b) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw FormatError("checkpoint truncated");
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      u |= static_cast<std::make_unsigned_t<T>>(
               static_cast<unsigned char>(bytes_[pos_ + i]))
           << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }

  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

void put_tensor(std::string& out, std::size_t layer, const Tensor& t) {
  put_le(out, static_cast<std::uint16_t>(layer));
  out.push_back(static_cast<char>(t.rank()));
  for (auto d : t.shape()) put_le(out, static_cast<std::uint32_t>(d));
  for (double v : t.values()) put_f64(out, v);
}

std::pair<std::size_t, Tensor> get_tensor(Reader& r) {
  const auto layer = r.get<std::uint16_t>();
  const auto rank = r.get<std::uint8_t>();
  if (rank == 0) throw FormatError("checkpoint tensor of rank 0");
  Shape shape;
  std::size_t n = 1;
  for (std::uint8_t i = 0; i < rank; ++i) {
    shape.push_back(r.get<std::uint32_t>());
    n *= shape.back();
  }
  if (n > r.remaining() / 8) throw FormatError("checkpoint truncated");
  std::vector<double> data(n);
  for (auto& v : data) v = r.get_f64();
  return {layer, Tensor(std::move(shape), std::move(data))};
}

}  // namespace

std::string encode_checkpoint(const ParameterSet& params) {
  if (params.layers().size() > std::numeric_limits<std::uint16_t>::max()) {
    throw DomainError("too many layers for checkpoint");
  }
  std::string out = "PSLW";
  put_le(out, kCheckpointVersion);
  put_le(out, static_cast<std::uint16_t>(params.layers().size()));
  for (const auto& [k, p] : params.layers()) {
    put_tensor(out, k, p.weight);
    put_tensor(out, k, p.bias);
  }
  return out;
}

ParameterSet decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 8 || bytes.compare(0, 4, "PSLW") != 0) {
    throw FormatError("not a PSLW checkpoint");
  }
  Reader r(bytes);
  for (int i = 0; i < 4; ++i) r.get<std::uint8_t>();
  const auto version = r.get<std::uint16_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto layers = r.get<std::uint16_t>();
  ParameterSet::Map m;
  for (std::uint16_t i = 0; i < layers; ++i) {
    auto [wi, w] = get_tensor(r);
    auto [bi, b] = get_tensor(r);
    if (wi != bi) throw FormatError("checkpoint weight/bias records disagree on layer index");
    if (!m.emplace(wi, LayerParams{std::move(w), std::move(b)}).second) {
      throw FormatError("duplicate layer " + std::to_string(wi) + " in checkpoint");
    }
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint records");
  return ParameterSet(std::move(m));
}

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path.string() + " for writing");
  const auto bytes = encode_checkpoint(params);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw FormatError("failed writing " + path.string());
}

ParameterSet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace psl::nn
