// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "psl/nn/network.hpp"

namespace psl::nn {

// Binary parameter checkpoint ("PSLW"), all integers little-endian:
//   magic "PSLW" | version u16 | layer count u16
//   per parameterized layer, two records (weight, then bias):
//     layer index u16 | rank u8 | dims u32 x rank | payload f64 x prod(dims)

inline constexpr std::uint16_t kCheckpointVersion = 1;

std::string encode_checkpoint(const ParameterSet& params);
ParameterSet decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params);
ParameterSet load_checkpoint(const std::filesystem::path& path);

}  // namespace psl::nn
