// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "spn/nn/params.hpp"

namespace spn::nn {

// Little-endian layout:
//   magic    8 bytes  "SPNPARAM"
//   version  u32      (1)
//   count    u64
//   count x { name_len u32, name bytes, rank u32, extents u64[rank], values f64[numel] }
inline constexpr char kCheckpointMagic[8] = {'S', 'P', 'N', 'P', 'A', 'R', 'A', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, ad::Tensor>>;

std::vector<unsigned char> encode_checkpoint(const ParamStore& store);
NamedTensors decode_checkpoint(const std::vector<unsigned char>& bytes);

void write_checkpoint(const std::filesystem::path& path, const ParamStore& store);
NamedTensors read_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint tensors into `store`; names, order and shapes must match
/// exactly (ValidationError otherwise).
void load_into(ParamStore& store, const NamedTensors& tensors);

}  // namespace spn::nn
