#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "strpm/model.hpp"

namespace strpm {

// Checkpoint codec. Binary, little-endian:
//   magic "STCK", u32 version, u64 descriptor length, JSON architecture
//   descriptor (UTF-8), f64 input normalization constant, u32 record count,
//   then per record: u32 name length, name bytes, u32 rank, u64 dims...,
//   f64 data... (row-major). Full layout in docs/formats.md.
std::vector<uint8_t> serialize_params(const ModelParams& params);
ModelParams deserialize_params(const std::vector<uint8_t>& bytes);

void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

}  // namespace strpm
