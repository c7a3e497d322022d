#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "steer/model.hpp"

namespace steer {

// STW1 layout (all integers little-endian):
//   "STW1" | u32 header_len | header_len bytes of UTF-8 JSON model config
//   then, per tensor in name order until end of file:
//   u32 name_len | name | u32 rank | rank x u64 dims | f32 data
struct WeightFile {
  ModelConfig config;
  WeightMap tensors;
};

std::vector<std::uint8_t> encode_weights(const ModelConfig& config, const WeightMap& tensors);

// Parses the container without checking tensors against the config schema.
// Any structural problem raises FormatError carrying the byte offset.
WeightFile decode_weights(std::span<const std::uint8_t> bytes);

void write_weight_file(const std::filesystem::path& path, const ModelConfig& config, const WeightMap& tensors);
WeightFile read_weight_file(const std::filesystem::path& path);

void save_weights(const Model& model, const std::filesystem::path& path);
// Like read_weight_file, and additionally requires exactly the schema of the
// stored config (shape mismatches report the offending record's offset).
Model load_weights(const std::filesystem::path& path);
Model decode_model(std::span<const std::uint8_t> bytes);

}  // namespace steer
