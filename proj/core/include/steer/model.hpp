#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "steer/numerics.hpp"
#include "steer/tokenizer.hpp"

namespace steer {

struct ModelConfig {
  std::size_t vocab_size = kByteVocabSize;
  std::size_t d_model = 64;
  std::size_t n_layers = 4;
  std::size_t n_heads = 4;
  std::size_t d_ff = 256;
  std::size_t max_seq = 512;
  std::uint64_t init_seed = 0;

  std::size_t d_head() const { return d_model / n_heads; }
  std::size_t total_heads() const { return n_layers * n_heads; }

  // Throws ConfigError when the invariants do not hold.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& cfg);
// Missing fields keep their defaults; unknown fields are rejected.
ModelConfig config_from_json(const nlohmann::json& j);

using WeightMap = std::map<std::string, Tensor>;

// Tensor name -> shape for every parameter of a model with this config.
std::map<std::string, Shape> weight_schema(const ModelConfig& cfg);

namespace weight_names {
inline const std::string kTokEmb = "tok_emb";
inline const std::string kPosEmb = "pos_emb";
inline const std::string kFinalNorm = "final_norm";
inline const std::string kUnembed = "unembed";
std::string attn_norm(std::size_t layer);
std::string wq(std::size_t layer);
std::string wk(std::size_t layer);
std::string wv(std::size_t layer);
std::string wo(std::size_t layer);
std::string mlp_norm(std::size_t layer);
std::string mlp_up(std::size_t layer);
std::string mlp_down(std::size_t layer);
}  // namespace weight_names

// Pre-norm decoder-only transformer parameters (the unsteered base model).
struct Model {
  ModelConfig config;
  WeightMap weights;

  const Tensor& weight(const std::string& name) const;

  // Every schema tensor present with the right shape and nothing else.
  void validate() const;
};

// Matrices and embeddings ~ N(0, 0.02^2); RMSNorm gains start at 1.
Model init_random(const ModelConfig& cfg, std::uint64_t seed);

// FNV-1a over the little-endian float bytes.
std::uint64_t tensor_checksum(const Tensor& t);
// FNV-1a over (name, data) of every tensor in name order.
std::uint64_t weights_checksum(const WeightMap& weights);
std::string checksum_hex(std::uint64_t checksum);

}  // namespace steer
