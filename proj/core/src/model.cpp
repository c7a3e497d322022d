#include "steer/model.hpp"

#include <cstdio>
#include <cstring>

#include "steer/errors.hpp"

namespace steer {

void ModelConfig::validate() const {
  if (vocab_size < kByteVocabSize) throw ConfigError("vocab_size must be at least 259 for the byte tokenizer");
  if (d_model == 0 || n_layers == 0 || n_heads == 0 || d_ff == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (d_model % n_heads != 0) throw ConfigError("d_model must be divisible by n_heads");
  if (max_seq < 1) throw ConfigError("max_seq must be >= 1");
}

nlohmann::json to_json(const ModelConfig& cfg) {
  return {{"vocab_size", cfg.vocab_size}, {"d_model", cfg.d_model}, {"n_layers", cfg.n_layers},
          {"n_heads", cfg.n_heads},       {"d_ff", cfg.d_ff},       {"max_seq", cfg.max_seq},
          {"init_seed", cfg.init_seed}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  ModelConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (!value.is_number_unsigned() && !(value.is_number_integer() && value.get<std::int64_t>() >= 0)) {
      throw ConfigError("model config field '" + key + "' must be a non-negative integer");
    }
    const auto v = value.get<std::uint64_t>();
    if (key == "vocab_size") cfg.vocab_size = v;
    else if (key == "d_model") cfg.d_model = v;
    else if (key == "n_layers") cfg.n_layers = v;
    else if (key == "n_heads") cfg.n_heads = v;
    else if (key == "d_ff") cfg.d_ff = v;
    else if (key == "max_seq") cfg.max_seq = v;
    else if (key == "init_seed") cfg.init_seed = v;
    else throw ConfigError("unknown model config field '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

namespace weight_names {
namespace {
std::string layer_prefix(std::size_t layer) { return "layers." + std::to_string(layer) + "."; }
}  // namespace
std::string attn_norm(std::size_t l) { return layer_prefix(l) + "attn_norm"; }
std::string wq(std::size_t l) { return layer_prefix(l) + "attn.wq"; }
std::string wk(std::size_t l) { return layer_prefix(l) + "attn.wk"; }
std::string wv(std::size_t l) { return layer_prefix(l) + "attn.wv"; }
std::string wo(std::size_t l) { return layer_prefix(l) + "attn.wo"; }
std::string mlp_norm(std::size_t l) { return layer_prefix(l) + "mlp_norm"; }
std::string mlp_up(std::size_t l) { return layer_prefix(l) + "mlp.up"; }
std::string mlp_down(std::size_t l) { return layer_prefix(l) + "mlp.down"; }
}  // namespace weight_names

std::map<std::string, Shape> weight_schema(const ModelConfig& cfg) {
  namespace wn = weight_names;
  const std::size_t d = cfg.d_model;
  std::map<std::string, Shape> s;
  s[wn::kTokEmb] = {cfg.vocab_size, d};
  s[wn::kPosEmb] = {cfg.max_seq, d};
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    s[wn::attn_norm(l)] = {d};
    s[wn::wq(l)] = {d, d};
    s[wn::wk(l)] = {d, d};
    s[wn::wv(l)] = {d, d};
    s[wn::wo(l)] = {d, d};
    s[wn::mlp_norm(l)] = {d};
    s[wn::mlp_up(l)] = {d, cfg.d_ff};
    s[wn::mlp_down(l)] = {cfg.d_ff, d};
  }
  s[wn::kFinalNorm] = {d};
  s[wn::kUnembed] = {d, cfg.vocab_size};
  return s;
}

const Tensor& Model::weight(const std::string& name) const {
  auto it = weights.find(name);
  if (it == weights.end()) throw ConfigError("model has no tensor named '" + name + "'");
  return it->second;
}

void Model::validate() const {
  config.validate();
  const auto schema = weight_schema(config);
  for (const auto& [name, shape] : schema) {
    auto it = weights.find(name);
    if (it == weights.end()) throw ConfigError("model is missing tensor '" + name + "'");
    if (it->second.shape() != shape) throw ConfigError("tensor '" + name + "' has the wrong shape");
  }
  for (const auto& [name, _] : weights) {
    if (!schema.contains(name)) throw ConfigError("unexpected tensor '" + name + "'");
  }
}

Model init_random(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Model m;
  m.config = cfg;
  m.config.init_seed = seed;
  Rng rng(seed);
  // std::map iteration gives a fixed, name-ordered draw sequence.
  for (const auto& [name, shape] : weight_schema(cfg)) {
    Tensor t(shape);
    const bool is_gain = name.ends_with("_norm");
    for (auto& v : t.data()) v = is_gain ? 1.0f : static_cast<float>(0.02 * rng.normal());
    m.weights.emplace(name, std::move(t));
  }
  return m;
}

namespace {
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fnv_bytes(std::uint64_t& h, const unsigned char* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

void fnv_floats(std::uint64_t& h, std::span<const float> data) {
  for (float f : data) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof bits);
    unsigned char le[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                           static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
    fnv_bytes(h, le, 4);
  }
}
}  // namespace

std::uint64_t tensor_checksum(const Tensor& t) {
  std::uint64_t h = kFnvOffset;
  fnv_floats(h, t.data());
  return h;
}

std::uint64_t weights_checksum(const WeightMap& weights) {
  std::uint64_t h = kFnvOffset;
  for (const auto& [name, t] : weights) {
    fnv_bytes(h, reinterpret_cast<const unsigned char*>(name.data()), name.size());
    fnv_floats(h, t.data());
  }
  return h;
}

std::string checksum_hex(std::uint64_t checksum) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(checksum));
  return buf;
}

}  // namespace steer
