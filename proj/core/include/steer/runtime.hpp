#pragma once

#include <span>
#include <vector>

#include "steer/hooks.hpp"
#include "steer/model.hpp"
#include "steer/tokenizer.hpp"

namespace steer {

inline constexpr float kNormEps = 1e-5f;

// Keys and values of every layer for the positions processed so far.
class KvCache {
 public:
  explicit KvCache(const ModelConfig& cfg);

  std::size_t length() const { return length_; }

 private:
  friend struct ForwardPass;
  std::size_t d_model_;
  std::size_t length_ = 0;
  std::vector<std::vector<float>> keys_;
  std::vector<std::vector<float>> values_;
};

struct ForwardResult {
  Tensor logits;              // [n x vocab]
  std::vector<Tensor> attn;   // per layer [n_heads x n x t], after hooks
};

// Runs the new tokens through the model, appending to the cache. Positions
// continue from cache.length(); ctx.positions is filled in if left empty.
ForwardResult forward_step(const Model& model, KvCache& cache, const TokenIds& ids, std::span<const Hook> hooks,
                           const StepContext& ctx);

// Full uncached pass over ids starting at position 0.
ForwardResult forward(const Model& model, const TokenIds& ids, std::span<const Hook> hooks = {},
                      const StepContext& ctx = {});

// Copies of the tensors flowing through each requested site during a full
// pass (after any hooks registered at that site have run).
std::vector<Tensor> capture_sites(const Model& model, const TokenIds& ids, std::span<const HookSite> sites,
                                  std::span<const Hook> hooks = {});

struct GenParams {
  std::size_t max_new_tokens = 32;
  bool do_sample = false;
  float temperature = 1.0f;
  std::uint64_t seed = 0;

  GenParams() = default;
  // Throws ConfigError when max_new_tokens == 0 or a sampling temperature is not positive.
  explicit GenParams(std::size_t max_new_tokens, bool do_sample = false, float temperature = 1.0f,
                     std::uint64_t seed = 0);

  void validate() const;
};

std::vector<double> log_softmax(std::span<const float> logits);

// Greedy: first index of the maximum. Sampling: temperature softmax drawn
// from rng; a +inf logit is always chosen.
TokenId select_token(std::span<const float> logits, const GenParams& params, Rng& rng);

// Prefill once, then single-token cached decode steps. Returns only the new
// tokens; stops before EOS, at max_new_tokens, or when the context is full.
TokenIds default_generate(const Model& model, const TokenIds& prompt, const GenParams& params,
                          std::span<const Hook> hooks = {}, const StepContext& base_ctx = {});

}  // namespace steer
