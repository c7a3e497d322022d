#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "steer/numerics.hpp"

namespace steer {

// Where a hook attaches. Tensor shapes seen by a hook, for a forward pass
// over n new tokens with t = total cached positions after the pass:
//   ResidualPre / ResidualPost  [n x d_model]
//   AttnWeights                 [n_heads x n x t]   post-softmax, causal zeros
//   HeadOut                     [n x n_heads x d_head]  before the O-projection
//   Logits                      [n x vocab]
enum class SiteKind { ResidualPre, ResidualPost, AttnWeights, HeadOut, Logits };

struct HookSite {
  SiteKind kind = SiteKind::Logits;
  std::size_t layer = 0;

  static HookSite residual_pre(std::size_t layer) { return {SiteKind::ResidualPre, layer}; }
  static HookSite residual_post(std::size_t layer) { return {SiteKind::ResidualPost, layer}; }
  static HookSite attn_weights(std::size_t layer) { return {SiteKind::AttnWeights, layer}; }
  static HookSite head_out(std::size_t layer) { return {SiteKind::HeadOut, layer}; }
  static HookSite logits() { return {SiteKind::Logits, 0}; }

  bool operator==(const HookSite& o) const {
    return kind == o.kind && (kind == SiteKind::Logits || layer == o.layer);
  }
};

std::string to_string(const HookSite& site);

enum class Phase { Prefill, Decode };

// Per-forward-pass information handed to every hook.
struct StepContext {
  Phase phase = Phase::Prefill;
  // Absolute positions of the tokens in this pass.
  std::vector<std::size_t> positions;
  // Number of tokens (including BOS) in the prompt being generated from.
  std::size_t prompt_len = 0;
  std::size_t step_index = 0;
  // Resolved runtime overrides, keyed by control name.
  nlohmann::json overrides = nlohmann::json::object();
};

// Hooks rewrite the in-flight tensor in place and must keep its shape.
using HookFn = std::function<void(const StepContext&, Tensor&)>;

struct Hook {
  HookSite site;
  HookFn transform;
  std::string label;
};

}  // namespace steer
