#pragma once

#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "steer/hooks.hpp"
#include "steer/numerics.hpp"
#include "steer/tokenizer.hpp"

namespace steer {

// Per-step decision about whether a transform fires.
class Gate {
 public:
  virtual ~Gate() = default;
  virtual bool open(const StepContext& ctx) const = 0;
};

class AlwaysOpenGate final : public Gate {
 public:
  bool open(const StepContext&) const override { return true; }
};

// Which positions an additive transform touches: decode-phase positions
// (everything after the prompt), prefill positions, or both.
enum class TokenScope { Generated, Prompt, All };
TokenScope token_scope_from_string(const std::string& s);
bool in_scope(TokenScope scope, Phase phase);

// hidden + multiplier * (v / |v| if normalize else v) when in scope,
// otherwise hidden unchanged.
Tensor additive_transform(const Tensor& hidden, const Tensor& v, float multiplier, bool normalize, bool in_scope);

// Adds a fixed scaled direction to every row of a residual-stream tensor.
class AdditiveTransform {
 public:
  // Raises NormalizationError for a zero vector with normalize=true.
  AdditiveTransform(const Tensor& vector, float multiplier, bool normalize, TokenScope scope,
                    std::shared_ptr<const Gate> gate = std::make_shared<AlwaysOpenGate>());

  void apply(const StepContext& ctx, Tensor& hidden) const;
  const Tensor& shift() const { return shift_; }

 private:
  Tensor shift_;  // multiplier * (normalized) vector
  TokenScope scope_;
  std::shared_ptr<const Gate> gate_;
};

// ActAdd: row p of a [m x d] sequence is added at absolute position p < m,
// during prefill only.
class PositionalAdditiveTransform {
 public:
  PositionalAdditiveTransform(Tensor rows, float coefficient,
                              std::shared_ptr<const Gate> gate = std::make_shared<AlwaysOpenGate>());

  void apply(const StepContext& ctx, Tensor& hidden) const;
  std::size_t length() const { return rows_.empty() ? 0 : rows_.dim(0); }

 private:
  Tensor rows_;
  float coefficient_;
  std::shared_ptr<const Gate> gate_;
};

// ITI: adds a per-head shift to HeadOut tensors [n x n_heads x d_head].
class HeadAdditiveTransform {
 public:
  struct HeadShift {
    std::size_t head;
    Tensor shift;  // [d_head]
  };

  HeadAdditiveTransform(std::vector<HeadShift> shifts, TokenScope scope,
                        std::shared_ptr<const Gate> gate = std::make_shared<AlwaysOpenGate>());

  void apply(const StepContext& ctx, Tensor& head_out) const;

 private:
  std::vector<HeadShift> shifts_;
  TokenScope scope_;
  std::shared_ptr<const Gate> gate_;
};

enum class ScalePosition { Include, Exclude };
ScalePosition scale_position_from_string(const std::string& s);

// For each selected head of attn [n_heads x q x k], multiplies the entries at
// key positions in `span_keys` (Include) or outside it (Exclude) by alpha and
// renormalizes each row. Unselected heads are untouched.
void pasta_rescale(Tensor& attn, const std::vector<std::size_t>& heads, const std::set<std::size_t>& span_keys,
                   float alpha, ScalePosition position);

// All non-overlapping occurrences of each substring in `text`, as token
// ranges of BOS + tokenize(text).
std::vector<TokenSpan> resolve_substring_spans(const std::string& text, const std::vector<std::string>& substrings);

}  // namespace steer
