#include "steer/state/transforms.hpp"

#include "steer/errors.hpp"

namespace steer {

TokenScope token_scope_from_string(const std::string& s) {
  if (s == "generated") return TokenScope::Generated;
  if (s == "prompt") return TokenScope::Prompt;
  if (s == "all") return TokenScope::All;
  throw ConfigError("unknown token_scope '" + s + "' (expected generated, prompt or all)");
}

bool in_scope(TokenScope scope, Phase phase) {
  switch (scope) {
    case TokenScope::Generated: return phase == Phase::Decode;
    case TokenScope::Prompt: return phase == Phase::Prefill;
    case TokenScope::All: return true;
  }
  return false;
}

namespace {

Tensor scaled_direction(const Tensor& v, float multiplier, bool normalize) {
  if (v.empty()) throw DimensionError("steering vector is empty");
  Tensor out = v;
  float scale = multiplier;
  if (normalize) {
    const float norm = l2_norm(v.data());
    if (norm == 0.0f) throw NormalizationError("cannot unit-normalize a zero steering vector");
    scale = multiplier / norm;
  }
  for (auto& x : out.data()) x *= scale;
  return out;
}

}  // namespace

Tensor additive_transform(const Tensor& hidden, const Tensor& v, float multiplier, bool normalize, bool scope_ok) {
  if (hidden.size() != v.size()) throw DimensionError("hidden state and steering vector dimensions differ");
  if (!scope_ok) return hidden;
  const Tensor shift = scaled_direction(v, multiplier, normalize);
  Tensor out = hidden;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += shift[i];
  return out;
}

AdditiveTransform::AdditiveTransform(const Tensor& vector, float multiplier, bool normalize, TokenScope scope,
                                     std::shared_ptr<const Gate> gate)
    : shift_(scaled_direction(vector, multiplier, normalize)), scope_(scope), gate_(std::move(gate)) {}

void AdditiveTransform::apply(const StepContext& ctx, Tensor& hidden) const {
  if (!in_scope(scope_, ctx.phase) || !gate_->open(ctx)) return;
  if (hidden.cols() != shift_.size()) throw DimensionError("residual width does not match steering vector");
  for (std::size_t r = 0; r < hidden.rows(); ++r) {
    auto row = hidden.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += shift_[c];
  }
}

PositionalAdditiveTransform::PositionalAdditiveTransform(Tensor rows, float coefficient,
                                                         std::shared_ptr<const Gate> gate)
    : rows_(std::move(rows)), coefficient_(coefficient), gate_(std::move(gate)) {
  if (!rows_.empty() && rows_.rank() != 2) throw DimensionError("positional steering sequence must be [m x d]");
}

void PositionalAdditiveTransform::apply(const StepContext& ctx, Tensor& hidden) const {
  if (ctx.phase != Phase::Prefill || rows_.empty() || !gate_->open(ctx)) return;
  if (hidden.cols() != rows_.cols()) throw DimensionError("residual width does not match steering sequence");
  const std::size_t m = rows_.dim(0);
  for (std::size_t r = 0; r < hidden.rows(); ++r) {
    const std::size_t pos = r < ctx.positions.size() ? ctx.positions[r] : r;
    if (pos >= m) continue;
    auto row = hidden.row(r);
    auto add = rows_.row(pos);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += coefficient_ * add[c];
  }
}

HeadAdditiveTransform::HeadAdditiveTransform(std::vector<HeadShift> shifts, TokenScope scope,
                                             std::shared_ptr<const Gate> gate)
    : shifts_(std::move(shifts)), scope_(scope), gate_(std::move(gate)) {}

void HeadAdditiveTransform::apply(const StepContext& ctx, Tensor& head_out) const {
  if (!in_scope(scope_, ctx.phase) || !gate_->open(ctx)) return;
  if (head_out.rank() != 3) throw DimensionError("head output must be [n x heads x d_head]");
  const std::size_t n = head_out.dim(0), n_heads = head_out.dim(1), dh = head_out.dim(2);
  for (const auto& hs : shifts_) {
    if (hs.head >= n_heads || hs.shift.size() != dh) throw DimensionError("head shift does not fit head output");
    for (std::size_t i = 0; i < n; ++i) {
      float* dst = &head_out[(i * n_heads + hs.head) * dh];
      for (std::size_t c = 0; c < dh; ++c) dst[c] += hs.shift[c];
    }
  }
}

ScalePosition scale_position_from_string(const std::string& s) {
  if (s == "include") return ScalePosition::Include;
  if (s == "exclude") return ScalePosition::Exclude;
  throw ConfigError("unknown scale_position '" + s + "' (expected include or exclude)");
}

void pasta_rescale(Tensor& attn, const std::vector<std::size_t>& heads, const std::set<std::size_t>& span_keys,
                   float alpha, ScalePosition position) {
  if (!(alpha > 0.0f)) throw ConfigError("PASTA alpha must be > 0");
  if (attn.rank() != 3) throw DimensionError("attention must be [heads x q x k]");
  // Scaling every entry of a row by 1 and renormalizing is the identity.
  if (alpha == 1.0f) return;
  const std::size_t n_heads = attn.dim(0), q = attn.dim(1), k = attn.dim(2);
  for (std::size_t h : heads) {
    if (h >= n_heads) throw SelectionError("PASTA head " + std::to_string(h) + " out of range");
    for (std::size_t i = 0; i < q; ++i) {
      float* row = &attn[(h * q + i) * k];
      float sum = 0.0f;
      for (std::size_t j = 0; j < k; ++j) {
        const bool in_span = span_keys.contains(j);
        if (in_span == (position == ScalePosition::Include)) row[j] *= alpha;
        sum += row[j];
      }
      if (sum > 0.0f)
        for (std::size_t j = 0; j < k; ++j) row[j] /= sum;
    }
  }
}

std::vector<TokenSpan> resolve_substring_spans(const std::string& text, const std::vector<std::string>& substrings) {
  std::vector<TokenSpan> spans;
  for (const auto& sub : substrings) {
    if (sub.empty()) continue;
    std::size_t from = 0;
    while (true) {
      const std::size_t at = text.find(sub, from);
      if (at == std::string::npos) break;
      spans.push_back(byte_range_to_tokens(at, at + sub.size()));
      from = at + sub.size();
    }
  }
  return spans;
}

}  // namespace steer
