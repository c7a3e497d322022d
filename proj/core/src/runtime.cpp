#include "steer/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "steer/errors.hpp"

namespace steer {

std::string to_string(const HookSite& site) {
  switch (site.kind) {
    case SiteKind::ResidualPre: return "ResidualPre(" + std::to_string(site.layer) + ")";
    case SiteKind::ResidualPost: return "ResidualPost(" + std::to_string(site.layer) + ")";
    case SiteKind::AttnWeights: return "AttnWeights(" + std::to_string(site.layer) + ")";
    case SiteKind::HeadOut: return "HeadOut(" + std::to_string(site.layer) + ")";
    case SiteKind::Logits: return "Logits";
  }
  return "?";
}

KvCache::KvCache(const ModelConfig& cfg)
    : d_model_(cfg.d_model), keys_(cfg.n_layers), values_(cfg.n_layers) {
  for (auto& k : keys_) k.reserve(cfg.max_seq * cfg.d_model);
  for (auto& v : values_) v.reserve(cfg.max_seq * cfg.d_model);
}

namespace {

float gelu(float x) {
  constexpr float kC = 0.7978845608028654f;  // sqrt(2/pi)
  return 0.5f * x * (1.0f + std::tanh(kC * (x + 0.044715f * x * x * x)));
}

void run_hooks(std::span<const Hook> hooks, const HookSite& site, const StepContext& ctx, Tensor& value) {
  for (const auto& hook : hooks) {
    if (!(hook.site == site)) continue;
    const Shape before = value.shape();
    hook.transform(ctx, value);
    if (value.shape() != before) {
      throw DimensionError("hook '" + hook.label + "' at " + to_string(site) + " changed the tensor shape");
    }
  }
}

Tensor rms_norm_rows(const Tensor& x, const Tensor& gamma) {
  Tensor out(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) rms_norm_into(x.row(r), gamma.data(), kNormEps, out.row(r));
  return out;
}

void add_inplace(Tensor& x, const Tensor& y) {
  auto xd = x.data();
  auto yd = y.data();
  for (std::size_t i = 0; i < xd.size(); ++i) xd[i] += yd[i];
}

}  // namespace

// Friend of KvCache; holds the body of one forward pass.
struct ForwardPass {
  static ForwardResult run(const Model& model, KvCache& cache, const TokenIds& ids, std::span<const Hook> hooks,
                           const StepContext& ctx_in) {
    namespace wn = weight_names;
    const ModelConfig& cfg = model.config;
    const std::size_t n = ids.size();
    const std::size_t start = cache.length_;
    const std::size_t total = start + n;
    const std::size_t d = cfg.d_model, n_heads = cfg.n_heads, dh = cfg.d_head();
    if (n == 0) throw LengthError("forward pass needs at least one token");
    if (cache.d_model_ != d || cache.keys_.size() != cfg.n_layers) throw DimensionError("cache does not match model");
    if (total > cfg.max_seq) {
      throw LengthError("sequence of " + std::to_string(total) + " tokens exceeds max_seq " +
                        std::to_string(cfg.max_seq));
    }

    StepContext ctx = ctx_in;
    if (ctx.positions.empty()) {
      ctx.positions.resize(n);
      std::iota(ctx.positions.begin(), ctx.positions.end(), start);
    } else if (ctx.positions.size() != n) {
      throw DimensionError("step context positions do not match the token count");
    }

    const Tensor& tok_emb = model.weight(wn::kTokEmb);
    const Tensor& pos_emb = model.weight(wn::kPosEmb);
    Tensor x({n, d});
    for (std::size_t i = 0; i < n; ++i) {
      const TokenId id = ids[i];
      if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab_size) {
        throw DimensionError("token id " + std::to_string(id) + " outside vocabulary");
      }
      auto te = tok_emb.row(static_cast<std::size_t>(id));
      auto pe = pos_emb.row(start + i);
      auto xr = x.row(i);
      for (std::size_t c = 0; c < d; ++c) xr[c] = te[c] + pe[c];
    }

    ForwardResult result;
    result.attn.reserve(cfg.n_layers);
    const float scale = 1.0f / std::sqrt(static_cast<float>(dh));

    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
      run_hooks(hooks, HookSite::residual_pre(l), ctx, x);

      Tensor h = rms_norm_rows(x, model.weight(wn::attn_norm(l)));
      Tensor q = matmul(h, model.weight(wn::wq(l)));
      Tensor k = matmul(h, model.weight(wn::wk(l)));
      Tensor v = matmul(h, model.weight(wn::wv(l)));
      auto& kc = cache.keys_[l];
      auto& vc = cache.values_[l];
      kc.insert(kc.end(), k.data().begin(), k.data().end());
      vc.insert(vc.end(), v.data().begin(), v.data().end());

      Tensor attn({n_heads, n, total});
      for (std::size_t hd = 0; hd < n_heads; ++hd) {
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t visible = start + i + 1;
          const float* qi = &q.at(i, hd * dh);
          float* row = &attn[(hd * n + i) * total];
          for (std::size_t j = 0; j < visible; ++j) {
            const float* kj = &kc[j * d + hd * dh];
            float s = 0.0f;
            for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
            row[j] = s * scale;
          }
          softmax_inplace(std::span<float>(row, visible));
        }
      }
      run_hooks(hooks, HookSite::attn_weights(l), ctx, attn);
#ifndef NDEBUG
      for (std::size_t r = 0; r < attn.rows(); ++r) {
        const auto row = attn.row(r);
        const float sum = std::accumulate(row.begin(), row.end(), 0.0f);
        if (std::fabs(sum - 1.0f) > 1e-4f) throw DegenerateRowError("attention row does not sum to 1 after hooks");
      }
#endif

      Tensor head_out({n, n_heads, dh});
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t visible = start + i + 1;
        for (std::size_t hd = 0; hd < n_heads; ++hd) {
          const float* row = &attn[(hd * n + i) * total];
          float* out = &head_out[(i * n_heads + hd) * dh];
          for (std::size_t j = 0; j < visible; ++j) {
            const float a = row[j];
            const float* vj = &vc[j * d + hd * dh];
            for (std::size_t c = 0; c < dh; ++c) out[c] += a * vj[c];
          }
        }
      }
      run_hooks(hooks, HookSite::head_out(l), ctx, head_out);

      Tensor concat({n, d}, std::vector<float>(head_out.data().begin(), head_out.data().end()));
      add_inplace(x, matmul(concat, model.weight(wn::wo(l))));

      Tensor h2 = rms_norm_rows(x, model.weight(wn::mlp_norm(l)));
      Tensor up = matmul(h2, model.weight(wn::mlp_up(l)));
      for (auto& u : up.data()) u = gelu(u);
      add_inplace(x, matmul(up, model.weight(wn::mlp_down(l))));

      run_hooks(hooks, HookSite::residual_post(l), ctx, x);
      result.attn.push_back(std::move(attn));
    }

    Tensor final = rms_norm_rows(x, model.weight(wn::kFinalNorm));
    result.logits = matmul(final, model.weight(wn::kUnembed));
    run_hooks(hooks, HookSite::logits(), ctx, result.logits);
    cache.length_ = total;
    return result;
  }
};

ForwardResult forward_step(const Model& model, KvCache& cache, const TokenIds& ids, std::span<const Hook> hooks,
                           const StepContext& ctx) {
  return ForwardPass::run(model, cache, ids, hooks, ctx);
}

ForwardResult forward(const Model& model, const TokenIds& ids, std::span<const Hook> hooks, const StepContext& ctx) {
  KvCache cache(model.config);
  StepContext c = ctx;
  if (c.prompt_len == 0) c.prompt_len = ids.size();
  return ForwardPass::run(model, cache, ids, hooks, c);
}

std::vector<Tensor> capture_sites(const Model& model, const TokenIds& ids, std::span<const HookSite> sites,
                                  std::span<const Hook> hooks) {
  std::vector<Tensor> captured(sites.size());
  std::vector<Hook> all(hooks.begin(), hooks.end());
  for (std::size_t i = 0; i < sites.size(); ++i) {
    all.push_back({sites[i], [&captured, i](const StepContext&, Tensor& t) { captured[i] = t; }, "capture"});
  }
  forward(model, ids, all);
  return captured;
}

GenParams::GenParams(std::size_t max_new, bool sample, float temp, std::uint64_t s)
    : max_new_tokens(max_new), do_sample(sample), temperature(temp), seed(s) {
  validate();
}

void GenParams::validate() const {
  if (max_new_tokens < 1) throw ConfigError("max_new_tokens must be >= 1");
  if (do_sample && !(temperature > 0.0f)) throw ConfigError("temperature must be > 0 when sampling");
}

std::vector<double> log_softmax(std::span<const float> logits) {
  if (logits.empty()) throw DegenerateRowError("log_softmax of an empty row");
  const double mx = *std::max_element(logits.begin(), logits.end());
  if (mx == -std::numeric_limits<double>::infinity()) throw DegenerateRowError("log_softmax row has no finite entry");
  std::vector<double> out(logits.size());
  if (mx == std::numeric_limits<double>::infinity()) {
    const double n_inf = static_cast<double>(std::count(logits.begin(), logits.end(), std::numeric_limits<float>::infinity()));
    for (std::size_t i = 0; i < logits.size(); ++i) {
      out[i] = std::isinf(logits[i]) && logits[i] > 0 ? -std::log(n_inf) : -std::numeric_limits<double>::infinity();
    }
    return out;
  }
  double sum = 0.0;
  for (float v : logits) sum += std::exp(static_cast<double>(v) - mx);
  const double lse = mx + std::log(sum);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = static_cast<double>(logits[i]) - lse;
  return out;
}

TokenId select_token(std::span<const float> logits, const GenParams& params, Rng& rng) {
  if (logits.empty()) throw DegenerateRowError("cannot select a token from empty logits");
  const auto max_it = std::max_element(logits.begin(), logits.end());
  if (!params.do_sample || std::isinf(*max_it)) {
    if (*max_it == -std::numeric_limits<float>::infinity()) throw DegenerateRowError("every token is masked");
    return static_cast<TokenId>(max_it - logits.begin());
  }
  const double mx = *max_it;
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp((static_cast<double>(logits[i]) - mx) / params.temperature);
    sum += p[i];
  }
  const double u = rng.uniform() * sum;
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc && p[i] > 0.0) return static_cast<TokenId>(i);
  }
  // Rounding left u at the very top; fall back to the last token with mass.
  for (std::size_t i = p.size(); i-- > 0;)
    if (p[i] > 0.0) return static_cast<TokenId>(i);
  throw DegenerateRowError("sampling distribution has no mass");
}

TokenIds default_generate(const Model& model, const TokenIds& prompt, const GenParams& params,
                          std::span<const Hook> hooks, const StepContext& base_ctx) {
  params.validate();
  if (prompt.empty()) throw LengthError("generation prompt must be nonempty");
  KvCache cache(model.config);
  StepContext ctx = base_ctx;
  ctx.phase = Phase::Prefill;
  ctx.prompt_len = prompt.size();
  ctx.step_index = 0;
  ctx.positions.resize(prompt.size());
  std::iota(ctx.positions.begin(), ctx.positions.end(), std::size_t{0});
  ForwardResult res = forward_step(model, cache, prompt, hooks, ctx);

  Rng rng(params.seed);
  TokenIds out;
  auto last = res.logits.row(res.logits.rows() - 1);
  while (true) {
    const TokenId tok = select_token(last, params, rng);
    if (tok == kEos) break;
    out.push_back(tok);
    if (out.size() >= params.max_new_tokens || cache.length() >= model.config.max_seq) break;
    ctx.phase = Phase::Decode;
    ctx.step_index = out.size();
    ctx.positions.assign(1, cache.length());
    res = forward_step(model, cache, {tok}, hooks, ctx);
    last = res.logits.row(0);
  }
  return out;
}

}  // namespace steer
