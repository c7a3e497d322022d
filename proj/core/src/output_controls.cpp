#include "steer/output_controls.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

#include "steer/evaluation/checkers.hpp"

namespace steer {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

RewardFn make_reward(const nlohmann::json& spec) {
  if (!spec.is_object() || !spec.contains("type") || !spec.at("type").is_string()) {
    throw ConfigError("reward spec needs a string 'type'");
  }
  const auto type = spec.at("type").get<std::string>();
  if (type == "constant") {
    const double value = spec.value("value", 0.0);
    return {"constant", [value](const std::string&, const std::string&) { return value; }};
  }
  if (type == "keyword") {
    if (!spec.contains("keywords") || !spec.at("keywords").is_array() || spec.at("keywords").empty()) {
      throw ConfigError("keyword reward needs a nonempty 'keywords' list");
    }
    std::vector<std::string> keys;
    for (const auto& k : spec.at("keywords")) keys.push_back(lower(k.get<std::string>()));
    return {"keyword", [keys](const std::string&, const std::string& completion) {
              const std::string hay = lower(completion);
              std::size_t hits = 0;
              for (const auto& k : keys)
                if (hay.find(k) != std::string::npos) ++hits;
              return static_cast<double>(hits) / static_cast<double>(keys.size());
            }};
  }
  if (type == "instruction") {
    if (!spec.contains("instruction_id_list") || !spec.at("instruction_id_list").is_array()) {
      throw ConfigError("instruction reward needs 'instruction_id_list'");
    }
    const auto ids = spec.at("instruction_id_list").get<std::vector<std::string>>();
    nlohmann::json kwargs = spec.value("kwargs", nlohmann::json::array());
    if (!kwargs.is_array() || kwargs.size() != ids.size()) {
      throw ConfigError("instruction reward 'kwargs' must parallel 'instruction_id_list'");
    }
    for (const auto& id : ids) {
      if (!CheckerRegistry::builtin().contains(id)) throw RegistryError("unknown instruction checker '" + id + "'");
    }
    if (ids.empty()) return {"instruction", [](const std::string&, const std::string&) { return 1.0; }};
    return {"instruction", [ids, kwargs](const std::string&, const std::string& completion) {
              std::size_t ok = 0;
              for (std::size_t i = 0; i < ids.size(); ++i)
                if (check_instruction(ids[i], kwargs[i], completion)) ++ok;
              return static_cast<double>(ok) / static_cast<double>(ids.size());
            }};
  }
  throw ConfigError("unknown reward type '" + type + "'");
}

void LookaheadParams::validate() const {
  if (beam_width < 1 || expansions_per_beam < 1 || lookahead_len < 1 || max_rounds < 1) {
    throw ConfigError("lookahead parameters must all be >= 1");
  }
}

namespace {

struct Beam {
  DealCandidate state;
  KvCache cache;
  std::vector<float> next_logits;
};

// Indices of the b largest logits, ties to the lower id.
std::vector<TokenId> top_tokens(const std::vector<float>& logits, std::size_t b) {
  std::vector<TokenId> idx(logits.size());
  std::iota(idx.begin(), idx.end(), TokenId{0});
  b = std::min(b, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(b), idx.end(), [&](TokenId a, TokenId c) {
    if (logits[a] != logits[c]) return logits[a] > logits[c];
    return a < c;
  });
  idx.resize(b);
  return idx;
}

bool ranks_before(const DealCandidate& a, const DealCandidate& b) {
  if (a.reward != b.reward) return a.reward > b.reward;
  if (a.logprob != b.logprob) return a.logprob > b.logprob;
  return a.tokens < b.tokens;
}

class Searcher {
 public:
  Searcher(const Model& model, const GenParams& gen, std::span<const Hook> hooks, StepContext ctx)
      : model_(model), gen_(gen), hooks_(hooks), ctx_(std::move(ctx)) {}

  Beam prefill(const TokenIds& prompt) {
    Beam b{{}, KvCache(model_.config), {}};
    ctx_.phase = Phase::Prefill;
    ctx_.prompt_len = prompt.size();
    ctx_.step_index = 0;
    ctx_.positions.resize(prompt.size());
    std::iota(ctx_.positions.begin(), ctx_.positions.end(), std::size_t{0});
    auto res = forward_step(model_, b.cache, prompt, hooks_, ctx_);
    auto last = res.logits.row(res.logits.rows() - 1);
    b.next_logits.assign(last.begin(), last.end());
    return b;
  }

  // Appends one token and advances the cache unless the beam is finished.
  void push(Beam& b, TokenId tok) {
    const auto lp = log_softmax(b.next_logits);
    b.state.logprob += lp[static_cast<std::size_t>(tok)];
    if (tok == kEos) {
      b.state.done = true;
      return;
    }
    b.state.tokens.push_back(tok);
    if (b.state.tokens.size() >= gen_.max_new_tokens || b.cache.length() >= model_.config.max_seq) {
      b.state.done = true;
      return;
    }
    ctx_.phase = Phase::Decode;
    ctx_.step_index = b.state.tokens.size();
    ctx_.positions.assign(1, b.cache.length());
    auto res = forward_step(model_, b.cache, {tok}, hooks_, ctx_);
    auto row = res.logits.row(0);
    b.next_logits.assign(row.begin(), row.end());
  }

  TokenId greedy(const Beam& b) const {
    return static_cast<TokenId>(std::max_element(b.next_logits.begin(), b.next_logits.end()) - b.next_logits.begin());
  }

 private:
  const Model& model_;
  const GenParams& gen_;
  std::span<const Hook> hooks_;
  StepContext ctx_;
};

}  // namespace

TokenIds deal_generate(const Model& model, const TokenIds& prompt_ids, const std::string& prompt_text,
                       const RewardFn& reward, const LookaheadParams& lookahead, const GenParams& gen,
                       std::span<const Hook> hooks, const StepContext& base_ctx, DealTrace* trace) {
  lookahead.validate();
  gen.validate();
  if (prompt_ids.empty()) throw LengthError("generation prompt must be nonempty");

  Searcher search(model, gen, hooks, base_ctx);
  std::vector<Beam> beams;
  beams.push_back(search.prefill(prompt_ids));

  for (std::size_t round = 0; round < lookahead.max_rounds; ++round) {
    std::vector<Beam> candidates;
    std::size_t expanded = 0;
    for (const Beam& beam : beams) {
      if (beam.state.done) {
        candidates.push_back(beam);
        continue;
      }
      for (TokenId tok : top_tokens(beam.next_logits, lookahead.expansions_per_beam)) {
        Beam cand = beam;
        search.push(cand, tok);
        for (std::size_t step = 1; step < lookahead.lookahead_len && !cand.state.done; ++step) {
          search.push(cand, search.greedy(cand));
        }
        cand.state.reward = reward(prompt_text, detokenize(cand.state.tokens));
        candidates.push_back(std::move(cand));
        ++expanded;
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Beam& a, const Beam& b) { return ranks_before(a.state, b.state); });
    if (trace) {
      std::vector<DealCandidate> ranked;
      for (const auto& c : candidates) ranked.push_back(c.state);
      trace->rounds.push_back(std::move(ranked));
      trace->expansions.push_back(expanded);
    }
    if (candidates.size() > lookahead.beam_width) {
      candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(lookahead.beam_width), candidates.end());
    }
    beams = std::move(candidates);
    if (std::all_of(beams.begin(), beams.end(), [](const Beam& b) { return b.state.done; })) break;
  }
  return beams.front().state.tokens;
}

Tensor logit_bias(const Tensor& logits, const LogitBiasMap& bias) {
  Tensor out = logits;
  const std::size_t vocab = logits.cols();
  for (const auto& [id, _] : bias) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw BiasError("logit bias token id " + std::to_string(id) + " outside vocabulary of " + std::to_string(vocab));
    }
  }
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (const auto& [id, b] : bias) row[static_cast<std::size_t>(id)] += b;
  }
  return out;
}

LogitBiasMap logit_bias_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("logit bias must be an object of token id -> value");
  LogitBiasMap out;
  for (const auto& [key, value] : j.items()) {
    TokenId id;
    try {
      std::size_t used = 0;
      id = static_cast<TokenId>(std::stol(key, &used));
      if (used != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw ConfigError("logit bias key '" + key + "' is not a token id");
    }
    if (value.is_number()) {
      out[id] = value.get<float>();
    } else if (value == "inf" || value == "+inf") {
      out[id] = std::numeric_limits<float>::infinity();
    } else if (value == "-inf") {
      out[id] = -std::numeric_limits<float>::infinity();
    } else {
      throw ConfigError("logit bias value for '" + key + "' must be a number, \"inf\" or \"-inf\"");
    }
  }
  return out;
}

DeAL::DeAL(std::string name, nlohmann::json params) : OutputControl(std::move(name), std::move(params)) {
  lookahead_.beam_width = param_or<std::size_t>("beam_width", lookahead_.beam_width);
  lookahead_.expansions_per_beam = param_or<std::size_t>("expansions_per_beam", lookahead_.expansions_per_beam);
  lookahead_.lookahead_len = param_or<std::size_t>("lookahead_len", lookahead_.lookahead_len);
  lookahead_.max_rounds = param_or<std::size_t>("max_rounds", lookahead_.max_rounds);
  lookahead_.validate();
  if (!this->params().contains("reward")) throw ConfigError(this->name() + ": missing required parameter 'reward'");
}

TokenIds DeAL::generate(const DecodeRequest& req) const {
  nlohmann::json spec = params().at("reward");
  if (req.ctx.overrides.contains(name())) {
    for (const auto& [k, v] : req.ctx.overrides.at(name()).items()) spec[k] = v;
  }
  const RewardFn reward = make_reward(spec);
  return deal_generate(req.model, req.prompt_ids, req.prompt_text, reward, lookahead_, req.params, req.hooks, req.ctx);
}

LogitBias::LogitBias(std::string name, nlohmann::json params)
    : OutputControl(std::move(name), std::move(params)),
      bias_(logit_bias_from_json(this->params().value("bias", nlohmann::json::object()))) {}

void LogitBias::steer(Model& model) {
  for (const auto& [id, _] : bias_) {
    if (id < 0 || static_cast<std::size_t>(id) >= model.config.vocab_size) {
      throw BiasError("logit bias token id " + std::to_string(id) + " outside vocabulary");
    }
  }
}

TokenIds LogitBias::generate(const DecodeRequest& req) const {
  std::vector<Hook> hooks(req.hooks.begin(), req.hooks.end());
  if (!bias_.empty()) {
    hooks.push_back({HookSite::logits(), [bias = bias_](const StepContext&, Tensor& logits) { logits = logit_bias(logits, bias); },
                     name() + ".bias"});
  }
  return default_generate(req.model, req.prompt_ids, req.params, hooks, req.ctx);
}

}  // namespace steer
