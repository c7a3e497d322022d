#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "steer/control.hpp"

namespace steer {

// Text-level score of a completion; higher is better. Must be pure.
struct RewardFn {
  std::string name;
  std::function<double(const std::string& prompt, const std::string& completion)> fn;

  double operator()(const std::string& prompt, const std::string& completion) const { return fn(prompt, completion); }
};

// Built-in rewards selected by spec["type"]:
//   "keyword":     fraction of spec["keywords"] present (case-insensitive)
//   "instruction": fraction of checkers (spec["instruction_id_list"] with
//                  spec["kwargs"]) the completion satisfies
//   "constant":    spec["value"] (default 0)
RewardFn make_reward(const nlohmann::json& spec);

struct LookaheadParams {
  std::size_t beam_width = 2;
  std::size_t expansions_per_beam = 2;
  std::size_t lookahead_len = 2;
  std::size_t max_rounds = 64;

  void validate() const;
};

struct DealCandidate {
  TokenIds tokens;
  double logprob = 0.0;
  double reward = 0.0;
  bool done = false;
};

// Everything the search looked at, for inspection and tests.
struct DealTrace {
  std::vector<std::vector<DealCandidate>> rounds;  // candidates per round, ranked
  std::vector<std::size_t> expansions;             // new candidates per round
};

// Reward-guided lookahead search. Each round every live beam proposes its
// top-b next tokens, each proposal is extended greedily for l-1 more tokens,
// and all proposals (plus finished beams) are ranked by reward, then total
// log-probability, then lexicographic token order; the best k survive.
// Returns the generated tokens of the best beam (EOS excluded).
TokenIds deal_generate(const Model& model, const TokenIds& prompt_ids, const std::string& prompt_text,
                       const RewardFn& reward, const LookaheadParams& lookahead, const GenParams& gen,
                       std::span<const Hook> hooks = {}, const StepContext& base_ctx = {}, DealTrace* trace = nullptr);

using LogitBiasMap = std::map<TokenId, float>;

// logits[.., t] += bias[t] for each row; BiasError for ids outside the vocab.
Tensor logit_bias(const Tensor& logits, const LogitBiasMap& bias);

// JSON object {"<token id>": number | "inf" | "-inf"}.
LogitBiasMap logit_bias_from_json(const nlohmann::json& j);

//   params: beam_width, expansions_per_beam, lookahead_len, max_rounds, reward
//   runtime fields are merged over the reward spec (e.g. instruction_id_list
//   and kwargs taken from the datapoint)
class DeAL final : public OutputControl {
 public:
  DeAL(std::string name, nlohmann::json params);
  TokenIds generate(const DecodeRequest& request) const override;

  const LookaheadParams& lookahead() const { return lookahead_; }

 private:
  LookaheadParams lookahead_;
};

//   params: bias ({"<token id>": value})
class LogitBias final : public OutputControl {
 public:
  LogitBias(std::string name, nlohmann::json params);
  void steer(Model& model) override;
  TokenIds generate(const DecodeRequest& request) const override;

 private:
  LogitBiasMap bias_;
};

}  // namespace steer
