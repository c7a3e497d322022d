#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "reference.hpp"
#include "steer/output_controls.hpp"
#include "steer/pipeline.hpp"

using namespace steer;
using nlohmann::json;

namespace {

// Uncached beam search with the same ranking rule, for constant rewards.
struct OracleBeam {
  TokenIds tokens;
  double logprob = 0.0;
  bool done = false;
};

std::vector<double> next_logprobs(const Model& m, const TokenIds& prompt, const TokenIds& tokens) {
  TokenIds ids = prompt;
  ids.insert(ids.end(), tokens.begin(), tokens.end());
  const Tensor logits = forward(m, ids).logits;
  return log_softmax(logits.row(logits.rows() - 1));
}

void oracle_push(const Model& m, const TokenIds& prompt, OracleBeam& b, TokenId tok, std::size_t max_new) {
  b.logprob += next_logprobs(m, prompt, b.tokens)[static_cast<std::size_t>(tok)];
  if (tok == kEos) {
    b.done = true;
    return;
  }
  b.tokens.push_back(tok);
  if (b.tokens.size() >= max_new) b.done = true;
}

TokenIds oracle_beam_search(const Model& m, const TokenIds& prompt, std::size_t k, std::size_t b, std::size_t l,
                            std::size_t max_new) {
  std::vector<OracleBeam> beams(1);
  for (std::size_t round = 0; round < 64; ++round) {
    std::vector<OracleBeam> cands;
    for (const auto& beam : beams) {
      if (beam.done) {
        cands.push_back(beam);
        continue;
      }
      const auto lp = next_logprobs(m, prompt, beam.tokens);
      std::vector<TokenId> order(lp.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<TokenId>(i);
      std::stable_sort(order.begin(), order.end(), [&](TokenId x, TokenId y) { return lp[x] > lp[y]; });
      for (std::size_t i = 0; i < b; ++i) {
        OracleBeam c = beam;
        oracle_push(m, prompt, c, order[i], max_new);
        for (std::size_t s = 1; s < l && !c.done; ++s) {
          const auto nl = next_logprobs(m, prompt, c.tokens);
          oracle_push(m, prompt, c, static_cast<TokenId>(std::max_element(nl.begin(), nl.end()) - nl.begin()), max_new);
        }
        cands.push_back(c);
      }
    }
    std::stable_sort(cands.begin(), cands.end(), [](const OracleBeam& x, const OracleBeam& y) {
      if (x.logprob != y.logprob) return x.logprob > y.logprob;
      return x.tokens < y.tokens;
    });
    cands.resize(std::min(cands.size(), k));
    beams = cands;
    if (std::all_of(beams.begin(), beams.end(), [](const OracleBeam& x) { return x.done; })) break;
  }
  return beams.front().tokens;
}

RewardFn constant() { return make_reward(json{{"type", "constant"}}); }

}  // namespace

TEST_CASE("lookahead with one beam and one expansion is greedy decoding") {
  const Model m = testing::desk_model(5);
  for (const auto& p : testing::random_prompts(3, 2)) {
    const TokenIds ids = testing::with_bos(p);
    for (std::size_t l : {1u, 2u, 3u}) {
      CHECK(deal_generate(m, ids, p, constant(), {1, 1, l, 64}, GenParams(10)) == default_generate(m, ids, GenParams(10)));
    }
  }
}

TEST_CASE("constant-reward search matches an uncached beam-search oracle") {
  const Model m = testing::desk_model(6);
  const TokenIds ids = testing::with_bos("Beam me up");
  for (auto [k, b, l] : {std::tuple{2u, 2u, 2u}, {3u, 2u, 1u}, {2u, 3u, 3u}}) {
    CHECK(deal_generate(m, ids, "Beam me up", constant(), {k, b, l, 64}, GenParams(6)) ==
          oracle_beam_search(m, ids, k, b, l, 6));
  }
}

TEST_CASE("search trace respects the expansion budget") {
  const Model m = testing::desk_model();
  const TokenIds ids = testing::with_bos("trace");
  const LookaheadParams lp{3, 2, 2, 5};
  DealTrace trace;
  const auto out = deal_generate(m, ids, "trace", make_reward(json{{"type", "keyword"}, {"keywords", {"e"}}}), lp,
                                 GenParams(40), {}, {}, &trace);
  CHECK(trace.rounds.size() <= 5);
  CHECK(trace.expansions.front() == 2);
  for (std::size_t r = 0; r < trace.rounds.size(); ++r) {
    CHECK(trace.expansions[r] <= lp.beam_width * lp.expansions_per_beam);
    const auto& ranked = trace.rounds[r];
    for (std::size_t i = 1; i < ranked.size(); ++i) {
      const auto& a = ranked[i - 1];
      const auto& b = ranked[i];
      const bool ordered = a.reward > b.reward || (a.reward == b.reward && (a.logprob > b.logprob ||
                                                  (a.logprob == b.logprob && a.tokens <= b.tokens)));
      CHECK(ordered);
    }
  }
  CHECK(out == trace.rounds.back().front().tokens);
  CHECK(out.size() <= 5 * 2);
}

TEST_CASE("exhaustive one-step search finds the keyword") {
  const Model m = testing::desk_model(8);
  const std::string prompt = "Say something";
  const TokenIds ids = testing::with_bos(prompt);
  const auto reward = make_reward(json{{"type", "keyword"}, {"keywords", {"Q"}}});
  const auto out = deal_generate(m, ids, prompt, reward, {1, kByteVocabSize, 1, 64}, GenParams(4));
  REQUIRE(out.size() == 4);
  // Both cases satisfy the case-insensitive keyword; the likelier one wins.
  const auto lp = next_logprobs(m, ids, {});
  CHECK(out[0] == (lp['q'] > lp['Q'] ? 'q' : 'Q'));
  // Once the keyword is present every candidate ties and the most likely continues.
  TokenIds rest = ids;
  rest.push_back(out[0]);
  TokenIds tail(out.begin() + 1, out.end());
  CHECK(tail == default_generate(m, rest, GenParams(3)));
}

TEST_CASE("reward functions") {
  const auto kw = make_reward(json{{"type", "keyword"}, {"keywords", {"Paris", "france"}}});
  CHECK(kw("", "PARIS is nice") == 0.5);
  CHECK(kw("", "paris, France") == 1.0);
  CHECK(make_reward(json{{"type", "constant"}, {"value", 2.5}})("a", "b") == 2.5);
  const auto ins = make_reward(json{{"type", "instruction"},
                                   {"instruction_id_list", {"keywords:forbidden_words", "change_case:english_lowercase"}},
                                   {"kwargs", {{{"forbidden_words", {"cat"}}}, json::object()}}});
  CHECK(ins("", "a dog") == 1.0);
  CHECK(ins("", "A dog") == 0.5);
  CHECK(make_reward(json{{"type", "instruction"}, {"instruction_id_list", json::array()}})("", "x") == 1.0);
  CHECK_THROWS_AS(make_reward(json{{"type", "instruction"}, {"instruction_id_list", {"nope:nope"}}, {"kwargs", {json::object()}}}),
                  RegistryError);
  CHECK_THROWS_AS(make_reward(json{{"type", "instruction"}, {"instruction_id_list", {"change_case:english_lowercase"}}}), ConfigError);
  CHECK_THROWS_AS(make_reward(json{{"type", "keyword"}, {"keywords", json::array()}}), ConfigError);
  CHECK_THROWS_AS(make_reward(json{{"type", "mystery"}}), ConfigError);
  CHECK_THROWS_AS(make_reward(json::array()), ConfigError);
}

TEST_CASE("lookahead parameters are validated") {
  CHECK_THROWS_AS((LookaheadParams{0, 1, 1, 1}.validate()), ConfigError);
  CHECK_THROWS_AS((LookaheadParams{1, 1, 0, 1}.validate()), ConfigError);
  CHECK_THROWS_AS(DeAL("d", json{{"beam_width", 0}, {"reward", {{"type", "constant"}}}}), ConfigError);
  CHECK_THROWS_AS(DeAL("d", json::object()), ConfigError);
  const DeAL d("d", json{{"reward", {{"type", "constant"}}}});
  CHECK(d.lookahead().beam_width == 2);
  CHECK(d.lookahead().expansions_per_beam == 2);
  CHECK(d.lookahead().lookahead_len == 2);
}

TEST_CASE("DeAL merges runtime fields into its reward") {
  const Model m = testing::desk_model();
  std::vector<ControlPtr> cs;
  cs.push_back(std::make_unique<DeAL>("DeAL", json{{"beam_width", 1}, {"expansions_per_beam", kByteVocabSize},
                                                  {"lookahead_len", 1}, {"reward", {{"type", "keyword"}, {"keywords", {"x"}}}}}));
  SteeringPipeline p(m, std::move(cs));
  p.steer();
  const auto plain = p.generate("Hi", GenParams(1));
  CHECK(plain.response == "x");
  const auto ov = overrides_from_json(json{{"DeAL", {{"keywords", {{"value", {"z"}}}}}}});
  const auto merged = p.generate("Hi", GenParams(1), ov);
  CHECK(merged.response == "z");
}

TEST_CASE("logit bias adds to exactly the listed entries") {
  Rng rng(3);
  Tensor logits({3, 259});
  for (auto& x : logits.data()) x = static_cast<float>(rng.normal());
  const LogitBiasMap bias{{0, 1.5f}, {65, -2.0f}, {258, 4.0f}};
  const Tensor out = logit_bias(logits, bias);
  for (std::size_t r = 0; r < 3; ++r) {
    std::size_t changed = 0;
    for (std::size_t v = 0; v < 259; ++v) {
      if (out.at(r, v) != logits.at(r, v)) ++changed;
      const auto it = bias.find(static_cast<TokenId>(v));
      CHECK(out.at(r, v) == logits.at(r, v) + (it == bias.end() ? 0.0f : it->second));
    }
    CHECK(changed == 3);
  }
  CHECK(bitwise_equal(logit_bias(logits, {}), logits));
  CHECK_THROWS_AS(logit_bias(logits, {{259, 1.0f}}), BiasError);
  CHECK_THROWS_AS(logit_bias(logits, {{-1, 1.0f}}), BiasError);

  const auto parsed = logit_bias_from_json(json{{"5", 1}, {"6", "-inf"}, {"7", "+inf"}});
  CHECK(parsed.at(5) == 1.0f);
  CHECK(std::isinf(parsed.at(6)));
  CHECK(parsed.at(6) < 0);
  CHECK(parsed.at(7) > 0);
  CHECK_THROWS_AS(logit_bias_from_json(json{{"x", 1}}), ConfigError);
  CHECK_THROWS_AS(logit_bias_from_json(json{{"5", "big"}}), ConfigError);
}

TEST_CASE("banned tokens never appear and forced tokens always do") {
  const Model m = testing::desk_model();
  const TokenIds ids = testing::with_bos("ban");
  const auto greedy = default_generate(m, ids, GenParams(8));
  REQUIRE(!greedy.empty());
  const TokenId banned = greedy.front();

  auto pipeline = [&](json bias) {
    std::vector<ControlPtr> cs;
    cs.push_back(std::make_unique<LogitBias>("lb", json{{"bias", std::move(bias)}}));
    SteeringPipeline p(m, std::move(cs));
    p.steer();
    return p;
  };
  const auto ban = pipeline(json{{std::to_string(banned), "-inf"}});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto out = ban.generate("ban", GenParams(16, true, 2.0f, seed)).ids;
    CHECK(std::find(out.begin(), out.end(), banned) == out.end());
  }
  CHECK(ban.generate("ban", GenParams(8)).ids.front() != banned);
  const auto force = pipeline(json{{"120", "inf"}});
  CHECK(force.generate("ban", GenParams(5, true, 1.0f, 4)).response == "xxxxx");

  auto bad = pipeline(json::object());
  std::vector<ControlPtr> cs;
  cs.push_back(std::make_unique<LogitBias>("lb", json{{"bias", {{"300", 1}}}}));
  SteeringPipeline out_of_vocab(m, std::move(cs));
  CHECK_THROWS_AS(out_of_vocab.steer(), SteerError);
}
