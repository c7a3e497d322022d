#include <doctest.h>

#include <set>

#include "reference.hpp"
#include "steer/input_controls.hpp"
#include "steer/registry.hpp"

using namespace steer;
using nlohmann::json;

namespace {

ExamplePool pool_of(std::size_t n) {
  ExamplePool pool;
  for (std::size_t i = 0; i < n; ++i) pool.examples.push_back({"in" + std::to_string(i), "out" + std::to_string(i)});
  return pool;
}

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t c = 0;
  for (auto at = text.find(needle); at != std::string::npos; at = text.find(needle, at + needle.size())) ++c;
  return c;
}

}  // namespace

TEST_CASE("few-shot with k = 0 is the identity") {
  CHECK(few_shot_adapt("prompt", pool_of(3), 0, 1) == "prompt");
  CHECK(few_shot_adapt("prompt", ExamplePool{}, 0, 1) == "prompt");
}

TEST_CASE("few-shot draws k distinct examples and keeps the prompt last") {
  const ExamplePool pool = pool_of(6);
  for (std::size_t k = 1; k <= 6; ++k) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const std::string out = few_shot_adapt("Q?", pool, k, seed);
      CHECK(out.size() >= 2);
      CHECK(out.substr(out.size() - 4) == "\n\nQ?");
      std::set<std::string> used;
      for (std::size_t i = 0; i < 6; ++i) {
        const std::string block = "Input: in" + std::to_string(i) + "\nOutput: out" + std::to_string(i);
        const std::size_t c = count(out, block);
        CHECK(c <= 1);
        if (c) used.insert(block);
      }
      CHECK(used.size() == k);
      CHECK(count(out, "\n\n") == k);
      CHECK(out == few_shot_adapt("Q?", pool, k, seed));
    }
  }
  CHECK_THROWS_AS(few_shot_adapt("Q?", pool, 7, 0), PoolExhaustedError);
}

TEST_CASE("few-shot sampling is close to uniform over seeds") {
  const ExamplePool pool = pool_of(5);
  std::vector<std::size_t> hits(5, 0);
  const std::size_t trials = 4000;
  for (std::uint64_t seed = 0; seed < trials; ++seed) {
    const std::string out = few_shot_adapt("", pool, 2, seed);
    for (std::size_t i = 0; i < 5; ++i) hits[i] += count(out, "in" + std::to_string(i) + "\n");
  }
  // Each example appears with probability 2/5; 5 sigma is about 155.
  for (auto h : hits) CHECK(std::abs(static_cast<double>(h) - trials * 0.4) < 160.0);
}

TEST_CASE("custom formats substitute both slots once") {
  ExamplePool pool;
  pool.examples = {{"a {output}", "b"}};
  pool.format = "Q={input} A={output}";
  CHECK(pool.render(pool.examples[0]) == "Q=a {output} A=b");
  CHECK(few_shot_adapt("x", pool, 1, 0) == "Q=a {output} A=b\n\nx");
}

TEST_CASE("FewShot control and pool loading") {
  const auto pool = load_example_pool(testing::data_dir() / "fewshot" / "pool.jsonl");
  CHECK(pool.size() == 6);
  FewShot fs("fs", json{{"k", 2}, {"seed", 3}}, pool);
  Model m = testing::desk_model();
  fs.steer(m);
  ExamplePool p;
  p.examples = pool;
  CHECK(fs.adapt("Go") == few_shot_adapt("Go", p, 2, 3));
  FewShot big("fs", json{{"k", 9}}, pool);
  CHECK_THROWS_AS(big.steer(m), PoolExhaustedError);
  CHECK_THROWS_AS(FewShot("fs", json::object(), pool), ConfigError);
  CHECK_THROWS_AS(examples_from_json(json::array({{{"input", "x"}}})), ConfigError);
  CHECK_THROWS_AS(load_example_pool("/nonexistent.jsonl"), IoError);

  auto from_registry = make_control("FewShot", "fs", json{{"k", 2}, {"seed", 3}, {"pool", "fewshot/pool.jsonl"}}, testing::data_dir());
  CHECK(static_cast<InputControl&>(*from_registry).adapt("Go") == fs.adapt("Go"));
}

TEST_CASE("prefix prepends with a blank line") {
  CHECK(prefix_adapt("body", "Be brief.") == "Be brief.\n\nbody");
  CHECK(prefix_adapt("body", "") == "body");
  CHECK(Prefix("p", json{{"prefix", "Hi"}}).adapt("there") == "Hi\n\nthere");
  CHECK_THROWS_AS(Prefix("p", json::object()), ConfigError);
}
