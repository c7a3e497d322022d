#include <doctest.h>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "reference.hpp"
#include "steer/benchmark.hpp"

using namespace steer;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json small_config() {
  return ordered_json::parse(R"({
    "use_case": {"type": "instruction_following", "data": "ifeval/fixture.json",
                 "metrics": ["strict_instruction", "reward_score"], "score_transform": "sigmoid"},
    "model": "unused.stw1",
    "steering_pipelines": {
      "baseline": [],
      "pasta": [{"control": "PASTA", "params": {"head_config": [1, 2, 6]}, "vars": {"alpha": [2, 8]}}]
    },
    "runtime_overrides": {"PASTA": {"substrings": "instructions"}},
    "num_trials": 2,
    "gen_params": {"max_new_tokens": 6, "do_sample": true, "seed": 3}
  })");
}

struct Fixture {
  std::shared_ptr<const Model> model = std::make_shared<const Model>(testing::desk_model());
  std::unique_ptr<UseCase> uc;

  explicit Fixture(std::size_t n_data = 3) {
    auto spec = json{{"data", (testing::data_dir() / "ifeval" / "fixture.json").string()}, {"score_transform", "sigmoid"}};
    auto data = load_datapoints(testing::data_dir() / "ifeval" / "fixture.json");
    data.resize(n_data);
    json arr = json::array();
    for (const auto& d : data) arr.push_back(to_json(d));
    spec["data"] = arr;
    uc = make_use_case(spec, model);
  }
};

BenchmarkConfig parse(const ordered_json& j) { return benchmark_config_from_json(j, testing::data_dir()); }

std::vector<std::size_t> brute_force_frontier(const std::vector<std::pair<double, double>>& pts) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
      dominated = pts[j].first >= pts[i].first && pts[j].second >= pts[i].second &&
                  (pts[j].first > pts[i].first || pts[j].second > pts[i].second);
    }
    if (!dominated) out.push_back(i);
  }
  std::sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) {
    return pts[a].first != pts[b].first ? pts[a].first < pts[b].first : a < b;
  });
  return out;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = parse(small_config());
  CHECK(cfg.model_path == testing::data_dir() / "unused.stw1");
  CHECK(cfg.pipelines.size() == 2);
  CHECK(cfg.num_trials == 2);
  CHECK(cfg.gen.max_new_tokens == 6);
  CHECK(cfg.gen.do_sample);
  CHECK(cfg.seed_given);
  CHECK(cfg.plot_x == "strict_instruction");
  CHECK(cfg.plot_y == "reward_score");
  const auto& spec = std::get<ControlSpec>(cfg.pipelines.at("pasta").front());
  CHECK(spec.vars.front().name == "alpha");

  auto bad = small_config();
  bad["surprise"] = 1;
  CHECK_THROWS_AS(parse(bad), ConfigError);
  auto zero = small_config();
  zero["num_trials"] = 0;
  CHECK_THROWS_AS(parse(zero), ConfigError);
  auto mode = small_config();
  mode["steering_pipelines"]["pasta"][0]["mode"] = "diagonal";
  CHECK_THROWS_AS(parse(mode), ConfigError);
  auto typed = small_config();
  typed["num_trials"] = "two";
  CHECK_THROWS_AS(parse(typed), ConfigError);
  auto no_seed = small_config();
  no_seed["gen_params"].erase("seed");
  CHECK_FALSE(parse(no_seed).seed_given);

  const auto shipped = load_benchmark_config(testing::data_dir() / "benchmarks" / "pasta_sweep.json");
  CHECK(expand_benchmark(shipped).size() == 7);
  CHECK(shipped.plot_group_by == "alpha");
}

TEST_CASE("expansion labels swept params and multiplies specs") {
  auto j = small_config();
  j["steering_pipelines"]["combo"] = ordered_json::parse(R"([
    {"control": "PASTA", "params": {"head_config": [1]}, "vars": {"alpha": [2, 3, 4]}},
    {"control": "DeAL", "params": {"reward": {"type": "constant"}}, "vars": {"beam_width": [1, 2]}}
  ])");
  const auto units = expand_benchmark(parse(j));
  REQUIRE(units.size() == 1 + 6 + 2);
  CHECK(units[0].pipeline == "baseline");
  CHECK(units[1].pipeline == "combo");
  CHECK(units[1].params == ParamMap{{"PASTA.alpha", 2}, {"DeAL.beam_width", 1}});
  CHECK(units[2].params == ParamMap{{"PASTA.alpha", 2}, {"DeAL.beam_width", 2}});
  CHECK(units[6].params == ParamMap{{"PASTA.alpha", 4}, {"DeAL.beam_width", 2}});
  CHECK(units[7].params == ParamMap{{"PASTA.alpha", 2}});
  CHECK(units[1].controls.at(1).params.at("beam_width") == 1);

  j["steering_pipelines"]["dup"] = ordered_json::parse(R"([{"control": "Prefix", "params": {"prefix": "a"}},
                                                           {"control": "Prefix", "params": {"prefix": "b"}}])");
  CHECK_THROWS_AS(expand_benchmark(parse(j)), ConfigError);
}

TEST_CASE("row count is configs x datapoints x trials x metric outputs") {
  Fixture fx(3);
  const auto cfg = parse(small_config());
  const auto table = run_benchmark(cfg, *fx.model, *fx.uc);
  CHECK(table.configs_total == 3);
  CHECK(table.configs_failed == 0);
  CHECK(table.errors.empty());
  CHECK(table.rows.size() == 3 * 3 * 2 * 3);
  CHECK(table.metadata.at("seed") == 3);
  CHECK(table.metadata.at("model_checksum") == checksum_hex(weights_checksum(fx.model->weights)));
  CHECK(table.metadata.at("datapoints") == 3);

  std::set<std::string> metrics;
  for (const auto& r : table.rows) metrics.insert(r.metric);
  CHECK(metrics == std::set<std::string>{"strict_prompt", "strict_instruction", "reward_score"});
  for (const auto& r : table.rows) {
    if (r.pipeline == "baseline") CHECK(r.params.empty());
    else CHECK(r.params.size() == 1);
  }
}

TEST_CASE("benchmarks are deterministic and independent of worker count") {
  Fixture fx(2);
  auto cfg = parse(small_config());
  const auto a = run_benchmark(cfg, *fx.model, *fx.uc);
  const auto b = run_benchmark(cfg, *fx.model, *fx.uc);
  cfg.workers = 3;
  const auto c = run_benchmark(cfg, *fx.model, *fx.uc);
  CHECK(a.rows == b.rows);
  CHECK(a.rows == c.rows);
  CHECK(results_csv(a) == results_csv(c));
  CHECK(results_jsonl(a) == results_jsonl(c));
}

TEST_CASE("failing configs are recorded without stopping the run") {
  Fixture fx(2);
  auto j = small_config();
  j["steering_pipelines"]["broken"] = ordered_json::parse(R"([{"control": "PASTA", "params": {"head_config": [99], "alpha": 2}}])");
  j["steering_pipelines"]["unknown"] = ordered_json::parse(R"([{"control": "Nope"}])");
  j["runtime_overrides"]["Nope"] = {{"x", 1}};
  const auto table = run_benchmark(parse(j), *fx.model, *fx.uc);
  CHECK(table.configs_total == 5);
  CHECK(table.configs_failed == 2);
  REQUIRE(table.errors.size() == 2);
  CHECK(table.errors[0].pipeline == "broken");
  CHECK(table.errors[0].stage == "steer");
  CHECK(table.errors[1].stage == "setup");
  CHECK(table.rows.size() == 3 * 2 * 2 * 3);

  auto orphan = small_config();
  orphan["runtime_overrides"]["Ghost"] = {{"x", 1}};
  CHECK_THROWS_AS(run_benchmark(parse(orphan), *fx.model, *fx.uc), ConfigError);
}

TEST_CASE("results round-trip through JSONL and the export directory") {
  Fixture fx(2);
  auto table = run_benchmark(parse(small_config()), *fx.model, *fx.uc);
  table.rows.push_back({"odd,name", {{"x.note", "a \"quoted\" value"}}, 0, "dp", "reward_score",
                        -std::numeric_limits<double>::infinity()});
  table.rows.push_back({"p", {}, 1, "dp", "reward_score", 0.1 + 0.2});
  CHECK(rows_from_jsonl(results_jsonl(table)) == table.rows);

  testing::TempDir dir;
  export_results(table, dir / "out");
  const auto loaded = load_results(dir / "out");
  CHECK(loaded.rows == table.rows);
  CHECK(loaded.configs_total == 3);
  CHECK(loaded.metadata.at("rows") == table.rows.size());

  const std::string csv = results_csv(table);
  CHECK(csv.rfind("pipeline,PASTA.alpha,x.note,trial,datapoint,metric,score\n", 0) == 0);
  CHECK(csv.find("\"odd,name\",,\"a \"\"quoted\"\" value\",0,dp,reward_score,-inf\n") != std::string::npos);
  CHECK(csv.find(",0.30000000000000004\n") != std::string::npos);
  CHECK_THROWS_AS(load_results(dir / "missing"), IoError);
  CHECK_THROWS_AS(rows_from_jsonl("{\"pipeline\": 1}\n"), ConfigError);
}

TEST_CASE("pareto frontier matches brute force") {
  Rng rng(21);
  for (std::size_t n : {0u, 1u, 2u, 5u, 17u, 60u, 200u}) {
    for (int rep = 0; rep < 5; ++rep) {
      std::vector<std::pair<double, double>> pts;
      for (std::size_t i = 0; i < n; ++i) {
        // Coarse grid values force ties and duplicates.
        pts.emplace_back(static_cast<double>(rng.uniform_int(8)), static_cast<double>(rng.uniform_int(8)));
      }
      CHECK(pareto_frontier(pts) == brute_force_frontier(pts));
    }
  }
  CHECK(pareto_frontier({{0, 0}, {1, 1}, {1, 1}}) == std::vector<std::size_t>{1, 2});
  CHECK_THROWS_AS(pareto_frontier({{0, std::nan("")}}), PlotError);
}

TEST_CASE("trade-off plot is well-formed SVG with labeled points") {
  Fixture fx(2);
  const auto table = run_benchmark(parse(small_config()), *fx.model, *fx.uc);
  const auto points = tradeoff_points(table, "strict_instruction", "reward_score", "alpha");
  REQUIRE(points.size() == 3);
  CHECK(points[0].baseline);
  CHECK(points[0].label == "baseline");
  CHECK(points[1].label == "alpha=2");
  CHECK(points[2].label == "alpha=8");

  const std::string svg = render_tradeoff_svg(table, "strict_instruction", "reward_score", "alpha");
  std::istringstream in(svg);
  boost::property_tree::ptree tree;
  REQUIRE_NOTHROW(boost::property_tree::read_xml(in, tree));
  const auto& root = tree.get_child("svg");
  std::size_t circles = 0, baselines = 0, frontiers = 0;
  std::vector<std::string> labels;
  for (const auto& [tag, node] : root) {
    const auto cls = node.get<std::string>("<xmlattr>.class", "");
    if (tag == "circle" && cls == "point") ++circles;
    if (tag == "g" && cls == "baseline") ++baselines;
    if (tag == "polyline" && cls == "frontier") ++frontiers;
    if (tag == "text" && cls == "label") labels.push_back(node.data());
  }
  CHECK(circles == 2);
  CHECK(baselines == 1);
  CHECK(frontiers == 1);
  CHECK(labels == std::vector<std::string>{"baseline", "alpha=2", "alpha=8"});
  CHECK(root.get<std::string>("<xmlattr>.width") == "720");
}

TEST_CASE("plotting edge cases") {
  ResultTable only_base;
  only_base.rows = {{"baseline", {}, 0, "a", "strict_instruction", 0.5}, {"baseline", {}, 0, "a", "reward_score", 0.2}};
  const std::string svg = render_tradeoff_svg(only_base, "strict_instruction", "reward_score");
  std::istringstream in(svg);
  boost::property_tree::ptree tree;
  CHECK_NOTHROW(boost::property_tree::read_xml(in, tree));
  CHECK(svg.find("class=\"baseline\"") != std::string::npos);
  CHECK_THROWS_WITH_AS(render_tradeoff_svg(only_base, "accuracy", "reward_score"),
                       "metric 'accuracy' not found in results", PlotError);

  ResultTable escaped;
  escaped.rows = {{"p", {{"c.tag", "<&>"}}, 0, "a", "x", 1}, {"p", {{"c.tag", "<&>"}}, 0, "a", "y", 2}};
  const std::string esc = render_tradeoff_svg(escaped, "x", "y");
  CHECK(esc.find("tag=&lt;&amp;&gt;") != std::string::npos);
  CHECK(format_score(std::nan("")) == "nan");
  CHECK(format_score(0.5) == "0.5");
}
