#include <doctest.h>

#include "reference.hpp"
#include "steer/input_controls.hpp"
#include "steer/output_controls.hpp"
#include "steer/pipeline.hpp"
#include "steer/registry.hpp"
#include "steer/structural_controls.hpp"

using namespace steer;
using nlohmann::json;

namespace {

// Records what the pipeline hands to a state control.
class Probe final : public StateControl {
 public:
  Probe(std::string name, json params, std::vector<std::string>* log, std::vector<json>* payloads)
      : StateControl(std::move(name), std::move(params)), log_(log), payloads_(payloads) {}
  void steer(Model&) override { log_->push_back(name()); }
  std::vector<Hook> hooks() const override {
    auto* payloads = payloads_;
    const std::string n = name();
    return {{HookSite::logits(), [payloads, n](const StepContext& ctx, Tensor&) {
               payloads->push_back(ctx.overrides.contains(n) ? ctx.overrides.at(n) : json());
             }, n}};
  }

 private:
  std::vector<std::string>* log_;
  std::vector<json>* payloads_;
};

class Upper final : public InputControl {
 public:
  using InputControl::InputControl;
  std::string adapt(const std::string& p) const override {
    std::string s = p;
    for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
  }
};

template <typename... C>
std::vector<ControlPtr> controls(C&&... c) {
  std::vector<ControlPtr> out;
  (out.push_back(std::forward<C>(c)), ...);
  return out;
}

}  // namespace

TEST_CASE("an empty pipeline generates like the base model") {
  const Model m = testing::desk_model();
  SteeringPipeline p(m, {});
  p.steer();
  const auto out = p.generate("hello there", GenParams(10));
  CHECK(out.adapted_prompt == "hello there");
  CHECK(out.ids == default_generate(m, testing::with_bos("hello there"), GenParams(10)));
  CHECK(out.response == detokenize(out.ids));
}

TEST_CASE("composition allows at most one output control") {
  const Model m = testing::desk_model();
  CHECK_THROWS_AS(SteeringPipeline(m, controls(std::make_unique<DeAL>("a", json{{"reward", {{"type", "constant"}}}}),
                                               std::make_unique<LogitBias>("b", json{{"bias", json::object()}}))),
                  CompositionError);
  CHECK_NOTHROW(SteeringPipeline(m, controls(std::make_unique<Prefix>("p", json{{"prefix", "x"}}),
                                             std::make_unique<LogitBias>("b", json{{"bias", json::object()}}))));
}

TEST_CASE("steer runs once, in list order, and generate requires it") {
  const Model m = testing::desk_model();
  std::vector<std::string> log;
  std::vector<json> payloads;
  SteeringPipeline p(m, controls(std::make_unique<Probe>("first", json::object(), &log, &payloads),
                                 std::make_unique<Probe>("second", json::object(), &log, &payloads)));
  CHECK_THROWS_AS(p.generate("x", GenParams(2)), SteerError);
  p.steer();
  CHECK(log == std::vector<std::string>{"first", "second"});
  CHECK(p.hooks().size() == 2);
  CHECK(p.hooks()[0].label == "first");
  CHECK_THROWS_AS(p.steer(), SteerError);
  CHECK(p.steered());
}

TEST_CASE("disabled controls are skipped on every surface") {
  const Model m = testing::desk_model();
  std::vector<std::string> log;
  std::vector<json> payloads;
  SteeringPipeline p(m, controls(std::make_unique<Upper>("up", json{{"enabled", false}}),
                                 std::make_unique<Probe>("probe", json{{"enabled", false}}, &log, &payloads),
                                 std::make_unique<LogitBias>("bias", json{{"bias", {{"65", "inf"}}}, {"enabled", false}})));
  p.steer();
  CHECK(log.empty());
  CHECK(p.hooks().empty());
  const auto out = p.generate("quiet", GenParams(6));
  CHECK(out.adapted_prompt == "quiet");
  CHECK(out.ids == default_generate(m, testing::with_bos("quiet"), GenParams(6)));
  CHECK_THROWS_AS(Prefix("bad", json{{"prefix", "x"}, {"enabled", "yes"}}), ConfigError);
}

TEST_CASE("input controls apply left to right") {
  const Model m = testing::desk_model();
  SteeringPipeline p(m, controls(std::make_unique<Prefix>("p", json{{"prefix", "note"}}), std::make_unique<Upper>("u", json{})));
  p.steer();
  CHECK(p.adapt_prompt("go") == "NOTE\n\nGO");
  SteeringPipeline q(m, controls(std::make_unique<Upper>("u", json{}), std::make_unique<Prefix>("p", json{{"prefix", "note"}})));
  q.steer();
  CHECK(q.adapt_prompt("go") == "note\n\nGO");
}

TEST_CASE("runtime overrides resolve against the datapoint") {
  const Model m = testing::desk_model();
  std::vector<std::string> log;
  std::vector<json> payloads;
  SteeringPipeline p(m, controls(std::make_unique<Probe>("probe", json::object(), &log, &payloads)));
  p.steer();

  const auto ov = overrides_from_json(json{{"probe", {{"words", "instructions"}, {"lit", {{"value", "instructions"}}}, {"n", 3}}}});
  p.generate("x", GenParams(2), ov, json{{"instructions", {"a", "b"}}});
  REQUIRE(!payloads.empty());
  CHECK(payloads[0] == json{{"words", {"a", "b"}}, {"lit", "instructions"}, {"n", 3}});
  CHECK(overrides_from_json(to_json(ov)).at("probe").at("lit").literal == "instructions");

  CHECK_THROWS_AS(p.generate("x", GenParams(2), ov, json{{"other", 1}}), OverrideError);
  CHECK_THROWS_AS(p.generate("x", GenParams(2), overrides_from_json(json{{"ghost", {{"a", 1}}}})), OverrideError);
  CHECK_THROWS_AS(overrides_from_json(json::array()), ConfigError);
  CHECK_THROWS_AS(overrides_from_json(json{{"probe", 3}}), ConfigError);
}

TEST_CASE("structural edits stay private to the pipeline") {
  const Model m = testing::desk_model();
  const auto before = weights_checksum(m.weights);
  WeightMap delta{{"unembed", Tensor::filled({64, 259}, 0.5f)}};
  SteeringPipeline p(m, controls(std::make_unique<TaskVector>("tv", json{{"scale", 2.0}}, delta)));
  SteeringPipeline q(m, {});
  p.steer();
  q.steer();
  CHECK(weights_checksum(m.weights) == before);
  CHECK(weights_checksum(q.model().weights) == before);
  CHECK(weights_checksum(p.model().weights) != before);
  CHECK(p.model().weight("unembed").at(3, 7) == doctest::Approx(m.weight("unembed").at(3, 7) + 1.0f));
}

TEST_CASE("prompts that fill the context are rejected") {
  ModelConfig cfg;
  cfg.max_seq = 16;
  SteeringPipeline p(init_random(cfg, 1), {});
  p.steer();
  CHECK_THROWS_AS(p.generate(std::string(15, 'a'), GenParams(2)), LengthError);
  CHECK_NOTHROW(p.generate(std::string(14, 'a'), GenParams(2)));
}

TEST_CASE("registry builds every control class from JSON") {
  const auto classes = control_classes();
  CHECK(classes.size() == 10);
  CHECK_THROWS_AS(make_control("Nope", "x", json::object()), RegistryError);
  auto pipeline = load_pipeline_config(testing::data_dir() / "pipelines" / "composite.json");
  REQUIRE(pipeline.size() == 2);
  CHECK(pipeline[0]->surface() == Surface::State);
  CHECK(pipeline[1]->surface() == Surface::Output);
  auto caa = load_pipeline_config(testing::data_dir() / "pipelines" / "caa.json");
  REQUIRE(caa.size() == 1);
  CHECK(caa[0]->name() == "CAA");
  CHECK_THROWS_AS(controls_from_json(json{{"controls", {{{"name", "x"}}}}}), ConfigError);
  CHECK_THROWS_AS(load_pipeline_config("/nonexistent/p.json"), IoError);
}
