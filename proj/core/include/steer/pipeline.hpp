#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "steer/control.hpp"

namespace steer {

// A runtime-override field value: either a literal, or the name of a field
// of the datapoint being generated for.
struct OverrideValue {
  enum class Kind { FieldRef, Literal };
  Kind kind = Kind::Literal;
  std::string field;
  nlohmann::json literal;

  static OverrideValue field_ref(std::string name) { return {Kind::FieldRef, std::move(name), {}}; }
  static OverrideValue value(nlohmann::json v) { return {Kind::Literal, {}, std::move(v)}; }
};

// control name -> field name -> value
using RuntimeOverrides = std::map<std::string, std::map<std::string, OverrideValue>>;

// JSON form: {"PASTA": {"substrings": "instructions"}}. A bare string is a
// datapoint field reference; {"value": x} or any non-string is a literal.
RuntimeOverrides overrides_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RuntimeOverrides& overrides);

// Resolves every field of `overrides` against `datapoint`. Unresolvable
// field references raise OverrideError naming the field.
nlohmann::json resolve_overrides(const RuntimeOverrides& overrides, const nlohmann::json& datapoint);

struct GenerationOutput {
  std::string adapted_prompt;
  std::string response;
  TokenIds ids;
};

// Ordered composition of controls bound to a private copy of a model.
class SteeringPipeline {
 public:
  SteeringPipeline(const Model& base, std::vector<ControlPtr> controls);
  SteeringPipeline(const std::filesystem::path& model_path, std::vector<ControlPtr> controls);

  SteeringPipeline(SteeringPipeline&&) = default;
  SteeringPipeline& operator=(SteeringPipeline&&) = default;

  // Calls steer() on each enabled control in list order and collects hooks.
  // A second call raises SteerError.
  void steer();
  bool steered() const { return steered_; }

  const Model& model() const { return model_; }
  const std::vector<ControlPtr>& controls() const { return controls_; }
  std::span<const Hook> hooks() const { return hooks_; }
  Control* find(const std::string& name) const;

  // Applies enabled input controls left to right.
  std::string adapt_prompt(const std::string& prompt) const;

  // `datapoint` supplies the fields that override references point at.
  GenerationOutput generate(const std::string& prompt, const GenParams& params,
                            const RuntimeOverrides& overrides = {},
                            const nlohmann::json& datapoint = nlohmann::json::object()) const;

 private:
  void check_composition() const;

  Model model_;
  std::vector<ControlPtr> controls_;
  std::vector<Hook> hooks_;
  bool steered_ = false;
};

}  // namespace steer
