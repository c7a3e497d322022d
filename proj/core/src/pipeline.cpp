#include "steer/pipeline.hpp"

#include "steer/weights_io.hpp"

namespace steer {

std::string to_string(Surface s) {
  switch (s) {
    case Surface::Input: return "input";
    case Surface::Structural: return "structural";
    case Surface::State: return "state";
    case Surface::Output: return "output";
  }
  return "?";
}

Control::Control(std::string name, nlohmann::json params) : name_(std::move(name)), params_(std::move(params)) {
  if (params_.is_null()) params_ = nlohmann::json::object();
  if (!params_.is_object()) throw ConfigError(name_ + ": params must be a JSON object");
  if (params_.contains("enabled")) enabled_ = param<bool>("enabled");
}

nlohmann::json Control::bind_runtime(const nlohmann::json& fields, const std::string&) const { return fields; }

RuntimeOverrides overrides_from_json(const nlohmann::json& j) {
  RuntimeOverrides out;
  if (j.is_null()) return out;
  if (!j.is_object()) throw ConfigError("runtime_overrides must be a JSON object");
  for (const auto& [control, fields] : j.items()) {
    if (!fields.is_object()) throw ConfigError("runtime_overrides for '" + control + "' must be an object");
    auto& dst = out[control];
    for (const auto& [field, value] : fields.items()) {
      if (value.is_string()) {
        dst[field] = OverrideValue::field_ref(value.get<std::string>());
      } else if (value.is_object() && value.size() == 1 && value.contains("value")) {
        dst[field] = OverrideValue::value(value.at("value"));
      } else {
        dst[field] = OverrideValue::value(value);
      }
    }
  }
  return out;
}

nlohmann::json to_json(const RuntimeOverrides& overrides) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [control, fields] : overrides) {
    auto& dst = j[control] = nlohmann::json::object();
    for (const auto& [field, v] : fields) {
      dst[field] = v.kind == OverrideValue::Kind::FieldRef ? nlohmann::json(v.field)
                                                           : nlohmann::json{{"value", v.literal}};
    }
  }
  return j;
}

nlohmann::json resolve_overrides(const RuntimeOverrides& overrides, const nlohmann::json& datapoint) {
  nlohmann::json resolved = nlohmann::json::object();
  for (const auto& [control, fields] : overrides) {
    auto& dst = resolved[control] = nlohmann::json::object();
    for (const auto& [field, v] : fields) {
      if (v.kind == OverrideValue::Kind::Literal) {
        dst[field] = v.literal;
        continue;
      }
      if (!datapoint.is_object() || !datapoint.contains(v.field)) {
        throw OverrideError("override " + control + "." + field + " references unknown datapoint field '" +
                            v.field + "'");
      }
      dst[field] = datapoint.at(v.field);
    }
  }
  return resolved;
}

SteeringPipeline::SteeringPipeline(const Model& base, std::vector<ControlPtr> controls)
    : model_(base), controls_(std::move(controls)) {
  check_composition();
}

SteeringPipeline::SteeringPipeline(const std::filesystem::path& model_path, std::vector<ControlPtr> controls)
    : model_(load_weights(model_path)), controls_(std::move(controls)) {
  check_composition();
}

void SteeringPipeline::check_composition() const {
  std::size_t outputs = 0;
  for (const auto& c : controls_) {
    if (!c) throw CompositionError("pipeline contains a null control");
    if (c->surface() == Surface::Output) ++outputs;
  }
  if (outputs > 1) throw CompositionError("a pipeline may contain at most one output control");
}

void SteeringPipeline::steer() {
  if (steered_) throw SteerError("pipeline has already been steered");
  for (const auto& c : controls_) {
    if (!c->enabled()) continue;
    try {
      c->steer(model_);
    } catch (const Error& e) {
      throw SteerError(c->name() + ": " + e.what());
    }
    if (c->surface() == Surface::State) {
      for (auto& h : static_cast<const StateControl&>(*c).hooks()) hooks_.push_back(std::move(h));
    }
  }
  steered_ = true;
}

Control* SteeringPipeline::find(const std::string& name) const {
  for (const auto& c : controls_)
    if (c->name() == name) return c.get();
  return nullptr;
}

std::string SteeringPipeline::adapt_prompt(const std::string& prompt) const {
  std::string text = prompt;
  for (const auto& c : controls_) {
    if (c->enabled() && c->surface() == Surface::Input) text = static_cast<const InputControl&>(*c).adapt(text);
  }
  return text;
}

GenerationOutput SteeringPipeline::generate(const std::string& prompt, const GenParams& params,
                                            const RuntimeOverrides& overrides,
                                            const nlohmann::json& datapoint) const {
  if (!steered_) throw SteerError("pipeline must be steered before generate");
  params.validate();

  GenerationOutput out;
  out.adapted_prompt = adapt_prompt(prompt);

  for (const auto& [control, _] : overrides) {
    if (!find(control)) throw OverrideError("runtime override references control '" + control + "' not in pipeline");
  }
  const nlohmann::json resolved = resolve_overrides(overrides, datapoint);

  StepContext ctx;
  for (const auto& c : controls_) {
    if (!c->enabled()) continue;
    const nlohmann::json fields = resolved.contains(c->name()) ? resolved.at(c->name()) : nlohmann::json();
    nlohmann::json payload = c->bind_runtime(fields, out.adapted_prompt);
    if (!payload.is_null()) ctx.overrides[c->name()] = std::move(payload);
  }

  TokenIds ids{kBos};
  const TokenIds body = tokenize(out.adapted_prompt);
  ids.insert(ids.end(), body.begin(), body.end());
  if (ids.size() >= model_.config.max_seq) {
    throw LengthError("prompt of " + std::to_string(ids.size()) + " tokens leaves no room under max_seq " +
                      std::to_string(model_.config.max_seq));
  }

  const OutputControl* decoder = nullptr;
  for (const auto& c : controls_) {
    if (c->enabled() && c->surface() == Surface::Output) decoder = static_cast<const OutputControl*>(c.get());
  }
  if (decoder) {
    out.ids = decoder->generate(DecodeRequest{model_, ids, out.adapted_prompt, params, hooks_, ctx});
  } else {
    out.ids = default_generate(model_, ids, params, hooks_, ctx);
  }
  out.response = detokenize(out.ids);
  return out;
}

}  // namespace steer
