#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "steer/errors.hpp"
#include "steer/hooks.hpp"
#include "steer/model.hpp"
#include "steer/runtime.hpp"

namespace steer {

// The four places a control can act on the model.
enum class Surface { Input, Structural, State, Output };
std::string to_string(Surface s);

// A steering method instance. Subclass one of the four surface bases below.
class Control {
 public:
  Control(std::string name, nlohmann::json params);
  virtual ~Control() = default;
  Control(const Control&) = delete;
  Control& operator=(const Control&) = delete;

  virtual Surface surface() const = 0;

  const std::string& name() const { return name_; }
  const nlohmann::json& params() const { return params_; }

  // Disabled controls are skipped by the pipeline on every surface.
  bool enabled() const { return enabled_; }
  void set_enabled(bool on) { enabled_ = on; }

  // Training/setup. `model` is the pipeline's private copy; only structural
  // controls may modify it.
  virtual void steer(Model& model) = 0;

  // Turns resolved runtime-override fields (null when none were supplied)
  // into the payload hooks read from StepContext::overrides[name()].
  // `adapted_prompt` is the prompt after every input control ran.
  virtual nlohmann::json bind_runtime(const nlohmann::json& fields, const std::string& adapted_prompt) const;

 protected:
  template <typename T>
  T param(const std::string& key) const {
    if (!params_.contains(key)) throw ConfigError(name_ + ": missing required parameter '" + key + "'");
    try {
      return params_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(name_ + ": parameter '" + key + "' has the wrong type");
    }
  }

  template <typename T>
  T param_or(const std::string& key, T fallback) const {
    return params_.contains(key) ? param<T>(key) : fallback;
  }

 private:
  std::string name_;
  nlohmann::json params_;
  bool enabled_ = true;
};

using ControlPtr = std::unique_ptr<Control>;

// sigma(x): rewrites the prompt text.
class InputControl : public Control {
 public:
  using Control::Control;
  Surface surface() const override { return Surface::Input; }
  void steer(Model&) override {}
  virtual std::string adapt(const std::string& prompt) const = 0;
};

// theta': edits the pipeline's private weights during steer().
class StructuralControl : public Control {
 public:
  using Control::Control;
  Surface surface() const override { return Surface::Structural; }
  void steer(Model& model) override { apply_to_weights(model); }
  virtual void apply_to_weights(Model& model) = 0;
};

// h: fits its artifact during steer() and then exposes forward hooks.
class StateControl : public Control {
 public:
  using Control::Control;
  Surface surface() const override { return Surface::State; }
  virtual std::vector<Hook> hooks() const = 0;
};

struct DecodeRequest {
  const Model& model;
  const TokenIds& prompt_ids;
  const std::string& prompt_text;
  const GenParams& params;
  std::span<const Hook> hooks;
  const StepContext& ctx;
};

// d: owns the decoding loop.
class OutputControl : public Control {
 public:
  using Control::Control;
  Surface surface() const override { return Surface::Output; }
  void steer(Model&) override {}
  virtual TokenIds generate(const DecodeRequest& request) const = 0;
};

}  // namespace steer
