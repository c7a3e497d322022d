#include "steer/state_controls.hpp"

#include <algorithm>
#include <map>

namespace steer {

namespace {

std::size_t layer_param(const nlohmann::json& params, const std::string& control) {
  if (!params.contains("layer_id") || !params.at("layer_id").is_number_integer() ||
      params.at("layer_id").get<std::int64_t>() < 0) {
    throw ConfigError(control + ": layer_id must be a non-negative integer");
  }
  return params.at("layer_id").get<std::size_t>();
}

void require_layer(const Model& model, std::size_t layer) {
  if (layer >= model.config.n_layers) {
    throw SelectionError("layer_id " + std::to_string(layer) + " out of range for a " +
                         std::to_string(model.config.n_layers) + "-layer model");
  }
}

}  // namespace

// ---- CAA --------------------------------------------------------------------

CAA::CAA(std::string name, nlohmann::json params, ContrastivePairs data)
    : StateControl(std::move(name), std::move(params)), data_(std::move(data)) {
  train_spec_ = train_spec_from_json(this->params().value("train_spec", nlohmann::json()));
  if (train_spec_.method != TrainMethod::MeanDiff) throw ConfigError(this->name() + ": train_spec method must be mean_diff");
  layer_ = layer_param(this->params(), this->name());
  param<float>("multiplier");
  token_scope_from_string(param_or<std::string>("token_scope", "generated"));
}

void CAA::steer(Model& model) {
  require_layer(model, layer_);
  vector_ = estimate_mean_difference(model, data_, layer_, train_spec_.accumulate);
  transform_ = std::make_shared<AdditiveTransform>(vector_, param<float>("multiplier"),
                                                   param_or<bool>("normalize_vector", false),
                                                   token_scope_from_string(param_or<std::string>("token_scope", "generated")));
}

std::vector<Hook> CAA::hooks() const {
  if (!transform_) return {};
  auto t = transform_;
  return {Hook{HookSite::residual_post(layer_), [t](const StepContext& ctx, Tensor& x) { t->apply(ctx, x); },
               name() + ".additive"}};
}

// ---- ActAdd -----------------------------------------------------------------

ActAdd::ActAdd(std::string name, nlohmann::json params) : StateControl(std::move(name), std::move(params)) {
  layer_ = layer_param(this->params(), this->name());
  param<std::string>("prompt_pos");
  param<std::string>("prompt_neg");
  param<float>("coefficient");
}

void ActAdd::steer(Model& model) {
  require_layer(model, layer_);
  sequence_ = estimate_single_pair(model, param<std::string>("prompt_pos"), param<std::string>("prompt_neg"), layer_);
  transform_ = std::make_shared<PositionalAdditiveTransform>(sequence_, param<float>("coefficient"));
}

std::vector<Hook> ActAdd::hooks() const {
  if (!transform_) return {};
  auto t = transform_;
  return {Hook{HookSite::residual_post(layer_), [t](const StepContext& ctx, Tensor& x) { t->apply(ctx, x); },
               name() + ".positional_additive"}};
}

// ---- ITI --------------------------------------------------------------------

std::vector<LabeledPrompt> labeled_from_pairs(const ContrastivePairs& pairs) {
  std::vector<LabeledPrompt> out;
  for (const auto& p : pairs) {
    out.push_back({p.prompt + p.positive, 1});
    out.push_back({p.prompt + p.negative, 0});
  }
  return out;
}

ITI::ITI(std::string name, nlohmann::json params, std::vector<LabeledPrompt> data)
    : StateControl(std::move(name), std::move(params)), data_(std::move(data)) {
  param<std::size_t>("num_heads");
  param<float>("multiplier");
  token_scope_from_string(param_or<std::string>("token_scope", "all"));
}

void ITI::steer(Model& model) {
  const ModelConfig& cfg = model.config;
  probes_ = train_head_probes(model, data_, param_or<double>("val_fraction", 0.2),
                              param_or<std::uint64_t>("seed", 0));
  selected_ = select_topk_heads(probes_, param<std::size_t>("num_heads"));
  const float multiplier = param<float>("multiplier");
  const TokenScope scope = token_scope_from_string(param_or<std::string>("token_scope", "all"));

  per_layer_.clear();
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    std::vector<HeadAdditiveTransform::HeadShift> shifts;
    for (const auto& [layer, head] : selected_) {
      if (layer != l) continue;
      const HeadProbe& probe = probes_[layer * cfg.n_heads + head];
      Tensor shift = probe.direction;
      for (auto& v : shift.data()) v *= multiplier * probe.sigma;
      shifts.push_back({head, std::move(shift)});
    }
    if (!shifts.empty()) per_layer_.emplace_back(l, std::make_shared<HeadAdditiveTransform>(std::move(shifts), scope));
  }
}

std::vector<Hook> ITI::hooks() const {
  std::vector<Hook> out;
  for (const auto& [layer, t] : per_layer_) {
    out.push_back(Hook{HookSite::head_out(layer), [t](const StepContext& ctx, Tensor& x) { t->apply(ctx, x); },
                       name() + ".head_additive"});
  }
  return out;
}

// ---- PASTA ------------------------------------------------------------------

PASTA::PASTA(std::string name, nlohmann::json params) : StateControl(std::move(name), std::move(params)) {
  head_config_ = param<std::vector<std::size_t>>("head_config");
  if (head_config_.empty()) throw ConfigError(this->name() + ": head_config must not be empty");
  alpha_ = param<float>("alpha");
  if (!(alpha_ > 0.0f)) throw ConfigError(this->name() + ": alpha must be > 0");
  position_ = scale_position_from_string(param_or<std::string>("scale_position", "include"));
}

void PASTA::steer(Model& model) {
  const ModelConfig& cfg = model.config;
  std::map<std::size_t, std::vector<std::size_t>> grouped;
  for (std::size_t g : head_config_) {
    if (g >= cfg.total_heads()) {
      throw SelectionError("head index " + std::to_string(g) + " out of range for " + std::to_string(cfg.total_heads()) +
                           " heads (" + std::to_string(cfg.n_layers) + " layers x " + std::to_string(cfg.n_heads) + ")");
    }
    auto& heads = grouped[g / cfg.n_heads];
    if (std::find(heads.begin(), heads.end(), g % cfg.n_heads) == heads.end()) heads.push_back(g % cfg.n_heads);
  }
  per_layer_.assign(grouped.begin(), grouped.end());
}

std::set<std::size_t> PASTA::span_keys(const nlohmann::json& payload) {
  std::set<std::size_t> keys;
  for (const auto& span : payload.at("token_spans")) {
    const auto b = span.at(0).get<std::size_t>();
    const auto e = span.at(1).get<std::size_t>();
    for (std::size_t j = b; j < e; ++j) keys.insert(j);
  }
  return keys;
}

std::vector<Hook> PASTA::hooks() const {
  std::vector<Hook> out;
  for (const auto& [layer, heads] : per_layer_) {
    HookFn fn = [name = name(), heads, alpha = alpha_, position = position_](const StepContext& ctx, Tensor& attn) {
      if (!ctx.overrides.contains(name)) {
        throw OverrideError(name + ": no resolved spans in step context (runtime field 'substrings' missing)");
      }
      pasta_rescale(attn, heads, span_keys(ctx.overrides.at(name)), alpha, position);
    };
    out.push_back(Hook{HookSite::attn_weights(layer), std::move(fn), name() + ".attn_rescale"});
  }
  return out;
}

nlohmann::json PASTA::bind_runtime(const nlohmann::json& fields, const std::string& adapted_prompt) const {
  if (!fields.is_object() || (!fields.contains("substrings") && !fields.contains("token_spans"))) {
    throw OverrideError(name() + ": runtime field 'substrings' is required");
  }
  nlohmann::json payload = fields;
  if (fields.contains("token_spans")) return payload;

  std::vector<std::string> subs;
  const auto& s = fields.at("substrings");
  if (s.is_string()) {
    subs.push_back(s.get<std::string>());
  } else if (s.is_array()) {
    for (const auto& x : s) {
      if (!x.is_string()) throw OverrideError(name() + ": substrings must be strings");
      subs.push_back(x.get<std::string>());
    }
  } else {
    throw OverrideError(name() + ": substrings must be a string or a list of strings");
  }

  const auto spans = resolve_substring_spans(adapted_prompt, subs);
  if (spans.empty() && position_ == ScalePosition::Include) {
    std::string listed;
    for (const auto& x : subs) listed += (listed.empty() ? "'" : ", '") + x + "'";
    throw SpanError(name() + ": none of the substrings " + listed + " occur in the prompt");
  }
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& sp : spans) arr.push_back({sp.begin, sp.end});
  payload["token_spans"] = std::move(arr);
  return payload;
}

}  // namespace steer
