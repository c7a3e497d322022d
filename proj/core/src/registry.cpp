#include "steer/registry.hpp"

#include <fstream>
#include <functional>
#include <map>

#include "steer/input_controls.hpp"
#include "steer/output_controls.hpp"
#include "steer/state_controls.hpp"
#include "steer/structural_controls.hpp"
#include "steer/weights_io.hpp"

namespace steer {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

const nlohmann::json& source_param(const nlohmann::json& params, const std::string& key, const std::string& name) {
  if (!params.contains(key)) throw ConfigError(name + ": missing required parameter '" + key + "'");
  return params.at(key);
}

ContrastivePairs pairs_param(const nlohmann::json& params, const std::string& name, const std::filesystem::path& base) {
  const auto& src = source_param(params, "data", name);
  if (src.is_string()) return load_contrastive_pairs(resolve(base, src.get<std::string>()));
  return contrastive_pairs_from_json(src);
}

WeightMap weights_param(const nlohmann::json& params, const std::string& key, const std::string& name,
                        const std::filesystem::path& base) {
  const auto& src = source_param(params, key, name);
  if (!src.is_string()) throw ConfigError(name + ": '" + key + "' must be a path to an STW1 file");
  return read_weight_file(resolve(base, src.get<std::string>())).tensors;
}

using Factory = std::function<ControlPtr(const std::string&, const nlohmann::json&, const std::filesystem::path&)>;

const std::map<std::string, Factory>& factories() {
  static const std::map<std::string, Factory> table = {
      {"CAA",
       [](const std::string& n, const nlohmann::json& p, const std::filesystem::path& b) -> ControlPtr {
         return std::make_unique<CAA>(n, p, pairs_param(p, n, b));
       }},
      {"ActAdd",
       [](const std::string& n, const nlohmann::json& p, const std::filesystem::path&) -> ControlPtr {
         return std::make_unique<ActAdd>(n, p);
       }},
      {"ITI",
       [](const std::string& n, const nlohmann::json& p, const std::filesystem::path& b) -> ControlPtr {
         return std::make_unique<ITI>(n, p, labeled_from_pairs(pairs_param(p, n, b)));
       }},
      {"PASTA",
       [](const std::string& n, const nlohmann::json& p, const std::filesystem::path&) -> ControlPtr {
         return std::make_unique<PASTA>(n, p);
       }},
      {"FewShot",
       [](const std::string& n, const nlohmann::json& p, const std::filesystem::path& b) -> ControlPtr {
         const auto& src = source_param(p, "pool", n);
         auto pool = src.is_string() ? load_example_pool(resolve(b, src.get<std::string>())) : examples_from_json(src);
         return std::make_unique<FewShot>(n, p, std::move(pool));
       }},
      {"Prefix",
       [](const std::string& n, const nlohmann::json& p, const std::filesystem::path&) -> ControlPtr {
         return std::make_unique<Prefix>(n, p);
       }},
      {"TaskVector",
       [](const std::string& n, const nlohmann::json& p, const std::filesystem::path& b) -> ControlPtr {
         return std::make_unique<TaskVector>(n, p, weights_param(p, "delta", n, b));
       }},
      {"WeightInterpolation",
       [](const std::string& n, const nlohmann::json& p, const std::filesystem::path& b) -> ControlPtr {
         return std::make_unique<WeightInterpolation>(n, p, weights_param(p, "other", n, b));
       }},
      {"DeAL",
       [](const std::string& n, const nlohmann::json& p, const std::filesystem::path&) -> ControlPtr {
         return std::make_unique<DeAL>(n, p);
       }},
      {"LogitBias",
       [](const std::string& n, const nlohmann::json& p, const std::filesystem::path&) -> ControlPtr {
         return std::make_unique<LogitBias>(n, p);
       }},
  };
  return table;
}

}  // namespace

ControlPtr make_control(const std::string& control_cls, const std::string& name, const nlohmann::json& params,
                        const std::filesystem::path& base_dir) {
  auto it = factories().find(control_cls);
  if (it == factories().end()) throw RegistryError("unknown control class '" + control_cls + "'");
  return it->second(name.empty() ? control_cls : name, params.is_null() ? nlohmann::json::object() : params, base_dir);
}

std::vector<std::string> control_classes() {
  std::vector<std::string> out;
  for (const auto& [k, _] : factories()) out.push_back(k);
  return out;
}

std::vector<ControlPtr> controls_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object() || !j.contains("controls") || !j.at("controls").is_array()) {
    throw ConfigError("pipeline config needs a 'controls' list");
  }
  std::vector<ControlPtr> out;
  for (const auto& entry : j.at("controls")) {
    if (!entry.is_object() || !entry.contains("control") || !entry.at("control").is_string()) {
      throw ConfigError("each pipeline entry needs a string 'control' class");
    }
    const auto cls = entry.at("control").get<std::string>();
    const auto name = entry.value("name", cls);
    out.push_back(make_control(cls, name, entry.value("params", nlohmann::json::object()), base_dir));
  }
  return out;
}

std::vector<ControlPtr> load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pipeline config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return controls_from_json(j, path.parent_path());
}

}  // namespace steer
