#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "steer/control.hpp"

namespace steer {

// Builds a control by class name. Classes that need data read it from a
// path parameter, resolved against base_dir when relative, or inline JSON:
//   CAA, ITI             "data"   contrastive pairs (JSONL path or array)
//   FewShot              "pool"   examples (JSONL path or array)
//   TaskVector           "delta"  STW1 file of tensors to add
//   WeightInterpolation  "other"  STW1 model of the same schema
// The remaining classes (ActAdd, PASTA, Prefix, DeAL, LogitBias) take only
// parameters. Unknown classes raise RegistryError.
ControlPtr make_control(const std::string& control_cls, const std::string& name, const nlohmann::json& params,
                        const std::filesystem::path& base_dir = {});

std::vector<std::string> control_classes();

// {"controls": [{"control": cls, "name": optional, "params": {...}}, ...]}
std::vector<ControlPtr> controls_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
std::vector<ControlPtr> load_pipeline_config(const std::filesystem::path& path);

}  // namespace steer
