#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "steer/control_spec.hpp"
#include "steer/evaluation/usecase.hpp"
#include "steer/pipeline.hpp"

namespace steer {

struct FixedControl {
  std::string control_cls;
  std::string name;
  nlohmann::json params = nlohmann::json::object();
};

using PipelineItem = std::variant<FixedControl, ControlSpec>;

struct BenchmarkConfig {
  // {"type": "instruction_following", "data": path, "metrics": [...],
  //  "score_transform": "identity"|"sigmoid"}
  nlohmann::json use_case = nlohmann::json::object();
  std::filesystem::path model_path;
  std::map<std::string, std::vector<PipelineItem>> pipelines;
  RuntimeOverrides overrides;
  std::size_t num_trials = 1;
  GenParams gen;
  bool seed_given = false;  // gen_params.seed was present in the file
  std::size_t workers = 1;
  std::filesystem::path output_dir;
  // {"x": metric, "y": metric, "group_by": param}; used for tradeoff.svg
  std::string plot_x = "strict_instruction";
  std::string plot_y = "reward_score";
  std::string plot_group_by;
  std::filesystem::path base_dir;  // relative paths resolve against this
};

// Parses the JSON form. A pipeline item is either a fixed control
// {"control", "name"?, "params"?} or a spec that adds
// {"vars": {var: [values...]}, "mode": "grid"|"zip"}; var order is the
// order in the file.
BenchmarkConfig benchmark_config_from_json(const nlohmann::ordered_json& j, const std::filesystem::path& base_dir = {});
BenchmarkConfig load_benchmark_config(const std::filesystem::path& path);

using ParamMap = std::map<std::string, nlohmann::json>;  // "<control>.<var>" -> value

struct ResultRow {
  std::string pipeline;
  ParamMap params;
  std::size_t trial = 0;
  std::string datapoint;
  std::string metric;
  double score = 0.0;

  bool operator==(const ResultRow&) const = default;
};

struct ErrorRecord {
  std::string pipeline;
  ParamMap params;
  std::string stage;  // "setup", "steer", "generate" or "metric:<name>"
  std::string message;
};

struct ResultTable {
  std::vector<ResultRow> rows;
  std::vector<ErrorRecord> errors;
  nlohmann::json metadata = nlohmann::json::object();
  std::size_t configs_total = 0;
  std::size_t configs_failed = 0;
};

// One concrete pipeline of a benchmark: controls with fully expanded params.
struct ConfigInstance {
  std::string pipeline;
  std::vector<FixedControl> controls;
  ParamMap params;
};

// Pipelines in name order, each expanded in spec order (the first spec
// varies slowest when a pipeline holds several).
std::vector<ConfigInstance> expand_benchmark(const BenchmarkConfig& cfg);

// Loads model and use case from cfg and runs every config.
ResultTable run_benchmark(const BenchmarkConfig& cfg);
ResultTable run_benchmark(const BenchmarkConfig& cfg, const Model& model, const UseCase& use_case);

std::unique_ptr<UseCase> make_use_case(const nlohmann::json& spec, std::shared_ptr<const Model> model,
                                       const std::filesystem::path& base_dir = {});

// Indices of points no other point weakly dominates with one strict
// improvement (maximizing both coordinates), sorted by x then index.
std::vector<std::size_t> pareto_frontier(const std::vector<std::pair<double, double>>& points);

// Writes results.csv, results.jsonl and metadata.json into dir.
void export_results(const ResultTable& table, const std::filesystem::path& dir);
std::string results_csv(const ResultTable& table);
std::string results_jsonl(const ResultTable& table);
ResultTable load_results(const std::filesystem::path& dir);
std::vector<ResultRow> rows_from_jsonl(const std::string& text);

// Mean x and y per (pipeline, params) group. Pipelines named "baseline" are
// drawn as an X; every other point is labeled with its group_by parameter
// (all parameters when group_by is empty).
struct TradeoffPoint {
  std::string pipeline;
  ParamMap params;
  std::string label;
  double x = 0.0;
  double y = 0.0;
  bool baseline = false;
};
std::vector<TradeoffPoint> tradeoff_points(const ResultTable& table, const std::string& x_metric,
                                           const std::string& y_metric, const std::string& group_by = {});
std::string render_tradeoff_svg(const ResultTable& table, const std::string& x_metric, const std::string& y_metric,
                                const std::string& group_by = {});
void render_tradeoff_svg(const ResultTable& table, const std::string& x_metric, const std::string& y_metric,
                         const std::string& group_by, const std::filesystem::path& path);

std::string format_score(double v);

}  // namespace steer
