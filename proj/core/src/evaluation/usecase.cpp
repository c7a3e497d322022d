#include "steer/evaluation/usecase.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "steer/evaluation/checkers.hpp"

namespace steer {

namespace {

std::string require_string(const nlohmann::json& obj, const char* key, std::size_t index) {
  if (!obj.contains(key) || !obj.at(key).is_string()) {
    throw ConfigError("datapoint " + std::to_string(index) + ": field '" + key + "' must be a string");
  }
  return obj.at(key).get<std::string>();
}

std::vector<std::string> require_strings(const nlohmann::json& obj, const char* key, std::size_t index) {
  const std::string where = "datapoint " + std::to_string(index) + ": field '" + key + "'";
  if (!obj.contains(key) || !obj.at(key).is_array()) throw ConfigError(where + " must be a list of strings");
  std::vector<std::string> out;
  for (const auto& v : obj.at(key)) {
    if (!v.is_string()) throw ConfigError(where + " must be a list of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace

std::vector<DataPoint> datapoints_from_json(const nlohmann::json& array) {
  if (!array.is_array()) throw ConfigError("evaluation data must be a JSON array of datapoints");
  if (array.empty()) throw EmptyDataError("evaluation data is empty");
  std::vector<DataPoint> out;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < array.size(); ++i) {
    const auto& obj = array[i];
    if (!obj.is_object()) throw ConfigError("datapoint " + std::to_string(i) + " is not an object");
    DataPoint dp;
    dp.id = require_string(obj, "id", i);
    dp.prompt = require_string(obj, "prompt", i);
    dp.instructions = require_strings(obj, "instructions", i);
    dp.instruction_id_list = require_strings(obj, "instruction_id_list", i);
    if (!obj.contains("kwargs") || !obj.at("kwargs").is_array()) {
      throw ConfigError("datapoint " + dp.id + ": 'kwargs' must be a list");
    }
    dp.kwargs = obj.at("kwargs");
    if (dp.kwargs.size() != dp.instruction_id_list.size()) {
      throw ConfigError("datapoint " + dp.id + ": " + std::to_string(dp.kwargs.size()) + " kwargs for " +
                        std::to_string(dp.instruction_id_list.size()) + " instructions");
    }
    for (const auto& id : dp.instruction_id_list) {
      if (!CheckerRegistry::builtin().contains(id)) {
        throw RegistryError("datapoint " + dp.id + ": unknown instruction checker '" + id + "'");
      }
    }
    if (!seen.insert(dp.id).second) throw ConfigError("duplicate datapoint id '" + dp.id + "'");
    dp.fields = obj;
    out.push_back(std::move(dp));
  }
  return out;
}

std::vector<DataPoint> load_datapoints(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open evaluation data " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return datapoints_from_json(j);
}

nlohmann::json to_json(const DataPoint& dp) {
  nlohmann::json j = dp.fields.is_object() ? dp.fields : nlohmann::json::object();
  j["id"] = dp.id;
  j["prompt"] = dp.prompt;
  j["instructions"] = dp.instructions;
  j["instruction_id_list"] = dp.instruction_id_list;
  j["kwargs"] = dp.kwargs;
  return j;
}

MetricResult MetricResult::from_scores(std::string name, std::vector<double> scores) {
  MetricResult r;
  r.name = std::move(name);
  r.scores = std::move(scores);
  if (!r.scores.empty()) {
    double sum = 0.0;
    for (double s : r.scores) sum += s;
    r.mean = sum / static_cast<double>(r.scores.size());
    double sq = 0.0;
    for (double s : r.scores) sq += (s - r.mean) * (s - r.mean);
    r.std = std::sqrt(sq / static_cast<double>(r.scores.size()));
  }
  return r;
}

StrictInstructionResult strict_instruction(const std::vector<Generation>& generations,
                                           const std::vector<DataPoint>& datapoints) {
  std::map<std::string, const DataPoint*> by_id;
  for (const auto& dp : datapoints) by_id[dp.id] = &dp;
  std::vector<double> inst, prompt;
  for (const auto& g : generations) {
    auto it = by_id.find(g.datapoint_id);
    if (it == by_id.end()) throw JoinError("generation references unknown datapoint '" + g.datapoint_id + "'");
    const DataPoint& dp = *it->second;
    std::size_t pass = 0;
    for (std::size_t i = 0; i < dp.instruction_id_list.size(); ++i) {
      if (check_instruction(dp.instruction_id_list[i], dp.kwargs[i], g.response)) ++pass;
    }
    const std::size_t n = dp.instruction_id_list.size();
    inst.push_back(n == 0 ? 1.0 : static_cast<double>(pass) / static_cast<double>(n));
    prompt.push_back(pass == n ? 1.0 : 0.0);
  }
  return {MetricResult::from_scores("strict_instruction", std::move(inst)),
          MetricResult::from_scores("strict_prompt", std::move(prompt))};
}

ScoreTransform score_transform_from_string(const std::string& s) {
  if (s == "identity") return ScoreTransform::Identity;
  if (s == "sigmoid") return ScoreTransform::Sigmoid;
  throw ConfigError("unknown score transform '" + s + "' (expected identity or sigmoid)");
}

namespace {

double apply_transform(double x, ScoreTransform t) {
  return t == ScoreTransform::Sigmoid ? 1.0 / (1.0 + std::exp(-x)) : x;
}

TokenIds prompt_ids(const std::string& prompt) {
  TokenIds ids{kBos};
  const TokenIds body = tokenize(prompt);
  ids.insert(ids.end(), body.begin(), body.end());
  return ids;
}

void check_fits(const Model& model, std::size_t n) {
  if (n > model.config.max_seq) {
    throw LengthError("sequence of " + std::to_string(n) + " tokens exceeds max_seq " +
                      std::to_string(model.config.max_seq));
  }
}

}  // namespace

double loglik_reward(const Model& model, const std::string& prompt, const std::string& response,
                     ScoreTransform transform) {
  if (response.empty()) throw LengthError("loglik_reward needs a nonempty response");
  TokenIds ids = prompt_ids(prompt);
  const std::size_t m = ids.size();
  const TokenIds resp = tokenize(response);
  ids.insert(ids.end(), resp.begin(), resp.end());
  check_fits(model, ids.size());
  const Tensor logits = forward(model, ids).logits;
  double total = 0.0;
  for (std::size_t i = 0; i < resp.size(); ++i) {
    total += log_softmax(logits.row(m - 1 + i))[static_cast<std::size_t>(resp[i])];
  }
  return apply_transform(total / static_cast<double>(resp.size()), transform);
}

double perplexity(const Model& model, const std::string& text) {
  const TokenIds ids = tokenize(text);
  if (ids.size() < 2) throw LengthError("perplexity needs at least 2 tokens, got " + std::to_string(ids.size()));
  check_fits(model, ids.size());
  const Tensor logits = forward(model, ids).logits;
  double nll = 0.0;
  for (std::size_t i = 1; i < ids.size(); ++i) {
    nll -= log_softmax(logits.row(i - 1))[static_cast<std::size_t>(ids[i])];
  }
  return std::exp(nll / static_cast<double>(ids.size() - 1));
}

LoglikScorer::LoglikScorer(std::shared_ptr<const Model> model, ScoreTransform transform)
    : model_(std::move(model)), transform_(transform) {
  if (!model_) throw ConfigError("LoglikScorer needs a model");
}

double LoglikScorer::score(const std::string& prompt, const std::string& response) const {
  if (!response.empty()) return loglik_reward(*model_, prompt, response, transform_);
  const TokenIds ids = prompt_ids(prompt);
  check_fits(*model_, ids.size());
  const Tensor logits = forward(*model_, ids).logits;
  return apply_transform(log_softmax(logits.row(ids.size() - 1))[kEos], transform_);
}

std::vector<MetricResult> StrictInstructionMetric::evaluate(const std::vector<Generation>& generations,
                                                            const std::vector<DataPoint>& datapoints) const {
  auto r = strict_instruction(generations, datapoints);
  return {std::move(r.prompt_level), std::move(r.instruction_level)};
}

RewardScoreMetric::RewardScoreMetric(std::shared_ptr<const Scorer> scorer) : scorer_(std::move(scorer)) {
  if (!scorer_) throw ConfigError("RewardScore needs a scorer");
}

std::vector<MetricResult> RewardScoreMetric::evaluate(const std::vector<Generation>& generations,
                                                      const std::vector<DataPoint>&) const {
  std::vector<double> scores;
  scores.reserve(generations.size());
  for (const auto& g : generations) scores.push_back(scorer_->score(g.prompt, g.response));
  return {MetricResult::from_scores(name(), std::move(scores))};
}

InstructionFollowing::InstructionFollowing(std::vector<DataPoint> data, std::vector<MetricPtr> metrics)
    : data_(std::move(data)), metrics_(std::move(metrics)) {
  if (data_.empty()) throw EmptyDataError("instruction-following use case has no datapoints");
}

UseCaseResult usecase_run(const UseCase& use_case, const SteeringPipeline& pipeline, const RuntimeOverrides& overrides,
                          std::size_t num_trials, const GenParams& gen, const std::string& pipeline_label,
                          const std::string& config_label) {
  if (num_trials == 0) throw ConfigError("num_trials must be >= 1");
  if (!pipeline.steered()) throw SteerError("pipeline must be steered before running a use case");
  UseCaseResult result;
  for (const auto& dp : use_case.data()) {
    const std::string prompt = use_case.prompt_for(dp);
    for (std::size_t t = 0; t < num_trials; ++t) {
      GenParams p = gen;
      p.seed = gen.seed + t;
      const auto out = pipeline.generate(prompt, p, overrides, to_json(dp));
      result.generations.push_back({dp.id, t, pipeline_label, config_label, prompt, out.response});
    }
  }
  for (const auto& metric : use_case.metrics()) {
    try {
      for (auto& r : metric->evaluate(result.generations, use_case.data())) result.metrics.push_back(std::move(r));
    } catch (const std::exception& e) {
      result.failures.push_back({metric->name(), e.what()});
    }
  }
  return result;
}

}  // namespace steer
