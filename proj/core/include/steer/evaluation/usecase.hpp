#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "steer/model.hpp"
#include "steer/pipeline.hpp"

namespace steer {

struct DataPoint {
  std::string id;
  std::string prompt;
  std::vector<std::string> instructions;
  std::vector<std::string> instruction_id_list;
  nlohmann::json kwargs = nlohmann::json::array();
  nlohmann::json fields = nlohmann::json::object();  // the full source object, for override lookups
};

// A JSON array of {id, prompt, instructions, instruction_id_list, kwargs}.
// Ids must be unique, kwargs parallel to instruction_id_list, and every
// checker registered.
std::vector<DataPoint> datapoints_from_json(const nlohmann::json& array);
std::vector<DataPoint> load_datapoints(const std::filesystem::path& path);
nlohmann::json to_json(const DataPoint& dp);

struct Generation {
  std::string datapoint_id;
  std::size_t trial = 0;
  std::string pipeline;
  std::string config;
  std::string prompt;
  std::string response;
};

struct MetricResult {
  std::string name;
  std::vector<double> scores;  // one per generation, in generation order
  double mean = 0.0;
  double std = 0.0;  // population

  static MetricResult from_scores(std::string name, std::vector<double> scores);
};

// "strict_instruction" is the fraction of a response's instructions that
// pass; "strict_prompt" is 1 when all of them pass. Unknown datapoint ids
// raise JoinError.
struct StrictInstructionResult {
  MetricResult instruction_level;
  MetricResult prompt_level;
};
StrictInstructionResult strict_instruction(const std::vector<Generation>& generations,
                                           const std::vector<DataPoint>& datapoints);

enum class ScoreTransform { Identity, Sigmoid };
ScoreTransform score_transform_from_string(const std::string& s);

// Mean log-probability per response token given BOS + prompt, under `model`
// with no hooks.
double loglik_reward(const Model& model, const std::string& prompt, const std::string& response,
                     ScoreTransform transform = ScoreTransform::Identity);

// exp(mean NLL of tokens 2..n given their prefix); no BOS is added.
double perplexity(const Model& model, const std::string& text);

class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual double score(const std::string& prompt, const std::string& response) const = 0;
};

// loglik_reward under a fixed model. An empty response is scored by the
// log-probability of ending immediately.
class LoglikScorer final : public Scorer {
 public:
  LoglikScorer(std::shared_ptr<const Model> model, ScoreTransform transform);
  double score(const std::string& prompt, const std::string& response) const override;

 private:
  std::shared_ptr<const Model> model_;
  ScoreTransform transform_;
};

class Metric {
 public:
  virtual ~Metric() = default;
  virtual std::string name() const = 0;
  // Per-generation metric names this metric produces, in output order.
  virtual std::vector<std::string> outputs() const { return {name()}; }
  virtual std::vector<MetricResult> evaluate(const std::vector<Generation>& generations,
                                             const std::vector<DataPoint>& datapoints) const = 0;
};

// Outputs strict_prompt and strict_instruction.
class StrictInstructionMetric final : public Metric {
 public:
  std::string name() const override { return "strict_instruction"; }
  std::vector<std::string> outputs() const override { return {"strict_prompt", "strict_instruction"}; }
  std::vector<MetricResult> evaluate(const std::vector<Generation>& generations,
                                     const std::vector<DataPoint>& datapoints) const override;
};

class RewardScoreMetric final : public Metric {
 public:
  explicit RewardScoreMetric(std::shared_ptr<const Scorer> scorer);
  std::string name() const override { return "reward_score"; }
  std::vector<MetricResult> evaluate(const std::vector<Generation>& generations,
                                     const std::vector<DataPoint>& datapoints) const override;

 private:
  std::shared_ptr<const Scorer> scorer_;
};

using MetricPtr = std::shared_ptr<const Metric>;

class UseCase {
 public:
  virtual ~UseCase() = default;
  virtual const std::vector<DataPoint>& data() const = 0;
  virtual const std::vector<MetricPtr>& metrics() const = 0;
  virtual std::string prompt_for(const DataPoint& dp) const { return dp.prompt; }
};

class InstructionFollowing final : public UseCase {
 public:
  InstructionFollowing(std::vector<DataPoint> data, std::vector<MetricPtr> metrics);
  const std::vector<DataPoint>& data() const override { return data_; }
  const std::vector<MetricPtr>& metrics() const override { return metrics_; }

 private:
  std::vector<DataPoint> data_;
  std::vector<MetricPtr> metrics_;
};

struct MetricFailure {
  std::string metric;
  std::string message;
};

struct UseCaseResult {
  std::vector<Generation> generations;  // datapoint-major, then trial
  std::vector<MetricResult> metrics;
  std::vector<MetricFailure> failures;
};

// Generates every datapoint num_trials times (trial t uses seed gen.seed + t)
// and then evaluates each metric; a failing metric is recorded, not fatal.
UseCaseResult usecase_run(const UseCase& use_case, const SteeringPipeline& pipeline, const RuntimeOverrides& overrides,
                          std::size_t num_trials, const GenParams& gen, const std::string& pipeline_label = {},
                          const std::string& config_label = {});

}  // namespace steer
