#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "steer/control.hpp"
#include "steer/state/estimators.hpp"
#include "steer/state/transforms.hpp"

namespace steer {

// Contrastive activation addition.
//   params: multiplier, layer_id, token_scope ("generated"), normalize_vector
//   (false), train_spec ({"method": "mean_diff", "accumulate": "last_token"})
class CAA final : public StateControl {
 public:
  CAA(std::string name, nlohmann::json params, ContrastivePairs data);

  void steer(Model& model) override;
  std::vector<Hook> hooks() const override;

  // Fitted mean-difference vector (empty before steer).
  const Tensor& vector() const { return vector_; }

 private:
  ContrastivePairs data_;
  VectorTrainSpec train_spec_;
  std::size_t layer_;
  Tensor vector_;
  std::shared_ptr<const AdditiveTransform> transform_;
};

// Activation addition from a single prompt pair.
//   params: prompt_pos, prompt_neg, layer_id, coefficient
class ActAdd final : public StateControl {
 public:
  ActAdd(std::string name, nlohmann::json params);

  void steer(Model& model) override;
  std::vector<Hook> hooks() const override;

  const Tensor& sequence() const { return sequence_; }

 private:
  std::size_t layer_;
  Tensor sequence_;
  std::shared_ptr<const PositionalAdditiveTransform> transform_;
};

// Inference-time intervention: per-head probes, top-K heads by validation
// accuracy, shift of multiplier * sigma * direction on each selected head.
//   params: num_heads (K), multiplier, val_fraction (0.2), seed (0),
//   token_scope ("all")
class ITI final : public StateControl {
 public:
  ITI(std::string name, nlohmann::json params, std::vector<LabeledPrompt> data);

  void steer(Model& model) override;
  std::vector<Hook> hooks() const override;

  const ProbeTable& probes() const { return probes_; }
  const std::vector<std::pair<std::size_t, std::size_t>>& selected() const { return selected_; }

 private:
  std::vector<LabeledPrompt> data_;
  ProbeTable probes_;
  std::vector<std::pair<std::size_t, std::size_t>> selected_;
  std::vector<std::pair<std::size_t, std::shared_ptr<const HeadAdditiveTransform>>> per_layer_;
};

// Labeled prompts from contrastive pairs: prompt+positive -> 1, prompt+negative -> 0.
std::vector<LabeledPrompt> labeled_from_pairs(const ContrastivePairs& pairs);

// Post-hoc attention steering.
//   params: head_config (global layer-major head indices), alpha,
//   scale_position ("include")
//   runtime fields: substrings (string or list of strings)
class PASTA final : public StateControl {
 public:
  PASTA(std::string name, nlohmann::json params);

  void steer(Model& model) override;
  std::vector<Hook> hooks() const override;
  nlohmann::json bind_runtime(const nlohmann::json& fields, const std::string& adapted_prompt) const override;

  // Key positions emphasized for a resolved runtime payload.
  static std::set<std::size_t> span_keys(const nlohmann::json& payload);

 private:
  std::vector<std::size_t> head_config_;
  float alpha_;
  ScalePosition position_;
  // layer -> heads within that layer
  std::vector<std::pair<std::size_t, std::vector<std::size_t>>> per_layer_;
};

}  // namespace steer
