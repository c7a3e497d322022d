#pragma once

#include <filesystem>

#include "steer/control.hpp"

namespace steer {

// theta + scale * delta for every tensor named in delta; others unchanged.
// Unknown names or shape mismatches raise StructuralError naming the tensor.
void apply_task_vector(WeightMap& weights, const WeightMap& delta, float scale);

// (1 - t) * a + t * b elementwise; schemas must match exactly and 0 <= t <= 1.
WeightMap interpolate_weights(const WeightMap& a, const WeightMap& b, float t);

// Task-vector arithmetic with a stored delta.
//   params: scale (1.0)
class TaskVector final : public StructuralControl {
 public:
  TaskVector(std::string name, nlohmann::json params, WeightMap delta);
  void apply_to_weights(Model& model) override;

 private:
  WeightMap delta_;
};

// Merge with a second model of the same schema.
//   params: t
class WeightInterpolation final : public StructuralControl {
 public:
  WeightInterpolation(std::string name, nlohmann::json params, WeightMap other);
  void apply_to_weights(Model& model) override;

 private:
  WeightMap other_;
};

}  // namespace steer
