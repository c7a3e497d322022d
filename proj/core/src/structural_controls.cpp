#include "steer/structural_controls.hpp"

namespace steer {

void apply_task_vector(WeightMap& weights, const WeightMap& delta, float scale) {
  for (const auto& [name, d] : delta) {
    auto it = weights.find(name);
    if (it == weights.end()) throw StructuralError("delta tensor '" + name + "' is not a model weight");
    if (it->second.shape() != d.shape()) throw StructuralError("delta tensor '" + name + "' has the wrong shape");
  }
  if (scale == 0.0f) return;
  for (const auto& [name, d] : delta) {
    auto dst = weights.at(name).data();
    auto src = d.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
  }
}

WeightMap interpolate_weights(const WeightMap& a, const WeightMap& b, float t) {
  if (!(t >= 0.0f && t <= 1.0f)) throw StructuralError("interpolation t must lie in [0, 1]");
  if (a.size() != b.size()) throw StructuralError("weight schemas differ in tensor count");
  WeightMap out;
  for (const auto& [name, ta] : a) {
    auto it = b.find(name);
    if (it == b.end()) throw StructuralError("tensor '" + name + "' missing from second model");
    if (it->second.shape() != ta.shape()) throw StructuralError("tensor '" + name + "' shapes differ");
    Tensor r = ta;
    auto rd = r.data();
    auto bd = it->second.data();
    if (t == 1.0f) {
      std::copy(bd.begin(), bd.end(), rd.begin());
    } else if (t != 0.0f) {
      for (std::size_t i = 0; i < rd.size(); ++i) rd[i] = (1.0f - t) * rd[i] + t * bd[i];
    }
    out.emplace(name, std::move(r));
  }
  return out;
}

TaskVector::TaskVector(std::string name, nlohmann::json params, WeightMap delta)
    : StructuralControl(std::move(name), std::move(params)), delta_(std::move(delta)) {
  param_or<float>("scale", 1.0f);
}

void TaskVector::apply_to_weights(Model& model) {
  apply_task_vector(model.weights, delta_, param_or<float>("scale", 1.0f));
}

WeightInterpolation::WeightInterpolation(std::string name, nlohmann::json params, WeightMap other)
    : StructuralControl(std::move(name), std::move(params)), other_(std::move(other)) {
  param<float>("t");
}

void WeightInterpolation::apply_to_weights(Model& model) {
  model.weights = interpolate_weights(model.weights, other_, param<float>("t"));
}

}  // namespace steer
