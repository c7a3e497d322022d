#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace steer {

using Shape = std::vector<std::size_t>;

// Dense row-major float32 tensor. A default-constructed tensor is empty
// (rank 0, no data) and is used as a "no value" sentinel; every other
// tensor has strictly positive dimensions.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor filled(Shape shape, float value);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Views the tensor as a matrix whose columns are the last dimension.
  std::size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }
  std::size_t rows() const { return cols() == 0 ? 0 : data_.size() / cols(); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  std::vector<float>& storage() { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  float& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  float at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<float> row(std::size_t r) { return std::span<float>(data_).subspan(r * cols(), cols()); }
  std::span<const float> row(std::size_t r) const {
    return std::span<const float>(data_).subspan(r * cols(), cols());
  }

 private:
  Shape shape_;
  std::vector<float> data_;
};

// Exact bit-level comparison of shape and contents.
bool bitwise_equal(const Tensor& a, const Tensor& b);

// splitmix64-seeded xoshiro256**. The stream depends only on the seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform double in [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
  std::uint64_t uniform_int(std::uint64_t n);
  // Standard normal via Box-Muller; pairs are generated and cached.
  double normal();

 private:
  std::uint64_t s_[4];
  std::optional<double> spare_;
};

// a[m x k] * b[k x n]; throws DimensionError when inner dims differ.
Tensor matmul(const Tensor& a, const Tensor& b);

// Row softmax with max-subtraction. Entries where the mask is false receive
// probability 0; a row with no unmasked entry raises DegenerateRowError.
Tensor softmax_rows(const Tensor& m, const std::optional<Tensor>& mask = std::nullopt);

// In-place softmax over a single row.
void softmax_inplace(std::span<float> row);

// x_i * gamma_i / sqrt(mean(x^2) + eps)
Tensor rms_norm(const Tensor& x, const Tensor& gamma, float eps);
void rms_norm_into(std::span<const float> x, std::span<const float> gamma, float eps, std::span<float> out);

float dot(std::span<const float> a, std::span<const float> b);
float l2_norm(std::span<const float> v);

// Summary statistics over a set of equal-length vectors.
class VecStats {
 public:
  const Tensor& mean() const { return mean_; }
  std::size_t count() const { return rows_.size(); }
  // Population standard deviation of the projections of every row onto
  // `direction`, which is normalized first.
  float std_along(std::span<const float> direction) const;

 private:
  friend VecStats vec_stats(std::span<const Tensor> rows);
  Tensor mean_;
  std::vector<Tensor> rows_;
};

VecStats vec_stats(std::span<const Tensor> rows);

}  // namespace steer
