#include "steer/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "steer/errors.hpp"

namespace steer {

namespace {

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

std::size_t checked_volume(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
  std::size_t n = 1;
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimension must be positive, got " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) { data_.assign(checked_volume(shape_), 0.0f); }

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (checked_volume(shape_) != data_.size()) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                         shape_str(shape_));
  }
}

Tensor Tensor::filled(Shape shape, float value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  return a.size() == 0 || std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(float)) == 0;
}

Rng::Rng(std::uint64_t seed) {
  std::uint64_t x = seed;
  for (auto& s : s_) s = splitmix64(x);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  if (n == 0) throw DimensionError("uniform_int requires n > 0");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t r;
  do {
    r = next_u64();
  } while (r >= limit);
  return r % n;
}

double Rng::normal() {
  if (spare_) {
    double v = *spare_;
    spare_.reset();
    return v;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double mag = std::sqrt(-2.0 * std::log(u1));
  spare_ = mag * std::sin(2.0 * std::numbers::pi * u2);
  return mag * std::cos(2.0 * std::numbers::pi * u2);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul shape mismatch: " + shape_str(a.shape()) + " * " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    float* o = out.data().data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const float av = a.at(i, p);
      const float* br = b.data().data() + p * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += av * br[j];
    }
  }
  return out;
}

void softmax_inplace(std::span<float> row) {
  if (row.empty()) throw DegenerateRowError("softmax over an empty row");
  const float mx = *std::max_element(row.begin(), row.end());
  if (mx == -std::numeric_limits<float>::infinity()) throw DegenerateRowError("softmax row has no finite entry");
  float sum = 0.0f;
  for (auto& v : row) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (auto& v : row) v /= sum;
}

Tensor softmax_rows(const Tensor& m, const std::optional<Tensor>& mask) {
  if (m.rank() != 2) throw DimensionError("softmax_rows expects a matrix, got " + shape_str(m.shape()));
  if (mask && mask->shape() != m.shape()) {
    throw DimensionError("softmax mask shape " + shape_str(mask->shape()) + " != " + shape_str(m.shape()));
  }
  Tensor out = m;
  const std::size_t cols = m.cols();
  std::vector<float> buf;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = out.row(r);
    if (!mask) {
      softmax_inplace(row);
      continue;
    }
    buf.clear();
    for (std::size_t c = 0; c < cols; ++c)
      if (mask->at(r, c) != 0.0f) buf.push_back(row[c]);
    if (buf.empty()) throw DegenerateRowError("softmax row " + std::to_string(r) + " is fully masked");
    softmax_inplace(buf);
    std::size_t i = 0;
    for (std::size_t c = 0; c < cols; ++c) row[c] = mask->at(r, c) != 0.0f ? buf[i++] : 0.0f;
  }
  return out;
}

void rms_norm_into(std::span<const float> x, std::span<const float> gamma, float eps, std::span<float> out) {
  if (x.size() != gamma.size() || out.size() != x.size()) {
    throw DimensionError("rms_norm size mismatch: x=" + std::to_string(x.size()) +
                         " gamma=" + std::to_string(gamma.size()));
  }
  float ss = 0.0f;
  for (float v : x) ss += v * v;
  const float mean_sq = ss / static_cast<float>(x.size());
  const float denom = std::sqrt(mean_sq + eps);
  if (denom == 0.0f) {
    // x is all zeros and eps == 0: the normalized value is 0.
    std::fill(out.begin(), out.end(), 0.0f);
    return;
  }
  const float inv = 1.0f / denom;
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * inv * gamma[i];
}

Tensor rms_norm(const Tensor& x, const Tensor& gamma, float eps) {
  if (x.rank() != 1 || gamma.rank() != 1) throw DimensionError("rms_norm expects vectors");
  Tensor out(x.shape());
  rms_norm_into(x.data(), gamma.data(), eps, out.data());
  return out;
}

float dot(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw DimensionError("dot size mismatch");
  float s = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

float l2_norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return static_cast<float>(std::sqrt(s));
}

VecStats vec_stats(std::span<const Tensor> rows) {
  if (rows.empty()) throw EmptyDataError("vec_stats requires at least one row");
  const std::size_t d = rows.front().size();
  std::vector<double> acc(d, 0.0);
  for (const auto& r : rows) {
    if (r.size() != d) throw DimensionError("vec_stats rows have unequal dimensions");
    for (std::size_t i = 0; i < d; ++i) acc[i] += r[i];
  }
  VecStats st;
  st.mean_ = Tensor({d});
  for (std::size_t i = 0; i < d; ++i) st.mean_[i] = static_cast<float>(acc[i] / static_cast<double>(rows.size()));
  st.rows_.assign(rows.begin(), rows.end());
  return st;
}

float VecStats::std_along(std::span<const float> direction) const {
  if (direction.size() != mean_.size()) throw DimensionError("std_along direction has wrong dimension");
  const double norm = l2_norm(direction);
  if (norm == 0.0) throw DimensionError("std_along direction must be nonzero");
  std::vector<double> proj;
  proj.reserve(rows_.size());
  for (const auto& r : rows_) {
    double s = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) s += static_cast<double>(r[i]) * direction[i];
    proj.push_back(s / norm);
  }
  const double mu = std::accumulate(proj.begin(), proj.end(), 0.0) / static_cast<double>(proj.size());
  double var = 0.0;
  for (double p : proj) var += (p - mu) * (p - mu);
  return static_cast<float>(std::sqrt(var / static_cast<double>(proj.size())));
}

}  // namespace steer
