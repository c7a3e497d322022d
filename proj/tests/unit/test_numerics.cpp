#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "steer/errors.hpp"
#include "steer/numerics.hpp"

using namespace steer;

TEST_CASE("tensor construction validates shape and data") {
  CHECK_THROWS_AS(Tensor(Shape{}), DimensionError);
  CHECK_THROWS_AS(Tensor(Shape{2, 0}), DimensionError);
  CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), DimensionError);
  Tensor t({2, 3});
  CHECK(t.size() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(std::all_of(t.data().begin(), t.data().end(), [](float v) { return v == 0.0f; }));
  CHECK(Tensor().empty());
}

TEST_CASE("bitwise_equal distinguishes signed zero and shape") {
  Tensor a({2}, {0.0f, 1.0f});
  Tensor b({2}, {-0.0f, 1.0f});
  CHECK(bitwise_equal(a, a));
  CHECK_FALSE(bitwise_equal(a, b));
  CHECK_FALSE(bitwise_equal(Tensor({1, 2}, {0.0f, 1.0f}), a));
}

TEST_CASE("rng streams depend only on the seed") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    (void)c.next_u64();
  }
  Rng d(42), e(43);
  CHECK(d.next_u64() != e.next_u64());
}

TEST_CASE("uniform_int is unbiased across a small range") {
  Rng rng(7);
  std::map<std::uint64_t, int> counts;
  const int n = 60000;
  for (int i = 0; i < n; ++i) ++counts[rng.uniform_int(6)];
  CHECK(counts.size() == 6);
  for (const auto& [k, c] : counts) {
    CHECK(k < 6);
    CHECK(std::abs(c - n / 6) < 600);
  }
  CHECK_THROWS_AS(rng.uniform_int(0), DimensionError);
}

TEST_CASE("normal draws have unit variance") {
  Rng rng(3);
  double s = 0, ss = 0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    ss += x * x;
  }
  CHECK(std::abs(s / n) < 0.02);
  CHECK(std::abs(ss / n - 1.0) < 0.03);
}

TEST_CASE("matmul matches a naive triple loop") {
  Rng rng(1);
  Tensor a({5, 7}), b({7, 3});
  for (auto& v : a.data()) v = static_cast<float>(rng.normal());
  for (auto& v : b.data()) v = static_cast<float>(rng.normal());
  const Tensor c = matmul(a, b);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 7; ++k) s += static_cast<double>(a.at(i, k)) * b.at(k, j);
      CHECK(c.at(i, j) == doctest::Approx(s).epsilon(1e-5));
    }
  }
  CHECK_THROWS_AS(matmul(a, a), DimensionError);
}

TEST_CASE("softmax rows sum to one and respect the mask") {
  Tensor m({2, 4}, {1, 2, 3, 4, -1000, 0, 1000, 2});
  const Tensor p = softmax_rows(m);
  for (std::size_t r = 0; r < 2; ++r) {
    const auto row = p.row(r);
    CHECK(std::accumulate(row.begin(), row.end(), 0.0) == doctest::Approx(1.0));
  }
  CHECK(p.at(1, 2) == doctest::Approx(1.0));

  Tensor mask({2, 4}, {1, 1, 0, 0, 0, 0, 0, 1});
  const Tensor q = softmax_rows(m, mask);
  CHECK(q.at(0, 2) == 0.0f);
  CHECK(q.at(0, 3) == 0.0f);
  CHECK(q.at(0, 1) == doctest::Approx(std::exp(1.0) / (1.0 + std::exp(1.0))));
  CHECK(q.at(1, 3) == 1.0f);

  Tensor none({1, 2}, {0, 0});
  CHECK_THROWS_AS(softmax_rows(Tensor({1, 2}, {1, 2}), none), DegenerateRowError);
}

TEST_CASE("rms_norm of a zero vector is zero") {
  Tensor x({3}, {0, 0, 0});
  Tensor g = Tensor::filled({3}, 1.0f);
  const Tensor y = rms_norm(x, g, 1e-5f);
  for (float v : y.data()) CHECK(v == 0.0f);
}

TEST_CASE("rms_norm output has unit root mean square for unit gain") {
  Tensor x({4}, {1, -2, 3, 0.5f});
  const Tensor y = rms_norm(x, Tensor::filled({4}, 1.0f), 0.0f);
  double ss = 0;
  for (float v : y.data()) ss += v * v;
  CHECK(std::sqrt(ss / 4) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("vec_stats mean and std along a direction") {
  std::vector<Tensor> rows = {Tensor({2}, {1, 0}), Tensor({2}, {3, 0}), Tensor({2}, {5, 2})};
  const auto st = vec_stats(rows);
  CHECK(st.count() == 3);
  CHECK(st.mean()[0] == doctest::Approx(3.0));
  CHECK(st.mean()[1] == doctest::Approx(2.0 / 3.0));
  const std::vector<float> dir = {2.0f, 0.0f};
  // projections 1, 3, 5 -> population std sqrt(8/3)
  CHECK(st.std_along(dir) == doctest::Approx(std::sqrt(8.0 / 3.0)));
  CHECK_THROWS_AS(vec_stats(std::vector<Tensor>{}), EmptyDataError);
  const std::vector<float> zero = {0.0f, 0.0f};
  CHECK_THROWS_AS(st.std_along(zero), DimensionError);
}
