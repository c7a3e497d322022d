#include <benchmark/benchmark.h>

#include <numeric>
#include <random>
#include <set>

#include "steer/benchmark.hpp"
#include "steer/model.hpp"
#include "steer/runtime.hpp"
#include "steer/state/transforms.hpp"
#include "steer/tokenizer.hpp"

using namespace steer;

namespace {

const Model& shared_model() {
  static const Model m = init_random(ModelConfig{}, 1);
  return m;
}

TokenIds prompt_of(std::size_t n) {
  TokenIds ids = {kBos};
  for (std::size_t i = 1; i < n; ++i) ids.push_back(static_cast<TokenId>('a' + i % 26));
  return ids;
}

void BM_Forward(benchmark::State& state) {
  const TokenIds ids = prompt_of(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(forward(shared_model(), ids));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(16)->Arg(64)->Arg(256);

void BM_GreedyGenerate(benchmark::State& state) {
  const TokenIds ids = prompt_of(16);
  const GenParams gen(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(default_generate(shared_model(), ids, gen));
}
BENCHMARK(BM_GreedyGenerate)->Arg(8)->Arg(32);

void BM_ParetoFrontier(benchmark::State& state) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u;
  std::vector<std::pair<double, double>> pts(static_cast<std::size_t>(state.range(0)));
  for (auto& p : pts) p = {u(rng), u(rng)};
  for (auto _ : state) benchmark::DoNotOptimize(pareto_frontier(pts));
}
BENCHMARK(BM_ParetoFrontier)->Arg(50)->Arg(1000);

void BM_PastaRescale(benchmark::State& state) {
  const std::size_t heads = 8, n = static_cast<std::size_t>(state.range(0));
  Tensor attn({heads, n, n});
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j) attn[(h * n + i) * n + j] = 1.0f / static_cast<float>(i + 1);
  std::vector<std::size_t> selected(heads);
  std::iota(selected.begin(), selected.end(), std::size_t{0});
  std::set<std::size_t> span;
  for (std::size_t j = n / 4; j < n / 2; ++j) span.insert(j);
  for (auto _ : state) {
    Tensor a = attn;
    pasta_rescale(a, selected, span, 5.0f, ScalePosition::Include);
    benchmark::DoNotOptimize(a);
  }
}
BENCHMARK(BM_PastaRescale)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
