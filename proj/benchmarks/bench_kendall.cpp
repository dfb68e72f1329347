#include <benchmark/benchmark.h>

#include "polos/kendall.hpp"
#include "polos/rng.hpp"

namespace {

std::vector<polos::ScoredPair> dataset(std::size_t n, std::uint64_t levels) {
  polos::Rng rng(1);
  std::vector<polos::ScoredPair> out(n);
  for (auto& p : out) {
    p.metric_score = rng.uniform();
    p.human_score = static_cast<double>(rng.below(levels));
  }
  return out;
}

// Human axis on a five-level scale, as with normalized ratings.
void BM_TauC(benchmark::State& state) {
  const auto data = dataset(static_cast<std::size_t>(state.range(0)), 5);
  for (auto _ : state) benchmark::DoNotOptimize(polos::kendall_tau_c(data));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_TauC)->RangeMultiplier(8)->Range(64, 1 << 18)->Complexity(benchmark::oNLogN);

void BM_TauB(benchmark::State& state) {
  const auto data = dataset(static_cast<std::size_t>(state.range(0)), 1000);
  for (auto _ : state) benchmark::DoNotOptimize(polos::kendall_tau_b(data));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_TauB)->RangeMultiplier(8)->Range(64, 1 << 18)->Complexity(benchmark::oNLogN);

}  // namespace
