#include <benchmark/benchmark.h>

#include "polos/head.hpp"
#include "polos/optim.hpp"
#include "polos/synthetic.hpp"

namespace {

polos::Bundle bundle_for(std::size_t count, polos::Dims dims, std::size_t refs) {
  polos::SynthSpec spec;
  spec.count = count;
  spec.dims = dims;
  spec.min_refs = refs;
  spec.max_refs = refs;
  return polos::make_synthetic_bundle(spec);
}

// Single-threaded scoring at the default head widths; arg = reference count.
void BM_ScoreBatch(benchmark::State& state) {
  const auto refs = static_cast<std::size_t>(state.range(0));
  const auto data = bundle_for(256, {512, 1024}, refs);
  const polos::HeadConfig head;
  const auto params = polos::init_params(head, data.dims);
  for (auto _ : state) {
    auto out = polos::score_batch(data.samples, params, head, 1);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * data.samples.size()));
}
BENCHMARK(BM_ScoreBatch)->Arg(1)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_BatchGradient(benchmark::State& state) {
  const auto data = bundle_for(64, {512, 1024}, 5);
  const polos::HeadConfig head;
  const auto params = polos::init_params(head, data.dims);
  std::vector<const polos::EmbeddingSample*> ptrs;
  std::vector<double> targets;
  for (const auto& s : data.samples) {
    ptrs.push_back(&s);
    targets.push_back(*s.score);
  }
  for (auto _ : state) {
    auto g = polos::batch_gradient(ptrs, targets, params, head);
    benchmark::DoNotOptimize(g.loss);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * ptrs.size()));
}
BENCHMARK(BM_BatchGradient)->Unit(benchmark::kMillisecond);

void BM_AdamStep(benchmark::State& state) {
  const polos::HeadConfig head;
  auto params = polos::init_params(head, {512, 1024});
  const auto grads = polos::init_params(head, {512, 1024});
  auto adam = polos::AdamState::for_params(params);
  const polos::TrainConfig tc;
  for (auto _ : state) polos::adam_step(params, grads, adam, tc);
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * params.parameter_count()));
}
BENCHMARK(BM_AdamStep)->Unit(benchmark::kMillisecond);

}  // namespace
