// Serial vs OpenMP paths for the hot kernels. Arg 0 = serial, 1 = parallel.

#include <benchmark/benchmark.h>

#include "vlscene/evaluate.hpp"
#include "vlscene/fusion.hpp"
#include "vlscene/rng.hpp"
#include "vlscene/scenegen.hpp"

using namespace vlscene;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::Parallel : Exec::Serial; }

std::vector<Embedding> unit_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Embedding> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(d);
    for (double& x : v) x = rng.gaussian();
    out.push_back(l2_normalize(Embedding(v)));
  }
  return out;
}

void BM_PairwiseSim(benchmark::State& state) {
  const auto left = unit_rows(256, 64, 1);
  const auto right = unit_rows(256, 64, 2);
  for (auto _ : state) benchmark::DoNotOptimize(pairwise_sim(left, right, exec_of(state)));
}

void BM_CrossAttention(benchmark::State& state) {
  const auto objects = unit_rows(128, 64, 3);
  const auto tokens = unit_rows(64, 64, 4);
  const auto params = AttentionParams::calibrated(64, 0.07);
  for (auto _ : state) benchmark::DoNotOptimize(cross_attention(params, objects, tokens, exec_of(state)));
}

void BM_RunScenes(benchmark::State& state) {
  GenConfig g;
  g.scenes = 500;
  const auto ds = gen_dataset(g);
  for (auto _ : state) benchmark::DoNotOptimize(run_scenes(ds, ReasonConfig{}, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(ds.scenes.size()));
}

}  // namespace

BENCHMARK(BM_PairwiseSim)->Arg(0)->Arg(1);
BENCHMARK(BM_CrossAttention)->Arg(0)->Arg(1);
BENCHMARK(BM_RunScenes)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
