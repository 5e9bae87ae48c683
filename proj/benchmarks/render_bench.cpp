#include <benchmark/benchmark.h>

#include "splatprune/loss.hpp"
#include "splatprune/pruning.hpp"
#include "splatprune/renderer.hpp"
#include "splatprune/synthetic.hpp"

using namespace splatprune;

namespace {

SyntheticScene bench_scene(int n) {
  SyntheticConfig sc;
  sc.n_gaussians = n;
  sc.n_views = 2;
  return make_synthetic(sc);
}

void BM_RenderForward(benchmark::State& state) {
  const auto s = bench_scene(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto out = rasterize(s.scene, s.views[0].camera, {0, 0, 0});
    benchmark::DoNotOptimize(out.image.data.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_RenderBackward(benchmark::State& state) {
  const auto s = bench_scene(static_cast<int>(state.range(0)));
  const View& v = s.views[0];
  const auto out = rasterize(s.scene, v.camera, {0, 0, 0});
  const Image grad = training_loss(out.image, s.views[1].image).grad;
  for (auto _ : state) {
    auto g = rasterize_backward(s.scene, v.camera, out, grad);
    benchmark::DoNotOptimize(g.values.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_TrainingLoss(benchmark::State& state) {
  const auto s = bench_scene(500);
  const auto out = rasterize(s.scene, s.views[0].camera, {0, 0, 0});
  for (auto _ : state) {
    auto l = training_loss(out.image, s.views[1].image);
    benchmark::DoNotOptimize(l.value);
  }
}

void BM_PruneMask(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> a(n), g(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = double((i * 7919) % n) / double(n);
    g[i] = double((i * 104729) % n) / double(n);
  }
  for (auto _ : state) {
    auto m = prune_mask(a, g, 0.067, PruneCriterion::GradientAware);
    benchmark::DoNotOptimize(m.keep.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_RenderForward)->Arg(500)->Arg(1000)->Arg(2000)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RenderBackward)->Arg(500)->Arg(1000)->Arg(2000)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainingLoss)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PruneMask)->Arg(1000)->Arg(100000)->Arg(1000000);

BENCHMARK_MAIN();
