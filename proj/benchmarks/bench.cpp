#include <benchmark/benchmark.h>

#include "gir/data.hpp"
#include "gir/guided_filter.hpp"
#include "gir/network.hpp"
#include "gir/ops.hpp"
#include "gir/tensor.hpp"

namespace {

gir::Tensor random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  gir::Rng rng(seed);
  gir::Tensor t({h, w});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform();
  return t;
}

void BM_GuidedFilterFast(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  gir::Tensor I = random_image(n, n, 1);
  gir::Tensor P = random_image(n, n, 2);
  gir::GuidedFilterConfig cfg{4, 1e-4};
  for (auto _ : state)
    benchmark::DoNotOptimize(gir::guided_filter(I, P, cfg).Q);
}
BENCHMARK(BM_GuidedFilterFast)->Arg(64)->Arg(256)->Arg(512);

void BM_GuidedFilterNaive(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  gir::Tensor I = random_image(n, n, 1);
  gir::Tensor P = random_image(n, n, 2);
  gir::GuidedFilterConfig cfg{4, 1e-4};
  for (auto _ : state)
    benchmark::DoNotOptimize(gir::naive_guided_filter(I, P, cfg).Q);
}
BENCHMARK(BM_GuidedFilterNaive)->Arg(64)->Arg(128);

void BM_NetworkForward(benchmark::State& state) {
  gir::SFIGFConfig cfg;
  cfg.base_channels = 4;
  cfg.num_scales = 2;
  cfg.window = 7;
  gir::SFIGFNet net(cfg);
  gir::Rng rng(3);
  gir::Tensor I({3, 32, 32}), P({1, 32, 32});
  for (std::size_t i = 0; i < I.size(); ++i) I[i] = rng.uniform();
  for (std::size_t i = 0; i < P.size(); ++i) P[i] = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(I, P).Q_Out);
}
BENCHMARK(BM_NetworkForward);

void BM_BicubicResize(benchmark::State& state) {
  gir::Tensor img = random_image(256, 256, 5);
  for (auto _ : state)
    benchmark::DoNotOptimize(gir::bicubic_resize(img, 0.25));
}
BENCHMARK(BM_BicubicResize);

}  // namespace

BENCHMARK_MAIN();
