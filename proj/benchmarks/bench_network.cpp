#include <benchmark/benchmark.h>

#include <vector>

#include "deepsom/aplearn.hpp"
#include "deepsom/random.hpp"
#include "deepsom/topology.hpp"

namespace {

using namespace deepsom;

std::vector<double> random_image(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> img(28 * 28);
  for (auto& p : img) p = rng.uniform01() < 0.2 ? rng.uniform01() : 0.0;
  return img;
}

const Network& mnist_network() {
  static const Network net = build_network({28, 28}, mnist_layer_specs(), 7);
  return net;
}

void BM_InnerProducts(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  SomGrid grid({10, 10}, dim);
  grid.randomize(3);
  std::vector<double> input(dim, 0.01);
  std::vector<double> out(100);
  for (auto _ : state) {
    inner_products(grid, input, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 100 * dim));
}
BENCHMARK(BM_InnerProducts)->Arg(36)->Arg(900)->Arg(2500);

void BM_CompetitiveUpdate(benchmark::State& state) {
  SomGrid grid({10, 10}, 2500);
  grid.randomize(5);
  std::vector<double> input(2500, 0.02);
  const double sigma = static_cast<double>(state.range(0)) / 10.0;
  for (auto _ : state) {
    competitive_update(grid, 44, input, 0.1, sigma);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_CompetitiveUpdate)->Arg(4)->Arg(35);

void BM_ForwardMnist(benchmark::State& state) {
  const auto& net = mnist_network();
  const auto img = random_image(11);
  const KernelParams kernels;
  for (auto _ : state) {
    auto s = forward(net, img, kernels);
    benchmark::DoNotOptimize(s.layers.back().modules.front().winner);
  }
}
BENCHMARK(BM_ForwardMnist)->Unit(benchmark::kMillisecond);

void BM_ForwardBatchMnist(benchmark::State& state) {
  const auto& net = mnist_network();
  std::vector<std::vector<double>> imgs;
  for (std::uint64_t i = 0; i < kForwardBatch; ++i) imgs.push_back(random_image(100 + i));
  std::vector<std::span<const double>> views(imgs.begin(), imgs.end());
  const KernelParams kernels;
  for (auto _ : state) {
    auto s = forward_batch(net, views, kernels);
    benchmark::DoNotOptimize(s.back().layers.back().modules.front().winner);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * kForwardBatch));
}
BENCHMARK(BM_ForwardBatchMnist)->Unit(benchmark::kMillisecond);

void BM_ApUpdateMnist(benchmark::State& state) {
  Network net = build_network({28, 28}, mnist_layer_specs(), 9);
  const auto img = random_image(13);
  const KernelParams kernels;
  const ApParams params;
  const auto s = forward(net, img, kernels);
  for (auto _ : state) {
    ap_update(net, s, params, kernels);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_ApUpdateMnist)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
