#include <benchmark/benchmark.h>

#include "deephash/netconfig.hpp"
#include "deephash/network.hpp"

namespace {

using namespace deephash;

Tensor random_batch(std::size_t n, const Shape& sample, Rng& rng) {
  Shape shape{n};
  shape.insert(shape.end(), sample.begin(), sample.end());
  Tensor x(shape);
  for (auto& v : x.values()) v = rng.uniform();
  return x;
}

void BM_MnistForward(benchmark::State& state) {
  Rng rng(1);
  const Network net = Network::build(mnist_net_config(24), rng);
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_batch(n, net.input_shape(), rng);
  for (auto _ : state) benchmark::DoNotOptimize(forward(net, x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MnistForward)->Arg(1)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_MnistForwardBackward(benchmark::State& state) {
  Rng rng(2);
  const Network net = Network::build(mnist_net_config(24), rng);
  const Tensor x = random_batch(100, net.input_shape(), rng);
  Tensor grad_z({100, net.feature_dim()});
  for (auto& v : grad_z.values()) v = rng.normal();
  for (auto _ : state) {
    const auto acts = forward(net, x);
    benchmark::DoNotOptimize(backward(net, acts, grad_z));
  }
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_MnistForwardBackward)->Unit(benchmark::kMillisecond);

void BM_CifarForward(benchmark::State& state) {
  Rng rng(3);
  const Network net = Network::build(cifar_net_config(24), rng);
  const Tensor x = random_batch(100, net.input_shape(), rng);
  for (auto _ : state) benchmark::DoNotOptimize(forward(net, x));
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_CifarForward)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
