#include <benchmark/benchmark.h>

#include <numeric>

#include "deephash/hashloss.hpp"
#include "deephash/rng.hpp"
#include "deephash/supervision.hpp"

namespace {

using namespace deephash;

Tensor gaussian(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.normal();
  return t;
}

// Full pairwise batch loss and gradients: batch size x K, dim(z) = 500.
void BM_AccumulateBatch(benchmark::State& state) {
  Rng rng(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto bits = static_cast<std::size_t>(state.range(1));
  const Tensor z = gaussian({n, 500}, rng);
  const Tensor w = gaussian({bits, 500}, rng);
  std::vector<std::int32_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<std::int32_t>(rng.uniform_int(0, 9));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto pairs = SimilarityOracle(labels).batch_pairs(idx);
  const auto codes = compute_codes(z, w);
  for (auto _ : state) benchmark::DoNotOptimize(accumulate_batch(pairs, z, codes, w));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pairs.size()));
}
BENCHMARK(BM_AccumulateBatch)
    ->Args({100, 12})
    ->Args({100, 24})
    ->Args({100, 48})
    ->Args({200, 24})
    ->Unit(benchmark::kMillisecond);

void BM_PairGradients(benchmark::State& state) {
  Rng rng(2);
  const Tensor z = gaussian({2, 500}, rng);
  const Tensor w = gaussian({24, 500}, rng);
  const auto codes = compute_codes(z, w);
  for (auto _ : state)
    benchmark::DoNotOptimize(pair_gradients(z.slice(0), z.slice(1), codes[0], codes[1], 1, w));
}
BENCHMARK(BM_PairGradients);

}  // namespace

BENCHMARK_MAIN();
