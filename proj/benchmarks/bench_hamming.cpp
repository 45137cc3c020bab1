#include <benchmark/benchmark.h>

#include "deephash/evalrank.hpp"
#include "deephash/rng.hpp"

namespace {

using namespace deephash;

CodeDatabase random_db(std::size_t bits, std::size_t n, Rng& rng) {
  CodeDatabase db;
  db.bits = bits;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::int8_t> b(bits);
    for (auto& v : b) v = rng.uniform() < 0.5 ? -1 : 1;
    db.codes.emplace_back(std::move(b));
    db.labels.push_back(static_cast<std::int32_t>(i % 10));
  }
  return db;
}

void BM_HammingDistance(benchmark::State& state) {
  Rng rng(1);
  const auto db = random_db(static_cast<std::size_t>(state.range(0)), 2, rng);
  for (auto _ : state) benchmark::DoNotOptimize(hamming_distance(db.codes[0], db.codes[1]));
}
BENCHMARK(BM_HammingDistance)->Arg(12)->Arg(24)->Arg(48)->Arg(128);

// One query against the whole database, counting-sort ranking included.
void BM_RankDatabase(benchmark::State& state) {
  Rng rng(2);
  const auto db = random_db(24, static_cast<std::size_t>(state.range(0)), rng);
  const auto query = random_db(24, 1, rng);
  for (auto _ : state) benchmark::DoNotOptimize(rank_database(query.codes[0], 3, db));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RankDatabase)->Arg(1000)->Arg(10000)->Arg(60000);

void BM_MeanAveragePrecision(benchmark::State& state) {
  Rng rng(3);
  const auto db = random_db(static_cast<std::size_t>(state.range(0)), 10000, rng);
  const auto queries = random_db(static_cast<std::size_t>(state.range(0)), 100, rng);
  for (auto _ : state) benchmark::DoNotOptimize(mean_average_precision(queries, db));
}
BENCHMARK(BM_MeanAveragePrecision)->Arg(12)->Arg(48)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
