#include <benchmark/benchmark.h>

#include "malfuse/fusion.hpp"
#include "malfuse/gbdt.hpp"
#include "malfuse/metrics.hpp"
#include "malfuse/pipeline.hpp"
#include "malfuse/random.hpp"
#include "malfuse/synthgen.hpp"

namespace {

using namespace malfuse;

const pipeline::PreparedDomain& prepared(std::size_t n_samples, std::size_t n_features) {
  static std::map<std::pair<std::size_t, std::size_t>, pipeline::PreparedDomain> cache;
  const auto key = std::make_pair(n_samples, n_features);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  synthgen::DomainSpec spec{"bench", n_samples, n_features, n_features / 10 + 1, 1.0, 0.02, 0.0, 42};
  return cache.emplace(key, pipeline::prepare_domain(synthgen::gen_domain(spec), 0.8, 42))
      .first->second;
}

void BM_GbdtTrain(benchmark::State& state) {
  const auto& d = prepared(static_cast<std::size_t>(state.range(0)),
                           static_cast<std::size_t>(state.range(1)));
  gbdt::GbdtConfig config;
  config.n_estimators = 50;
  config.early_stopping_rounds = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(gbdt::train(d.train, d.valid, config));
  }
}
BENCHMARK(BM_GbdtTrain)->Args({1600, 60})->Args({6400, 240})->Unit(benchmark::kMillisecond);

void BM_GbdtPredict(benchmark::State& state) {
  const auto& d = prepared(6400, 240);
  gbdt::GbdtConfig config;
  config.n_estimators = 100;
  config.early_stopping_rounds = 0;
  const auto model = gbdt::train(d.train, d.valid, config).ensemble;
  for (auto _ : state) {
    benchmark::DoNotOptimize(gbdt::predict_proba(model, d.valid));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d.valid.n_rows()));
}
BENCHMARK(BM_GbdtPredict)->Unit(benchmark::kMillisecond);

fusion::FusionValidationSet random_set(std::size_t n) {
  Xoshiro256 rng(1);
  fusion::FusionValidationSet set;
  set.domains = {"a", "b", "c"};
  for (std::size_t r = 0; r < n; ++r) {
    set.labels.push_back(static_cast<std::uint8_t>(rng.below(2)));
    set.origin.push_back(static_cast<std::uint32_t>(rng.below(3)));
    for (int m = 0; m < 3; ++m) set.probs.push_back(rng.uniform_open());
  }
  return set;
}

void BM_GridSearch(benchmark::State& state) {
  const auto set = random_set(static_cast<std::size_t>(state.range(0)));
  const double step = 1.0 / static_cast<double>(state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(fusion::grid_search(set, step));
  }
}
BENCHMARK(BM_GridSearch)->Args({2480, 10})->Args({2480, 20})->Unit(benchmark::kMillisecond);

void BM_EnumerateSimplex(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(fusion::enumerate_simplex(3, 0.1));
  }
}
BENCHMARK(BM_EnumerateSimplex);

void BM_Evaluate(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Xoshiro256 rng(2);
  std::vector<std::uint8_t> y(n);
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<std::uint8_t>(rng.below(2));
    p[i] = rng.uniform_open();
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(metrics::evaluate(y, p));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Evaluate)->Arg(1000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
