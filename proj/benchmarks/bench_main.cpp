#include <expreuse/battery.hpp>
#include <expreuse/pareto.hpp>
#include <expreuse/reuse.hpp>
#include <expreuse/store.hpp>
#include <expreuse/train.hpp>

#include <benchmark/benchmark.h>

#include <random>

using namespace expreuse;

static void BM_ParetoFront(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<Objective> pts(static_cast<std::size_t>(state.range(0)));
  for (auto& p : pts) {
    p.cost = u(rng);
    p.gain = p.cost + 0.1 * u(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(pareto_front(pts));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ParetoFront)->RangeMultiplier(10)->Range(100, 100000)->Complexity(benchmark::oNLogN);

static void BM_SimulateBattery(benchmark::State& state) {
  const auto cycle = battery::DriveCycle::standard();
  for (auto _ : state) benchmark::DoNotOptimize(battery::simulate_battery({300, 700, 0.2}, cycle));
}
BENCHMARK(BM_SimulateBattery);

static void BM_SimulateTrain(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(train::simulate_trace({500, 1, 120, 0.2, 0}));
}
BENCHMARK(BM_SimulateTrain);

// User-layer lookup cost as the store fills with non-matching answers.
static void BM_UserLookup(benchmark::State& state) {
  LanguageRegistry reg;
  train::register_train(reg);
  ExperimentStore store(reg);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> m(100, 20000), dist(200, 2000);
  for (int i = 0; i < state.range(0); ++i)
    store.add_Q(train::eng_query({m(rng), 1, 100, 0.2, 0}, dist(rng)), true);
  ReuseEngine engine(reg, &store);
  const auto q = train::eng_query({99999, 2.4, 500, 0.9, 20}, 300);
  for (auto _ : state) benchmark::DoNotOptimize(engine.reuse_user(q));
}
BENCHMARK(BM_UserLookup)->RangeMultiplier(10)->Range(10, 10000);

BENCHMARK_MAIN();
