// Serial reference versus OpenMP kernels on simulated data.

#include "lateiv/kernels.hpp"
#include "lateiv/moment.hpp"
#include "lateiv/proposed.hpp"
#include "lateiv/simulation.hpp"

#include <benchmark/benchmark.h>

#include <map>

using namespace lateiv;

namespace {

struct Fixture {
  DgpSpec spec;
  Dataset data;
  ModelSet truth;
  Vector free;

  explicit Fixture(Index n) {
    spec.n = n;
    spec.seed = 11;
    data = generate_dataset(spec);
    truth = true_models(spec, data);
    free = truth.free_coefficients();
  }
};

const Fixture& fixture(Index n) {
  static std::map<Index, Fixture> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, Fixture(n)).first;
  return it->second;
}

void BM_NllRowByRow(benchmark::State& state) {
  const Fixture& f = fixture(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(joint_nll_reference(f.truth, f.data));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void nll_kernel(benchmark::State& state, Execution exec) {
  const Fixture& f = fixture(state.range(0));
  const JointLikelihood jl(f.truth, f.data);
  Vector g;
  for (auto _ : state) benchmark::DoNotOptimize(jl.value(f.free, &g, exec));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
void BM_NllSerial(benchmark::State& s) { nll_kernel(s, Execution::Serial); }
void BM_NllParallel(benchmark::State& s) { nll_kernel(s, Execution::Parallel); }

void moment_kernel(benchmark::State& state, Execution exec) {
  const Fixture& f = fixture(state.range(0));
  const DrMoment m = DrMoment::structural(f.data, f.data.select({"intercept", "x"}), f.spec.scale,
                                          true_structural(f.spec, f.data), true_instrument(f.spec, f.data),
                                          WeightMode::Optimal);
  for (auto _ : state) benchmark::DoNotOptimize(m.mean(f.spec.alpha, exec));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
void BM_MomentSerial(benchmark::State& s) { moment_kernel(s, Execution::Serial); }
void BM_MomentParallel(benchmark::State& s) { moment_kernel(s, Execution::Parallel); }

}  // namespace

BENCHMARK(BM_NllRowByRow)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NllSerial)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NllParallel)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MomentSerial)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MomentParallel)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
