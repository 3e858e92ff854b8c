// Parallel kernels against their serial references.
//
//   OMP_NUM_THREADS=4 ./build/bench/rbl_bench

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "rbl/lfdr.hpp"
#include "rbl/model_core.hpp"
#include "rbl/sim.hpp"

namespace {

std::vector<double> sample_h(std::size_t m) {
  rbl::SimConfig cfg;
  cfg.m = m;
  auto rng = rbl::replication_rng(1, 0);
  const auto stats = rbl::standardize_all(rbl::generate_cohort(cfg, rng).records);
  std::vector<double> h;
  for (const auto& s : stats) h.push_back(s.h);
  return h;
}

std::vector<rbl::ExperimentRecord> sample_records(std::size_t m) {
  rbl::SimConfig cfg;
  cfg.m = m;
  auto rng = rbl::replication_rng(2, 0);
  return rbl::generate_cohort(cfg, rng).records;
}

template <bool Parallel>
void BM_KdeFixed(benchmark::State& state) {
  const auto h = sample_h(static_cast<std::size_t>(state.range(0)));
  std::vector<double> out(2048);
  for (auto _ : state) {
    if constexpr (Parallel) {
      rbl::kernels::kde_on_grid(h, 0.2, -10.0, 20.0 / 2047.0, out);
    } else {
      rbl::serial::kernels::kde_on_grid(h, 0.2, -10.0, 20.0 / 2047.0, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_KdeAdaptive(benchmark::State& state) {
  const auto h = sample_h(static_cast<std::size_t>(state.range(0)));
  std::vector<double> bw(h.size());
  for (std::size_t i = 0; i < bw.size(); ++i) bw[i] = 0.15 + 0.002 * static_cast<double>(i % 100);
  std::vector<double> out(2048);
  for (auto _ : state) {
    if constexpr (Parallel) {
      rbl::kernels::kde_on_grid(h, bw, -10.0, 20.0 / 2047.0, out);
    } else {
      rbl::serial::kernels::kde_on_grid(h, bw, -10.0, 20.0 / 2047.0, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_StandardizeAll(benchmark::State& state) {
  const auto recs = sample_records(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    auto s = Parallel ? rbl::standardize_all(recs) : rbl::serial::standardize_all(recs);
    benchmark::DoNotOptimize(s.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_RunStudy(benchmark::State& state) {
  rbl::SimConfig cfg;
  cfg.reps = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto r = Parallel ? rbl::run_study(cfg, rbl::kAllProcedures) : rbl::serial::run_study(cfg, rbl::kAllProcedures);
    benchmark::DoNotOptimize(r.summary.data());
  }
}

}  // namespace

BENCHMARK(BM_KdeFixed<false>)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KdeFixed<true>)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_KdeAdaptive<false>)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KdeAdaptive<true>)->Arg(2000)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_StandardizeAll<false>)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StandardizeAll<true>)->Arg(100000)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_RunStudy<false>)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RunStudy<true>)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
