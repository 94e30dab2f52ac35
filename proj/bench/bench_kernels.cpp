// Parallel kernels against their serial references.
//   ./bench_kernels --benchmark_filter=Profiles
#include <benchmark/benchmark.h>
#include <omp.h>

#include "lmdp/ftpedel.hpp"
#include "lmdp/instances.hpp"
#include "lmdp/visitation.hpp"

using namespace lmdp;

namespace {

const InstanceBundle& separation() {
  static const InstanceBundle b = gen_separation(0.05, 1);
  return b;
}

const PolicyClass& det_class() {
  static const PolicyClass c = enumerate_det_policies(separation().mdp);
  return c;
}

void BM_ProfilesParallel(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(exact_profiles(separation().mdp, det_class().members, true));
  st.SetItemsProcessed(st.iterations() * det_class().size());
}

void BM_ProfilesSerial(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(exact_profiles_serial(separation().mdp, det_class().members, true));
  st.SetItemsProcessed(st.iterations() * det_class().size());
}

void BM_MonteCarloParallel(benchmark::State& st) {
  const Policy& pi = *separation().logging;
  for (auto _ : st) benchmark::DoNotOptimize(monte_carlo_profile(separation().mdp, pi, st.range(0), 7));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_MonteCarloSerial(benchmark::State& st) {
  const Policy& pi = *separation().logging;
  for (auto _ : st) benchmark::DoNotOptimize(monte_carlo_profile_serial(separation().mdp, pi, st.range(0), 7));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

// FTPedel on the bandit over 8 seeds with range(0) worker threads.
void BM_SeedSweep(benchmark::State& st) {
  const InstanceBundle mab = gen_mab_verification(0.2, 4);
  const PolicyClass cls = enumerate_det_policies(mab.mdp);
  FtpedelOptions opts;
  opts.beta_scale = 0.01;
  const int workers = static_cast<int>(st.range(0));
  for (auto _ : st) {
    std::vector<std::int64_t> used(8);
#pragma omp parallel for num_threads(workers) schedule(dynamic, 1)
    for (int k = 0; k < 8; ++k) {
      Environment env(mab.mdp);
      Rng rng(k);
      used[k] = ftpedel(env, 0.2, 0.1, cls, {}, rng, opts).online_episodes;
    }
    benchmark::DoNotOptimize(used);
  }
}

}  // namespace

BENCHMARK(BM_ProfilesParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ProfilesSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MonteCarloParallel)->Arg(1 << 16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MonteCarloSerial)->Arg(1 << 16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SeedSweep)->DenseRange(1, 4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
