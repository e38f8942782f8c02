#include <benchmark/benchmark.h>

#include <vector>

#include "towerlab/chain.hpp"
#include "towerlab/maps.hpp"
#include "towerlab/observables.hpp"
#include "towerlab/reference.hpp"
#include "towerlab/rng.hpp"
#include "towerlab/stats.hpp"
#include "towerlab/tower.hpp"

using namespace towerlab;

namespace {

const TowerSpec& power_tower() {
  static const TowerSpec spec = build_tower_from_model(PowerTail{3.0, 0.0}, 10000, 0.5);
  return spec;
}

std::vector<double> observable_series(std::uint64_t n) {
  const TowerSpec& s = power_tower();
  const auto o = obs::ObservableSpec::geometric(s, obs::short_block_contrast(s)).normalized();
  return obs::psi_series(o, chain::simulate(s, n, InnovationStream(3, 0)));
}

void BM_MeetingTail(benchmark::State& state) {
  const auto runs = static_cast<std::uint64_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(chain::meeting_tail_experiment(power_tower(), runs, 2048, 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MeetingTail)->Arg(100000);

void BM_MeetingTailReference(benchmark::State& state) {
  const auto runs = static_cast<std::uint64_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(reference::meeting_tail(power_tower(), runs, 2048, 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MeetingTailReference)->Arg(100000);

void BM_Autocovariance(benchmark::State& state) {
  const auto x = observable_series(100000);
  for (auto _ : state) benchmark::DoNotOptimize(stats::autocovariance(x, 200));
}
BENCHMARK(BM_Autocovariance);

void BM_AutocovarianceReference(benchmark::State& state) {
  const auto x = observable_series(100000);
  for (auto _ : state) benchmark::DoNotOptimize(reference::autocovariance(x, 200));
}
BENCHMARK(BM_AutocovarianceReference);

void BM_ReturnTail(benchmark::State& state) {
  maps::ReturnTailConfig c;
  c.samples = static_cast<std::uint64_t>(state.range(0));
  c.burn_in = 1000;
  const maps::LsvParams p{0.5};
  for (auto _ : state) benchmark::DoNotOptimize(maps::sample_return_tail(p, c));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ReturnTail)->Arg(1000000);

void BM_ReturnTailReference(benchmark::State& state) {
  maps::ReturnTailConfig c;
  c.samples = static_cast<std::uint64_t>(state.range(0));
  c.burn_in = 1000;
  const maps::LsvParams p{0.5};
  for (auto _ : state) benchmark::DoNotOptimize(reference::sample_return_tail(p, c));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ReturnTailReference)->Arg(1000000);

obs::DecayConfig decay_config() {
  obs::DecayConfig c;
  c.samples = 2000;
  c.meeting_runs = 10000;
  return c;
}

void BM_Decay(benchmark::State& state) {
  const TowerSpec& s = power_tower();
  const auto o = obs::ObservableSpec::geometric(s, obs::short_block_contrast(s)).normalized();
  for (auto _ : state) benchmark::DoNotOptimize(obs::approx_decay_experiment(o, s, decay_config()));
}
BENCHMARK(BM_Decay)->Unit(benchmark::kMillisecond);

void BM_DecayReference(benchmark::State& state) {
  const TowerSpec& s = power_tower();
  const auto o = obs::ObservableSpec::geometric(s, obs::short_block_contrast(s)).normalized();
  for (auto _ : state) benchmark::DoNotOptimize(reference::decay_samples(o, s, decay_config()));
}
BENCHMARK(BM_DecayReference)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
