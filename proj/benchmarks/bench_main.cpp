#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "lazylp/agent.hpp"
#include "lazylp/qvi.hpp"
#include "lazylp/regime.hpp"
#include "lazylp/synthpath.hpp"

using namespace lazylp;

namespace {

std::vector<Transition> random_batch(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0, 0.01);
  std::vector<Transition> batch(n);
  for (auto& t : batch) {
    t.state.delta_p = z(rng);
    t.state.d_edge = std::clamp(z(rng) * 100, -1.0, 1.0);
    t.state.theta = std::abs(z(rng));
    t.next_state = t.state;
    t.next_state.delta_p += z(rng);
    t.action = static_cast<int>(rng() % 2);
    t.reward = z(rng);
  }
  return batch;
}

void BM_TrainStep(benchmark::State& state) {
  TrainConfig cfg;
  cfg.batch_size = static_cast<std::size_t>(state.range(0));
  DqnAgent agent(cfg);
  const auto batch = random_batch(cfg.batch_size, 1);
  for (auto _ : state) benchmark::DoNotOptimize(agent.train_step(batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainStep)->Arg(32)->Arg(128);

void BM_GreedyAction(benchmark::State& state) {
  const Mlp net({8, 128, 64, 2}, 1);
  std::mt19937_64 rng(0);
  const AgentState s = random_batch(1, 2)[0].state;
  for (auto _ : state) benchmark::DoNotOptimize(select_action(net, s, 0.0, rng));
}
BENCHMARK(BM_GreedyAction);

void BM_RollingEstimator(benchmark::State& state) {
  const auto path = simulate_ou({0.01, 100, 0.1}, 100, 100'000, 1.0, 3);
  for (auto _ : state) {
    RollingOuEstimator est(static_cast<std::size_t>(state.range(0)));
    for (double p : path) benchmark::DoNotOptimize(est.push(p));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(path.size()));
}
BENCHMARK(BM_RollingEstimator)->Arg(300)->Arg(1800);

void BM_QviSolve(benchmark::State& state) {
  const double fee = reference_fee_rate(PoolConfig{}, kDefaultCapital, 10'000);
  const auto n_s = static_cast<std::size_t>(state.range(0));
  const auto problem = make_qvi_problem({0.05, 100, 0.5}, 1e-4, fee, 0.002, 4.5, n_s, n_s / 4 + 1);
  for (auto _ : state) benchmark::DoNotOptimize(solve_qvi(problem).iterations);
}
BENCHMARK(BM_QviSolve)->Arg(201)->Arg(401)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
