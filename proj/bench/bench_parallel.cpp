// Serial reference loops against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <vector>

#include "genpred/experiments.hpp"
#include "genpred/kernel.hpp"
#include "genpred/qnn.hpp"

using namespace genpred;

namespace {

Execution mode(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::serial : Execution::parallel;
}

void BM_LossAndGradient(benchmark::State& state) {
  RandomSource rng(1);
  const Dataset batch = experiments::draw_dgp(experiments::Dgp::heteroscedastic, 4096, rng);
  qnn::NetworkSpec spec;
  spec.input_dim = 1;
  spec.hidden = {64, 64};
  spec.grid = qnn::QuantileGrid::default_grid();
  const auto net = qnn::make_network(spec, 2);
  qnn::TrainingConfig cfg;
  cfg.execution = mode(state);
  for (auto _ : state) {
    benchmark::DoNotOptimize(qnn::loss_and_gradient(net, batch, spec.grid, cfg));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch.rows));
}

void BM_NadarayaWatson(benchmark::State& state) {
  RandomSource rng(3);
  const Dataset train = experiments::draw_dgp(experiments::Dgp::heteroscedastic, 2000, rng);
  std::vector<double> queries(2000);
  for (auto& q : queries) q = rng.uniform(-2.0, 2.0);
  const kernel::KernelConfig cfg{0.25, kernel::KernelForm::radial};
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernel::nw_predict(train, queries, cfg, mode(state)));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(queries.size()));
}

void BM_EfronEstimation(benchmark::State& state) {
  experiments::EfronConfig cfg;
  cfg.n = 1001;
  cfg.replications = 2000;
  cfg.execution = mode(state);
  for (auto _ : state) benchmark::DoNotOptimize(experiments::efron_estimation_ratio(cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cfg.replications));
}

void BM_CoverageBench(benchmark::State& state) {
  experiments::CoverageBenchConfig cfg;
  cfg.n_train = 500;
  cfg.n_cal = 250;
  cfg.n_test = 500;
  cfg.replications = 8;
  cfg.training.epochs = 10;
  cfg.execution = mode(state);
  for (auto _ : state) benchmark::DoNotOptimize(experiments::run_coverage_bench(cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cfg.replications));
}

}  // namespace

// Argument 0 runs the serial reference, 1 the OpenMP kernel.
BENCHMARK(BM_LossAndGradient)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_NadarayaWatson)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_EfronEstimation)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_CoverageBench)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
