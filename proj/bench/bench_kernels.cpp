// Serial reference kernels against their OpenMP versions.
#include <benchmark/benchmark.h>

#include <random>

#include "sdde/approaches.hpp"
#include "sdde/library.hpp"
#include "sdde/models.hpp"
#include "sdde/neighbor_index.hpp"
#include "sdde/simulate.hpp"

using namespace sdde;

namespace {

const TimeGrid& grid()
{
   static const auto g = TimeGrid::from_window(0.0, 20.0, 0.01);
   return g;
}

const std::vector<Trajectory>& ensemble()
{
   static const auto e = simulate_ensemble(logistic_model(), grid(), 200, 3);
   return e;
}

template <bool Parallel>
void BM_simulate_ensemble(benchmark::State& state)
{
   const auto model = logistic_model();
   const auto M = static_cast<std::size_t>(state.range(0));
   for (auto _ : state) {
      auto e = Parallel ? simulate_ensemble(model, grid(), M, 1) : serial::simulate_ensemble(model, grid(), M, 1);
      benchmark::DoNotOptimize(e.data());
   }
   state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * M * grid().steps()));
}

template <bool Parallel>
void BM_evaluate_library(benchmark::State& state)
{
   const auto lib = polynomial_library(2, 3);
   std::mt19937_64 rng(1);
   std::normal_distribution<double> N;
   RowMatrix z(state.range(0), 4);
   for (Eigen::Index i = 0; i < z.rows(); ++i)
      for (Eigen::Index c = 0; c < 4; ++c) z(i, c) = N(rng);
   for (auto _ : state) {
      auto t = Parallel ? evaluate_library(lib, z) : serial::evaluate_library(lib, z);
      benchmark::DoNotOptimize(t.data());
   }
   state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_approach_b1(benchmark::State& state)
{
   const double eps = 1e-2;
   const auto n_train = static_cast<std::size_t>(1600);
   const auto index = build_index(ensemble(), 1.0, 2 * eps, n_train);
   const auto est = point_estimates(ensemble(), index, 1.0, EstimatorMethod::KM, n_train);
   std::vector<AugmentedSample> queries;
   std::vector<std::size_t> paths, steps;
   const auto z = augment(ensemble().front(), 1.0);
   for (std::size_t i = 0; i + 1 < n_train; ++i) {
      queries.push_back(z[i]);
      paths.push_back(0);
      steps.push_back(i);
   }
   for (auto _ : state) {
      auto s = Parallel ? approach_b1(index, est, queries, paths, steps, eps)
                        : serial::approach_b1(index, est, queries, paths, steps, eps);
      benchmark::DoNotOptimize(s.drift.data());
   }
   state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * queries.size()));
}

template <bool Parallel>
void BM_approach_a(benchmark::State& state)
{
   const auto model = logistic_model();
   const auto M = static_cast<std::size_t>(state.range(0));
   for (auto _ : state) {
      auto s = Parallel ? approach_a(model, ensemble().front(), M, 5, EstimatorMethod::FD, 1600)
                        : serial::approach_a(model, ensemble().front(), M, 5, EstimatorMethod::FD, 1600);
      benchmark::DoNotOptimize(s.drift.data());
   }
   state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * M * 1600));
}

} // namespace

BENCHMARK(BM_simulate_ensemble<false>)->Name("simulate_ensemble/serial")->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_simulate_ensemble<true>)->Name("simulate_ensemble/omp")->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_evaluate_library<false>)->Name("evaluate_library/serial")->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_evaluate_library<true>)->Name("evaluate_library/omp")->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_approach_b1<false>)->Name("approach_b1/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_approach_b1<true>)->Name("approach_b1/omp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_approach_a<false>)->Name("approach_a/serial")->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_approach_a<true>)->Name("approach_a/omp")->Arg(100)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
