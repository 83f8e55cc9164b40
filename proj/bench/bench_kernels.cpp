#include <benchmark/benchmark.h>

#include "saddlelab/app.hpp"
#include "saddlelab/conditions.hpp"
#include "saddlelab/dynamics.hpp"

using namespace saddlelab;

namespace {

execution mode(const benchmark::State& s) { return s.range(0) == 0 ? execution::serial : execution::parallel; }

SGDConfig escape_config() {
  return sgd_from(ExperimentConfig::parse("schedule.c = 0.05\nschedule.alpha = 0.7\nsgd.x0 = 0,0.3\n"
                                          "sgd.horizon = 20000\nsgd.radius = 0.5\n"));
}

void monte_carlo_escape(benchmark::State& state) {
  const SGDConfig cfg = escape_config();
  for (auto _ : state) benchmark::DoNotOptimize(monte_carlo(cfg, 32, mode(state)).fraction_escaped);
}

void verdier_estimate(benchmark::State& state) {
  const Problem p = builtin("saddle_abs");
  for (auto _ : state)
    benchmark::DoNotOptimize(
        estimate_verdier_constant(p.f, p.manifold, p.critical_point, 0.1, 10000, 1, mode(state)).estimate);
}

void drift_grid(benchmark::State& state) {
  const Problem p = builtin("saddle_abs");
  std::vector<Vector> grid;
  for (double z : {0.01, 0.055, 0.1}) grid.push_back(p.critical_point + z * Vector::Unit(2, 1));
  drift_options o;
  o.n_mc = 2000;
  o.exec = mode(state);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        drift_probe(p.f, p.manifold, grid, {1e-2, 1e-3}, NoiseModel::sphere_uniform(0.5), o).fitted_c);
}

void nonconvergence(benchmark::State& state) {
  const ExperimentConfig cfg = ExperimentConfig::parse("centerstable.horizon = 5000\n");
  const ConstructedSystem sys = system_from(cfg);
  const AbstractConfig ac = abstract_from(cfg, sys);
  for (auto _ : state)
    benchmark::DoNotOptimize(nonconvergence_experiment(sys, ac, 0, 32, 0.1, mode(state)).p_converges);
}

}  // namespace

// Argument 0 is the serial reference, 1 the OpenMP path.
BENCHMARK(monte_carlo_escape)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(verdier_estimate)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(drift_grid)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(nonconvergence)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
