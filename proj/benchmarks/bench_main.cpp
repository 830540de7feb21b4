#include <benchmark/benchmark.h>

#include <numbers>
#include <vector>

#include "qrljo/jointree.hpp"
#include "qrljo/model.hpp"
#include "qrljo/nn.hpp"
#include "qrljo/qsim.hpp"

using namespace qrljo;

namespace {

struct VqcFixture {
  CircuitSpec spec;
  std::vector<double> inputs, params;
  explicit VqcFixture(std::size_t n_max) : spec(build_vqc(VqcShape{n_max, true, 5, 0})) {
    Rng rng(1);
    inputs.resize(spec.input_count());
    params.resize(spec.param_count());
    for (auto& x : inputs) x = rng.uniform();
    for (auto& x : params) x = rng.uniform(0.0, 2 * std::numbers::pi);
  }
};

void BM_Simulate(benchmark::State& state) {
  VqcFixture f(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(simulate(f.spec, f.inputs, f.params));
}
BENCHMARK(BM_Simulate)->Arg(2)->Arg(3)->Arg(4);

void BM_AdjointGradient(benchmark::State& state) {
  VqcFixture f(static_cast<std::size_t>(state.range(0)));
  const auto obs = Observable::parity();
  for (auto _ : state) benchmark::DoNotOptimize(gradients_adjoint(f.spec, f.inputs, f.params, obs));
}
BENCHMARK(BM_AdjointGradient)->Arg(2)->Arg(3)->Arg(4);

void BM_ParameterShiftGradient(benchmark::State& state) {
  VqcFixture f(static_cast<std::size_t>(state.range(0)));
  const auto obs = Observable::parity();
  for (auto _ : state) benchmark::DoNotOptimize(gradients_parameter_shift(f.spec, f.inputs, f.params, obs));
}
BENCHMARK(BM_ParameterShiftGradient)->Arg(2)->Arg(3);

void BM_NoisyTrajectories(benchmark::State& state) {
  VqcFixture f(3);
  Rng rng(2);
  for (auto _ : state)
    benchmark::DoNotOptimize(simulate_noisy(f.spec, f.inputs, f.params, NoiseSpec{0.02, 32}, rng));
}
BENCHMARK(BM_NoisyTrajectories);

void BM_AdamStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> p(n, 0.1), g(n, 1e-3);
  Adam adam(n, AdamOptions{});
  for (auto _ : state) {
    adam.step(p, g);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_AdamStep)->Arg(200)->Arg(23710)->Arg(45197);

void BM_DpOptimal(benchmark::State& state) {
  const auto catalog = generate_catalog(3, 20, 4);
  const auto q = generate_query(4, catalog, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(dp_optimal(q, catalog));
}
BENCHMARK(BM_DpOptimal)->Arg(4)->Arg(8)->Arg(12);

}  // namespace
BENCHMARK_MAIN();
