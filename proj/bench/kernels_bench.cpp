#include <benchmark/benchmark.h>

#include "dualpf/benchmark_models.hpp"
#include "dualpf/kernels.hpp"
#include "dualpf/tan_model.hpp"
#include "dualpf/terrain.hpp"

using namespace dualpf;

namespace {

const TanModel& tan() {
  static const TanModel m = build_tan_model(
      std::make_shared<TerrainMap>(make_two_hill_terrain(TerrainFootprint{}, TwoHillSpec{})), TanParams{});
  return m;
}

Matrix cloud(const ModelSpec& spec, Eigen::Index n) {
  Matrix x(spec.state_dim, n);
  kernels::sample_initial_parallel(spec, 11, x);
  return x;
}

template <bool Parallel>
void BM_Propagate(benchmark::State& state) {
  const ModelSpec& spec = tan().spec;
  const Matrix from = cloud(spec, state.range(0));
  Matrix out(from.rows(), from.cols());
  const Vector u = spec.zero_control();
  std::uint64_t seed = 1;
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::propagate_parallel(spec, from, u, seed++, out);
    else
      kernels::propagate_serial(spec, from, u, seed++, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_Likelihoods(benchmark::State& state) {
  const ModelSpec& spec = tan().spec;
  const Matrix x = cloud(spec, state.range(0));
  Vector y(spec.obs_dim);
  spec.observation_mean(x.col(0), y);
  Vector w;
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::likelihoods_parallel(spec, x, y, w);
    else
      kernels::likelihoods_serial(spec, x, y, w);
    benchmark::DoNotOptimize(w.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_GridTransition(benchmark::State& state) {
  const ModelSpec spec = make_linear_gaussian_1d({});
  const Eigen::Index n = state.range(0);
  Matrix nodes(1, n);
  for (Eigen::Index i = 0; i < n; ++i) nodes(0, i) = -10.0 + 20.0 * static_cast<double>(i) / static_cast<double>(n - 1);
  const Vector w = Vector::Constant(n, 1.0 / static_cast<double>(n));
  const Vector u = spec.zero_control();
  Vector out;
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::grid_transition_parallel(spec, nodes, w, nodes, u, out);
    else
      kernels::grid_transition_serial(spec, nodes, w, nodes, u, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * n * n);
}

}  // namespace

BENCHMARK(BM_Propagate<false>)->Name("propagate/serial")->Arg(1 << 12)->Arg(1 << 16);
BENCHMARK(BM_Propagate<true>)->Name("propagate/openmp")->Arg(1 << 12)->Arg(1 << 16)->UseRealTime();
BENCHMARK(BM_Likelihoods<false>)->Name("likelihoods/serial")->Arg(1 << 12)->Arg(1 << 16);
BENCHMARK(BM_Likelihoods<true>)->Name("likelihoods/openmp")->Arg(1 << 12)->Arg(1 << 16)->UseRealTime();
BENCHMARK(BM_GridTransition<false>)->Name("grid_transition/serial")->Arg(401)->Arg(1601);
BENCHMARK(BM_GridTransition<true>)->Name("grid_transition/openmp")->Arg(401)->Arg(1601)->UseRealTime();

BENCHMARK_MAIN();
