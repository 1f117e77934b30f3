// OpenMP kernels against their serial references on the oracle-study lattice
// (r_in = 1, r_out = 4, h = 1/16). Arg 0 = parallel, 1 = serial.

#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "halfmass/elliptic.hpp"
#include "halfmass/grid.hpp"
#include "halfmass/sparse.hpp"

using namespace halfmass;

namespace {

Execution mode(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::Parallel : Execution::Serial;
}

const DiscreteOperator& fixture() {
  static const DiscreteOperator op = [] {
    auto grid = std::make_shared<const DiscreteHalfAnnulus>(1.0, 4.0, 1.0 / 16, 4);
    return assemble_operator(grid, flat_half_space(3), {}, {});
  }();
  return op;
}

void BM_Assembly(benchmark::State& state) {
  auto grid = std::make_shared<const DiscreteHalfAnnulus>(1.0, 4.0, 1.0 / 8, 3);
  AssemblyOptions opts;
  opts.execution = mode(state);
  for (auto _ : state) benchmark::DoNotOptimize(assemble_operator(grid, flat_half_space(3), {}, {}, opts));
}

void BM_Spmv(benchmark::State& state) {
  const SparseMatrix& a = fixture().matrix;
  const int nrhs = static_cast<int>(state.range(1));
  std::vector<double> x(static_cast<std::size_t>(a.rows() * nrhs), 1.0), y(x.size());
  for (auto _ : state) {
    spmv(a, x.data(), y.data(), nrhs, mode(state));
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * a.nonZeros() * nrhs);
}

void BM_GaussSeidel(benchmark::State& state) {
  const Multigrid::Level& level = fixture().preconditioner->level(0);
  std::vector<double> b(static_cast<std::size_t>(level.a.rows()), 1.0), x(b.size(), 0.0);
  for (auto _ : state) {
    gauss_seidel(level.a, level.inv_diag, level.colours, b.data(), x.data(), 1, true, mode(state));
    benchmark::DoNotOptimize(x.data());
  }
}

void BM_VCycle(benchmark::State& state) {
  const Multigrid& mg = *fixture().preconditioner;
  std::vector<double> r(static_cast<std::size_t>(mg.matrix().rows()), 1.0), z(r.size());
  Multigrid::Workspace ws = mg.workspace(1);
  for (auto _ : state) {
    mg.apply(r.data(), z.data(), ws, mode(state));
    benchmark::DoNotOptimize(z.data());
  }
}

}  // namespace

BENCHMARK(BM_Assembly)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Spmv)->Args({0, 1})->Args({1, 1})->Args({0, 4})->Args({1, 4})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GaussSeidel)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_VCycle)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
