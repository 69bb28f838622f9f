#include <benchmark/benchmark.h>

#include "orthoflow/diagnostics.hpp"
#include "orthoflow/flow.hpp"
#include "orthoflow/hamiltonian.hpp"

namespace {

using namespace orthoflow;

struct Setup {
  Hamiltonian H;
  GreenSolver solver;
  Orbitals U;

  static Setup make(int cells, int n_orbitals) {
    TensorGrid grid(Box::make({-5.5, -5.5}, {5.5, 5.5}), {cells, cells});
    Hamiltonian H = assemble(grid, Potential::harmonic(), 0.5);
    GreenSolver solver(H);
    Orbitals U = random_orthonormal_init(grid, n_orbitals, 7);
    return {std::move(H), std::move(solver), std::move(U)};
  }
};

void BM_green_apply(benchmark::State& state) {
  auto s = Setup::make(static_cast<int>(state.range(0)), 8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(s.solver.solve_block(s.U));
  }
}
BENCHMARK(BM_green_apply)->Arg(32)->Arg(64)->Arg(128);

void BM_flow_step(benchmark::State& state) {
  auto s = Setup::make(static_cast<int>(state.range(0)), 8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(flow_step(s.U, 0.1, s.H, s.solver));
  }
}
BENCHMARK(BM_flow_step)->Arg(32)->Arg(64)->Arg(128);

void BM_flow_rhs(benchmark::State& state) {
  auto s = Setup::make(static_cast<int>(state.range(0)), 8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(flow_rhs(s.H, s.solver, s.U));
  }
}
BENCHMARK(BM_flow_rhs)->Arg(32)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
