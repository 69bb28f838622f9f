#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "orthoflow/hamiltonian.hpp"
#include "orthoflow/oracle.hpp"

using namespace orthoflow;

TEST_SUITE_BEGIN("oracle");

TEST_CASE("1d oscillator eigenvalues land on the analytic ladder") {
  TensorGrid g(Box::make({-8.0}, {8.0}), {256});
  const Hamiltonian H = assemble(g, Potential::harmonic(), 0.5);
  const GreenSolver solver(H);
  const ReferencePack pack = reference_eigenpairs(H, solver, 3, OracleMode::Dense);
  // second-order grid error; measured 1.1e-4 / 6.4e-4 / 1.6e-3 / 3.1e-3
  CHECK(std::abs(pack.lambda[0] - 0.5) <= 1e-3);
  CHECK(std::abs(pack.lambda[1] - 1.5) <= 1e-3);
  CHECK(std::abs(pack.lambda[2] - 2.5) <= 2e-3);
  CHECK(std::abs(pack.lambda_np1 - 3.5) <= 4e-3);
  for (long i = 0; i < pack.residuals.size(); ++i) CHECK(pack.residuals[i] <= 1e-8);
  CHECK((inner_l2(g, pack.Ustar, pack.Ustar) - Eigen::MatrixXd::Identity(3, 3)).norm() <=
        1e-10);
  CHECK(pack.e_gs < pack.e_es);
  CHECK(pack.e_gs == doctest::Approx(0.5 * pack.lambda.sum()).epsilon(1e-12));
}

TEST_CASE("dense and iterative modes agree on a 500-node problem") {
  TensorGrid g(Box::make({-8.0}, {8.0}), {501});
  const Hamiltonian H = assemble(g, Potential::harmonic(), 0.5);
  const GreenSolver solver(H);
  const ReferencePack dense = reference_eigenpairs(H, solver, 4, OracleMode::Dense);
  const ReferencePack iter = reference_eigenpairs(H, solver, 4, OracleMode::Iterative);
  for (int i = 0; i < 4; ++i) {
    CHECK(std::abs(dense.lambda[i] - iter.lambda[i]) <= 1e-8 * std::abs(dense.lambda[i]));
  }
  for (long i = 0; i < iter.residuals.size(); ++i) CHECK(iter.residuals[i] <= 1e-8);
}

TEST_CASE("2d oscillator multiplicity pattern 1,2,3,4,5") {
  TensorGrid g(Box::make({-5.5, -5.5}, {5.5, 5.5}), {128, 128});
  const Hamiltonian H = assemble(g, Potential::harmonic(), 0.5);
  const GreenSolver solver(H);
  const ReferencePack pack = reference_eigenpairs(H, solver, 15, OracleMode::Iterative);
  int idx = 0;
  for (int level = 1; level <= 5; ++level) {
    for (int copy = 0; copy < level; ++copy) {
      CHECK(std::abs(pack.lambda[idx] - level) <= 1e-2);
      ++idx;
    }
  }
}

TEST_CASE("dense mode refuses oversized problems") {
  TensorGrid g(Box::make({-5.5, -5.5}, {5.5, 5.5}), {80, 80});
  const Hamiltonian H = assemble(g, Potential::harmonic(), 0.5);
  const GreenSolver solver(H);
  CHECK_THROWS_AS(reference_eigenpairs(H, solver, 3, OracleMode::Dense),
                  std::invalid_argument);
}

TEST_CASE("degenerate gap at N is rejected with a clear message") {
  TensorGrid g(Box::make({-5.5, -5.5}, {5.5, 5.5}), {32, 32});
  const Hamiltonian H = assemble(g, Potential::harmonic(), 0.5);
  const GreenSolver solver(H);
  // lambda_2 = lambda_3 = 2 for the 2d oscillator, so N = 2 has no gap
  CHECK_THROWS_WITH_AS(reference_eigenpairs(H, solver, 2, OracleMode::Dense),
                       doctest::Contains("gap"), std::runtime_error);
}

TEST_CASE("pack save/load round-trip") {
  TensorGrid g(Box::make({-8.0}, {8.0}), {64});
  const Hamiltonian H = assemble(g, Potential::harmonic(), 0.5, 0.25);
  const GreenSolver solver(H);
  const ReferencePack pack = reference_eigenpairs(H, solver, 3, OracleMode::Dense);

  const std::string path =
      (std::filesystem::temp_directory_path() / "orthoflow_test.pack").string();
  save_pack(path, pack);
  const ReferencePack back = load_pack(path);
  std::remove(path.c_str());

  CHECK(back.dim == 1);
  CHECK(back.cells == std::vector<int>{64});
  CHECK(back.shift == pack.shift);
  CHECK((back.lambda - pack.lambda).norm() == 0.0);
  CHECK(back.lambda_np1 == pack.lambda_np1);
  CHECK(back.e_gs == pack.e_gs);
  CHECK(back.e_es == pack.e_es);
  CHECK((back.Ustar - pack.Ustar).norm() == 0.0);
  CHECK((back.residuals - pack.residuals).norm() == 0.0);

  CHECK_THROWS_AS(load_pack("/nonexistent/file.pack"), std::runtime_error);
}

TEST_SUITE_END();
