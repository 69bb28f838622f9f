#include "orthoflow/flow.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "orthoflow/smallmat.hpp"

namespace orthoflow {

Orbitals random_orthonormal_init(const TensorGrid& grid, int n_orbitals,
                                 unsigned long long seed) {
  if (n_orbitals < 1 || n_orbitals > grid.num_nodes()) {
    throw std::invalid_argument("random_orthonormal_init: need 1 <= N <= N_g");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int attempt = 0; attempt < 3; ++attempt) {
    Orbitals U(grid.num_nodes(), n_orbitals);
    for (long c = 0; c < U.cols(); ++c) {
      for (long r = 0; r < U.rows(); ++r) U(r, c) = normal(rng);
    }
    try {
      l2_orthonormalize(grid, U);
    } catch (const std::runtime_error&) {
      continue;  // rank-deficient draw; redraw
    }
    return U;
  }
  throw std::runtime_error("random_orthonormal_init: rank deficiency after 3 re-draws");
}

Orbitals flow_step(const Orbitals& U, double tau, const Hamiltonian& H,
                   const GreenSolver& solver, StepInfo* info) {
  const long N = U.cols();
  const Orbitals W = solver.solve_block(U);

  const Eigen::MatrixXd S_raw = inner_l2(H.grid, W, U);
  const Eigen::MatrixXd S = 0.5 * (S_raw + S_raw.transpose());
  if (info) info->solver_asym = (S_raw - S_raw.transpose()).norm();
  const Eigen::MatrixXd R = inner_l2(H.grid, W, W);

  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(N, N);
  const Eigen::MatrixXd M = I + (tau * tau / 4.0) * (R - S * S);
  Eigen::MatrixXd B;
  try {
    B = smallmat::chol_solve(M, I);
  } catch (const std::runtime_error&) {
    throw std::runtime_error("flow_step: midpoint matrix not SPD (upstream bug)");
  }
  const Eigen::MatrixXd A = (2.0 / tau) * (I - B) + S * B;
  return U - tau * U * A + tau * W * B;
}

RunResult flow_run(const FlowConfig& config, const Hamiltonian& H,
                   const GreenSolver& solver, const Orbitals& U0,
                   const StepObserver& observer) {
  if (config.tau <= 0 || config.tol <= 0 || config.max_iter < 1) {
    throw std::invalid_argument("flow_run: invalid config");
  }
  const long N = U0.cols();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(N, N);

  RunResult result;
  result.history.reserve(256);
  const long reortho_before = orthonormalize_call_count();

  Orbitals U = U0;
  double E = energy(H, U).raw;
  double t = 0.0;

  for (long n = 0; n < config.max_iter; ++n) {
    StepInfo info;
    U = flow_step(U, config.tau, H, solver, &info);
    t += config.tau;

    const Energy e = energy(H, U);
    const double err_E = std::abs(e.raw - E) / std::max(std::abs(E), config.err_floor);
    const double ortho_err = (inner_l2(H.grid, U, U) - I).norm();
    E = e.raw;

    result.max_ortho_err = std::max(result.max_ortho_err, ortho_err);
    result.max_solver_asym = std::max(result.max_solver_asym, info.solver_asym);
    if (ortho_err > config.ortho_alarm) {
      throw std::runtime_error(
          "flow_run: orthogonality drift " + std::to_string(ortho_err) +
          " exceeds alarm threshold (solver tolerance too loose)");
    }

    RunRecord rec;
    rec.n = n + 1;
    rec.t = t;
    rec.energy = e.raw;
    rec.energy_shift_corrected = e.shift_corrected;
    rec.err_E = err_E;
    rec.ortho_err = ortho_err;
    if (observer) observer(U, rec);
    result.history.push_back(std::move(rec));

    if (err_E <= config.tol) {
      result.converged = true;
      result.iterations = n + 1;
      break;
    }
  }
  if (!result.converged) result.iterations = static_cast<long>(result.history.size());

  result.reortho_calls_in_loop = orthonormalize_call_count() - reortho_before;
  result.final_state.n = result.iterations;
  result.final_state.U = std::move(U);
  result.final_state.energy_raw = E;
  result.final_state.energy_shift_corrected = E - 0.5 * static_cast<double>(N) * H.shift;
  if (!result.history.empty()) {
    result.final_state.err_E = result.history.back().err_E;
    result.final_state.ortho_err = result.history.back().ortho_err;
  }
  return result;
}

Eigen::VectorXd extract_eigenvalues(const Orbitals& U_end, const Hamiltonian& H,
                                    const GreenSolver& solver) {
  const Orbitals W = solver.solve_block(U_end);
  const Eigen::MatrixXd S = inner_l2(H.grid, W, U_end);
  const auto eig = smallmat::sym_eig(0.5 * (S + S.transpose()));
  Eigen::VectorXd lambdas(eig.values.size());
  for (long i = 0; i < eig.values.size(); ++i) {
    const double mu = eig.values[eig.values.size() - 1 - i];  // mu descending -> lambda ascending
    if (mu <= 0) {
      throw std::runtime_error("extract_eigenvalues: non-positive mu (operator not SPD under shift)");
    }
    lambdas[i] = 1.0 / mu - H.shift;
  }
  return lambdas;
}

}  // namespace orthoflow
