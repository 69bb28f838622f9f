#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "orthoflow/hamiltonian.hpp"

namespace orthoflow {

struct FlowConfig {
  int n_orbitals = 1;
  double tau = 0.1;
  double tau_min = 0.0;   // 0 means "same as tau"
  double tau_max = 0.0;
  double tol = 1e-10;     // relative-energy stopping tolerance
  double err_floor = 1e-14;  // |E| floor in the err_E denominator
  long max_iter = 100000;
  unsigned long long seed = 0;
  double ortho_alarm = 1e-8;
};

/// One line of per-iteration diagnostics. The reference-dependent
/// fields stay empty unless an observer fills them.
struct RunRecord {
  long n = 0;
  double t = 0.0;  // accumulated time sum(tau_k)
  double energy = 0.0;
  double energy_shift_corrected = 0.0;
  double err_E = 0.0;
  double ortho_err = 0.0;
  std::optional<double> err_U;
  std::optional<double> dist_class_a;
  std::optional<double> delta_L2;
  std::vector<double> column_err;  // per-orbital relative error, optional
};

struct StepInfo {
  double solver_asym = 0.0;  // || <W,U> - <W,U>' ||_F before symmetrization
};

struct FlowState {
  long n = 0;
  Orbitals U;
  double energy_raw = 0.0;
  double energy_shift_corrected = 0.0;
  double err_E = 0.0;
  double ortho_err = 0.0;
};

struct RunResult {
  FlowState final_state;
  std::vector<RunRecord> history;
  bool converged = false;
  long iterations = 0;
  long reortho_calls_in_loop = 0;
  double max_ortho_err = 0.0;
  double max_solver_asym = 0.0;
};

/// Called after each accepted step; may fill the optional RunRecord
/// fields from the current iterate.
using StepObserver = std::function<void(const Orbitals& U, RunRecord& rec)>;

/// Random block with mutually L2-orthonormal columns; standard normal
/// entries, deterministic in the seed. The only place (besides the
/// reference solver) where explicit orthonormalization happens.
Orbitals random_orthonormal_init(const TensorGrid& grid, int n_orbitals,
                                 unsigned long long seed);

/// One step of the orthogonality-preserving midpoint scheme:
///   W   = H^{-1} U
///   S   = sym(<W,U>),  R = <W,W>
///   B   = (I + tau^2/4 (R - S S))^{-1}
///   A   = 2/tau (I - B) + S B
///   U+  = U - tau U A + tau W B
/// No re-orthogonalization. Throws if the Step-2 matrix is not SPD.
Orbitals flow_step(const Orbitals& U, double tau, const Hamiltonian& H,
                   const GreenSolver& solver, StepInfo* info = nullptr);

/// Outer loop: step until |E(U+) - E(U)| / max(|E(U)|, floor) <= tol or
/// max_iter. Aborts (throws) when the orthogonality drift passes the
/// alarm threshold, which indicates a solver tolerance too loose for
/// the scheme.
RunResult flow_run(const FlowConfig& config, const Hamiltonian& H,
                   const GreenSolver& solver, const Orbitals& U0,
                   const StepObserver& observer = nullptr);

/// Eigenvalues from a converged iterate: eigenvalues mu of
/// sym(<H^{-1} U, U>), returned as 1/mu - shift, ascending.
Eigen::VectorXd extract_eigenvalues(const Orbitals& U_end, const Hamiltonian& H,
                                    const GreenSolver& solver);

}  // namespace orthoflow
