#pragma once

#include <Eigen/Dense>
#include <string>

#include "orthoflow/hamiltonian.hpp"

namespace orthoflow {

/// Reference eigenpairs from a conventional, explicitly orthogonalized
/// eigensolver, used to validate the flow. Energies are stored in the
/// raw (shifted-operator) convention of energy().raw; eigenvalues are
/// shift-corrected (physical).
struct ReferencePack {
  Orbitals Ustar;               // N_g x N, L2-orthonormal columns
  Eigen::VectorXd lambda;       // N ascending, shift-corrected
  double lambda_np1 = 0.0;      // shift-corrected
  double e_gs = 0.0;            // 1/2 sum (lambda_i + shift)
  double e_es = 0.0;            // e_gs + (lambda_{N+1} - lambda_N)/2
  Eigen::VectorXd residuals;    // N+1 relative residuals ||H u - l u|| / |l|
  double shift = 0.0;

  // grid provenance, for serialization round-trips
  int dim = 0;
  std::vector<int> cells;
  std::vector<double> box_lower, box_upper;
};

enum class OracleMode { Dense, Iterative };

struct OracleOptions {
  double residual_tol = 1e-9;
  int max_subspace = 250;   // Krylov dimension per pass (iterative mode)
  int max_passes = 10;      // deflation restarts (degenerate clusters)
  unsigned long long seed = 12345;
};

/// k+1 smallest eigenpairs of H (the +1 supplies lambda_{N+1} and
/// E_ES). Dense mode builds the full matrix (N_g <= 4000); iterative
/// mode runs shift-invert Lanczos with full reorthogonalization and
/// deflation restarts, reusing the same factorization as the flow.
ReferencePack reference_eigenpairs(const Hamiltonian& H, const GreenSolver& solver,
                                   int k, OracleMode mode,
                                   const OracleOptions& opts = {});

void save_pack(const std::string& path, const ReferencePack& pack);
ReferencePack load_pack(const std::string& path);

}  // namespace orthoflow
