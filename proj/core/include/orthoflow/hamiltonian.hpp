#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <memory>

#include "orthoflow/grid.hpp"

namespace orthoflow {

/// Column block of discrete orbitals; one column per orbital, one row
/// per interior grid node. Orthonormality is always meant in the
/// mass-weighted L2 inner product <u,v> = h^d u'v.
using Orbitals = Eigen::MatrixXd;

/// Discrete Hamiltonian H = c_lap * (-Laplacian_h) + diag(V) + shift * I
/// on a tensor grid, with the standard 3/5/7-point second-order stencil
/// and homogeneous Dirichlet boundary.
struct Hamiltonian {
  TensorGrid grid;
  Eigen::SparseMatrix<double> matrix;
  double c_lap = 1.0;
  double shift = 0.0;

  double mass_weight() const { return grid.mass_weight(); }
  long size() const { return matrix.rows(); }
};

Hamiltonian assemble(const TensorGrid& grid, const Potential& pot,
                     double c_lap = 1.0, double shift = 0.0);
Hamiltonian assemble(const TensorGrid& grid, const Eigen::VectorXd& potential_values,
                     double c_lap = 1.0, double shift = 0.0);

/// Mass-weighted L2 inner matrix: (h^d A'B)_ij = (a_i, b_j).
Eigen::MatrixXd inner_l2(const TensorGrid& grid, const Orbitals& A, const Orbitals& B);

/// Energy inner matrix: h^d A' H B.
Eigen::MatrixXd inner_a(const Hamiltonian& H, const Orbitals& A, const Orbitals& B);

struct Energy {
  double raw = 0.0;              // 1/2 tr <U,U>_a with the shifted operator
  double shift_corrected = 0.0;  // raw - N * shift / 2
};

Energy energy(const Hamiltonian& H, const Orbitals& U);

/// Application of the Green's operator G = H^{-1}, one sparse solve per
/// column. The factorization (direct backend) is computed once and
/// reused; H never changes during a run.
class GreenSolver {
 public:
  enum class Backend { Direct, Cg };

  explicit GreenSolver(const Hamiltonian& H, Backend backend = Backend::Direct,
                       double cg_rel_tol = 1e-12, int cg_max_iter = 10000);

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

  /// H^{-1} column by column. Columns are independent; they may be
  /// solved concurrently (worker count capped by ORTHO_FLOW_THREADS)
  /// and the result does not depend on the execution order.
  Orbitals solve_block(const Orbitals& U) const;

  Backend backend() const { return backend_; }
  double rel_tol() const;

 private:
  const Hamiltonian* ham_;
  Backend backend_;
  double cg_rel_tol_;
  int cg_max_iter_;
  std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> ldlt_;
};

/// Modified Gram-Schmidt in the L2 inner product, in place. Allowed for
/// initialization and for the reference solver only -- never inside the
/// flow iteration; every call increments a global counter so tests can
/// assert the iteration performed none.
void l2_orthonormalize(const TensorGrid& grid, Orbitals& U);

long orthonormalize_call_count();
void reset_orthonormalize_call_count();

/// Worker cap for per-column solves: ORTHO_FLOW_THREADS, default 1.
int worker_count();

}  // namespace orthoflow
