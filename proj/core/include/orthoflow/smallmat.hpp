#pragma once

#include <Eigen/Dense>

namespace orthoflow::smallmat {

/// Dense N x N kernels used by the iteration and the diagnostics.
/// N is small (a few hundred at most); the contract here is accuracy,
/// not speed.

struct SymEig {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // columns, orthonormal
};

/// Eigendecomposition of a symmetric matrix. The input is symmetrized
/// first; an asymmetry above 1e-8 * ||S|| is an error (it signals a
/// bug upstream, not roundoff).
SymEig sym_eig(const Eigen::MatrixXd& S);

/// Solve M X = RHS for symmetric positive definite M via Cholesky.
/// Throws if a pivot fails (M not SPD).
Eigen::MatrixXd chol_solve(const Eigen::MatrixXd& M, const Eigen::MatrixXd& RHS);

struct Svd {
  Eigen::MatrixXd left;
  Eigen::VectorXd singular_values;  // descending, >= 0
  Eigen::MatrixXd right;
};

Svd svd(const Eigen::MatrixXd& S);

/// Orthogonal Procrustes: for Sab = <V,U> returns the orthogonal Q
/// minimizing ||U - V Q|| (polar factor of Sab). Rank-deficient input
/// still yields an orthogonal Q.
Eigen::MatrixXd procrustes(const Eigen::MatrixXd& Sab);

}  // namespace orthoflow::smallmat
