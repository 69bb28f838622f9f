#pragma once

#include <Eigen/Dense>
#include <vector>

#include "orthoflow/flow.hpp"
#include "orthoflow/hamiltonian.hpp"
#include "orthoflow/oracle.hpp"

namespace orthoflow {

/// Block norms in the two inner products: sqrt(tr <A,A>).
double norm_l2(const TensorGrid& grid, const Orbitals& A);
double norm_a(const Hamiltonian& H, const Orbitals& A);

/// ||U - U_ref|| / ||U_ref||, L2 block Frobenius norm, no alignment.
double relative_block_error(const TensorGrid& grid, const Orbitals& U, const Orbitals& U_ref);

/// Per-column ||u_i - u_i_ref|| / ||u_i_ref||, no alignment.
std::vector<double> column_errors(const TensorGrid& grid, const Orbitals& U,
                                  const Orbitals& U_ref);

struct Projections {
  Orbitals PU;      // U* <U*, U>
  Orbitals PperpU;  // U - PU
};

/// L2 projection onto span(U*) and its complement.
Projections projections(const TensorGrid& grid, const Orbitals& U, const ReferencePack& pack);

struct SubspaceDistances {
  Eigen::VectorXd angles;     // principal angles, ascending
  double delta_L2 = 0.0;      // sin(theta_max), L2 inner product
  double delta_H1 = 0.0;      // same with a-orthonormal bases
  double dist_class_L2 = 0.0; // sqrt(sum 4 sin^2(theta_j / 2))
  double dist_class_a = 0.0;  // min over orthogonal Q of ||U - U* Q||_a
};

/// Distances between span(U) and span(U*). Both blocks must be
/// L2-orthonormal; cos(theta_j) are the singular values of <U*, U>,
/// clamped to [0,1] before arccos.
SubspaceDistances subspace_distances(const Hamiltonian& H, const Orbitals& U,
                                     const ReferencePack& pack);

struct RateFit {
  double slope = 0.0;      // per-iteration log rate
  double intercept = 0.0;
  double window = 0.5;     // fraction of samples used (from the end)
  double r_squared = 0.0;
  long samples = 0;        // positive samples actually fitted
};

/// Least-squares line through (n, log series_n) over the trailing
/// window. Non-positive values are skipped; throws with fewer than 10
/// usable samples.
RateFit fit_rate(const std::vector<double>& series, double window = 0.5);

/// L_U V = U <G U, V> - G U <U, V> (the flow generator applied to V).
Orbitals apply_flow_operator(const Hamiltonian& H, const GreenSolver& solver,
                             const Orbitals& U, const Orbitals& V);

/// Right-hand side of the continuous flow dU/dt = -L_U U.
Orbitals flow_rhs(const Hamiltonian& H, const GreenSolver& solver, const Orbitals& U);

/// Classical RK4 integration of the continuous flow up to time T.
/// Cross-check only: unlike the midpoint scheme it does not preserve
/// orthogonality exactly; the drift must scale as O(dt^4). Throws on
/// blow-up (block norm > 1e3).
Orbitals integrate_flow_rk4(const Orbitals& U0, const Hamiltonian& H,
                            const GreenSolver& solver, double dt, double T);

/// Indices of eigenvalues grouped into near-degenerate clusters:
/// consecutive lambdas whose gap is below rel_gap * max(1, |lambda|).
std::vector<std::vector<int>> eigenvalue_clusters(const Eigen::VectorXd& lambda,
                                                  double rel_gap = 1e-6);

/// Observer filling the reference-dependent RunRecord fields
/// (delta_L2, dist_class_a) from a reference pack.
StepObserver make_reference_observer(const Hamiltonian& H, const ReferencePack& pack);

/// Observer for a deterministic replay pass: fills err_U (and
/// per-column errors when with_columns) against the stored final
/// iterate of a previous identical run.
StepObserver make_replay_observer(const TensorGrid& grid, Orbitals U_end, bool with_columns);

}  // namespace orthoflow
