#include "orthoflow/hamiltonian.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <thread>
#include <vector>

namespace orthoflow {

namespace {
std::atomic<long> g_orthonormalize_calls{0};
}

Hamiltonian assemble(const TensorGrid& grid, const Potential& pot, double c_lap, double shift) {
  return assemble(grid, eval_potential(grid, pot), c_lap, shift);
}

Hamiltonian assemble(const TensorGrid& grid, const Eigen::VectorXd& potential_values,
                     double c_lap, double shift) {
  const long n = grid.num_nodes();
  if (potential_values.size() != n) {
    throw std::invalid_argument("assemble: potential vector length mismatch");
  }
  const int d = grid.dim();

  double diag_lap = 0.0;
  std::vector<double> off(d);
  for (int i = 0; i < d; ++i) {
    const double inv_h2 = 1.0 / (grid.spacing(i) * grid.spacing(i));
    diag_lap += 2.0 * inv_h2;
    off[i] = -inv_h2;
  }

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(n) * (2 * d + 1));
  for (long j = 0; j < n; ++j) {
    trips.emplace_back(j, j, c_lap * diag_lap + potential_values[j] + shift);
    auto multi = grid.multi_index(j);
    for (int i = 0; i < d; ++i) {
      for (int s : {-1, 1}) {
        auto nb = multi;
        nb[i] += s;
        if (nb[i] < 0 || nb[i] >= grid.cells()[i] - 1) continue;  // Dirichlet
        trips.emplace_back(j, grid.flat_index(nb), c_lap * off[i]);
      }
    }
  }

  Hamiltonian H{grid, Eigen::SparseMatrix<double>(n, n), c_lap, shift};
  H.matrix.setFromTriplets(trips.begin(), trips.end());
  H.matrix.makeCompressed();
  return H;
}

Eigen::MatrixXd inner_l2(const TensorGrid& grid, const Orbitals& A, const Orbitals& B) {
  if (A.rows() != B.rows() || A.rows() != grid.num_nodes()) {
    throw std::invalid_argument("inner_l2: shape mismatch");
  }
  return grid.mass_weight() * (A.transpose() * B);
}

Eigen::MatrixXd inner_a(const Hamiltonian& H, const Orbitals& A, const Orbitals& B) {
  if (A.rows() != B.rows() || A.rows() != H.size()) {
    throw std::invalid_argument("inner_a: shape mismatch");
  }
  return H.mass_weight() * (A.transpose() * (H.matrix * B));
}

Energy energy(const Hamiltonian& H, const Orbitals& U) {
  Energy e;
  e.raw = 0.5 * inner_a(H, U, U).trace();
  e.shift_corrected = e.raw - 0.5 * static_cast<double>(U.cols()) * H.shift;
  return e;
}

GreenSolver::GreenSolver(const Hamiltonian& H, Backend backend, double cg_rel_tol, int cg_max_iter)
    : ham_(&H), backend_(backend), cg_rel_tol_(cg_rel_tol), cg_max_iter_(cg_max_iter) {
  if (backend_ == Backend::Direct) {
    ldlt_ = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
    ldlt_->compute(H.matrix);
    // LDLT succeeds on indefinite matrices; positive definiteness is
    // the sign of the D factor.
    if (ldlt_->info() != Eigen::Success || ldlt_->vectorD().minCoeff() <= 0.0) {
      throw std::runtime_error(
          "GreenSolver: factorization failed (operator not positive definite; try a larger shift)");
    }
  }
}

double GreenSolver::rel_tol() const {
  return backend_ == Backend::Direct ? 1e-14 : cg_rel_tol_;
}

Eigen::VectorXd GreenSolver::solve(const Eigen::VectorXd& rhs) const {
  if (backend_ == Backend::Direct) {
    return ldlt_->solve(rhs);
  }
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                           Eigen::DiagonalPreconditioner<double>>
      cg;
  cg.setTolerance(cg_rel_tol_);
  cg.setMaxIterations(cg_max_iter_);
  cg.compute(ham_->matrix);
  Eigen::VectorXd w = cg.solve(rhs);
  if (cg.info() != Eigen::Success) {
    throw std::runtime_error("GreenSolver: CG did not converge within cg_max_iter");
  }
  return w;
}

Orbitals GreenSolver::solve_block(const Orbitals& U) const {
  Orbitals W(U.rows(), U.cols());
  const int nw = std::min<int>(worker_count(), static_cast<int>(U.cols()));
  if (nw <= 1) {
    for (long c = 0; c < U.cols(); ++c) W.col(c) = solve(U.col(c));
    return W;
  }
  std::atomic<long> next{0};
  std::vector<std::thread> pool;
  std::atomic<bool> failed{false};
  for (int t = 0; t < nw; ++t) {
    pool.emplace_back([&] {
      try {
        for (long c = next.fetch_add(1); c < U.cols(); c = next.fetch_add(1)) {
          W.col(c) = solve(U.col(c));
        }
      } catch (...) {
        failed = true;
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failed) throw std::runtime_error("GreenSolver: a column solve failed");
  return W;
}

void l2_orthonormalize(const TensorGrid& grid, Orbitals& U) {
  g_orthonormalize_calls.fetch_add(1);
  const double w = grid.mass_weight();
  for (long i = 0; i < U.cols(); ++i) {
    const double nrm0 = std::sqrt(w * U.col(i).squaredNorm());
    for (int pass = 0; pass < 2; ++pass) {  // re-orthogonalize once for stability
      for (long k = 0; k < i; ++k) {
        U.col(i) -= (w * U.col(k).dot(U.col(i))) * U.col(k);
      }
    }
    const double nrm = std::sqrt(w * U.col(i).squaredNorm());
    if (nrm <= 1e-12 * nrm0) {
      throw std::runtime_error("l2_orthonormalize: rank-deficient block");
    }
    U.col(i) /= nrm;
  }
}

long orthonormalize_call_count() { return g_orthonormalize_calls.load(); }
void reset_orthonormalize_call_count() { g_orthonormalize_calls.store(0); }

int worker_count() {
  if (const char* env = std::getenv("ORTHO_FLOW_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return 1;
}

}  // namespace orthoflow
