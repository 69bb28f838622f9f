#include "orthoflow/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>
#include <vector>

#include "orthoflow/smallmat.hpp"

namespace orthoflow {

namespace {

double l2_norm(const TensorGrid& grid, const Eigen::VectorXd& v) {
  return std::sqrt(grid.mass_weight() * v.squaredNorm());
}

/// Relative eigen-residual ||H u - lambda u|| / |lambda| with the
/// L2-Rayleigh quotient as lambda (shifted-operator convention).
double eigen_residual(const Hamiltonian& H, const Eigen::VectorXd& u, double* lambda_out) {
  const Eigen::VectorXd Hu = H.matrix * u;
  const double lambda = u.dot(Hu) / u.squaredNorm();
  const double res = l2_norm(H.grid, Hu - lambda * u) / l2_norm(H.grid, u) / std::abs(lambda);
  if (lambda_out) *lambda_out = lambda;
  return res;
}

struct Found {
  Eigen::VectorXd u;
  double lambda_shifted;
  double residual;
};

std::vector<Found> dense_solve(const Hamiltonian& H, int want) {
  if (H.size() > 4000) {
    throw std::invalid_argument("oracle dense mode: N_g must be <= 4000");
  }
  Eigen::MatrixXd dense = Eigen::MatrixXd(H.matrix);
  const auto eig = smallmat::sym_eig(dense);
  std::vector<Found> out;
  const double scale = 1.0 / std::sqrt(H.mass_weight());
  for (int i = 0; i < want; ++i) {
    Found f;
    f.u = eig.vectors.col(i) * scale;  // euclidean-orthonormal -> L2-orthonormal
    f.residual = eigen_residual(H, f.u, &f.lambda_shifted);
    out.push_back(std::move(f));
  }
  return out;
}

struct LanczosDriver {
  const Hamiltonian& H;
  const GreenSolver& solver;
  const OracleOptions& opts;
  std::mt19937_64 rng;
  std::vector<Found> locked;
  Orbitals locked_mat;

  LanczosDriver(const Hamiltonian& h, const GreenSolver& s, const OracleOptions& o)
      : H(h), solver(s), opts(o), rng(o.seed), locked_mat(h.size(), 0) {}

  void deflate(Eigen::VectorXd& v) const {
    if (locked_mat.cols() > 0) {
      v -= locked_mat * (H.mass_weight() * (locked_mat.transpose() * v));
    }
  }

  void lock(const Found& f) {
    locked.push_back(f);
    locked_mat.conservativeResize(Eigen::NoChange, locked_mat.cols() + 1);
    locked_mat.col(locked_mat.cols() - 1) = f.u;
  }

  void unlock_largest_lambda() {
    size_t worst = 0;
    for (size_t i = 1; i < locked.size(); ++i) {
      if (locked[i].lambda_shifted > locked[worst].lambda_shifted) worst = i;
    }
    locked.erase(locked.begin() + static_cast<long>(worst));
    locked_mat.resize(H.size(), static_cast<long>(locked.size()));
    for (size_t i = 0; i < locked.size(); ++i) {
      locked_mat.col(static_cast<long>(i)) = locked[i].u;
    }
  }

  /// One Krylov pass on the deflated operator; returns the converged
  /// Ritz pairs among the `ask` largest mu of G (mu = 1/lambda).
  std::vector<Found> one_pass(int ask) {
    const long ng = H.size();
    const double w = H.mass_weight();
    std::normal_distribution<double> normal(0.0, 1.0);
    const int max_dim = static_cast<int>(std::min<long>(opts.max_subspace, ng));

    Orbitals V(ng, max_dim);
    std::vector<double> alpha, beta;
    Eigen::VectorXd v(ng);
    for (long r = 0; r < ng; ++r) v[r] = normal(rng);
    deflate(v);
    deflate(v);
    v /= l2_norm(H.grid, v);
    V.col(0) = v;

    int j = 0;
    std::vector<Found> candidates;
    while (j < max_dim) {
      Eigen::VectorXd u = solver.solve(V.col(j));
      deflate(u);
      const double a = w * u.dot(V.col(j));
      alpha.push_back(a);
      u -= a * V.col(j);
      if (j > 0) u -= beta.back() * V.col(j - 1);
      // full reorthogonalization, two sweeps
      for (int sweep = 0; sweep < 2; ++sweep) {
        u -= V.leftCols(j + 1) * (w * (V.leftCols(j + 1).transpose() * u));
      }
      const double b = l2_norm(H.grid, u);
      const int dim = j + 1;

      const bool breakdown = b < 1e-13;
      const bool check = breakdown || dim == max_dim || (dim >= 2 * ask && dim % 10 == 0);
      if (check) {
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(dim, dim);
        for (int i = 0; i < dim; ++i) T(i, i) = alpha[i];
        for (int i = 0; i + 1 < dim; ++i) T(i, i + 1) = T(i + 1, i) = beta[i];
        const auto te = smallmat::sym_eig(T);

        const int top = std::min(ask, dim);
        candidates.clear();
        bool all_ok = true;
        for (int i = 0; i < top; ++i) {
          const Eigen::VectorXd s = te.vectors.col(dim - 1 - i);  // largest mu of G first
          Found f;
          f.u = V.leftCols(dim) * s;
          f.u /= l2_norm(H.grid, f.u);
          f.residual = eigen_residual(H, f.u, &f.lambda_shifted);
          all_ok = all_ok && f.residual <= opts.residual_tol;
          candidates.push_back(std::move(f));
        }
        if (all_ok || breakdown || dim == max_dim) break;
      }
      beta.push_back(b);
      V.col(j + 1) = u / b;
      ++j;
    }

    std::vector<Found> converged;
    for (auto& f : candidates) {
      if (f.residual <= opts.residual_tol) converged.push_back(std::move(f));
    }
    return converged;
  }
};

/// Shift-invert Lanczos with full reorthogonalization against both the
/// Krylov basis and previously locked vectors. A single Krylov pass
/// represents each degenerate eigenvalue once, so after enough pairs
/// are locked a deflated probe pass checks completeness: if the
/// smallest remaining eigenvalue undercuts a locked one, a degenerate
/// copy was missed and the intruder is swapped out.
std::vector<Found> lanczos_solve(const Hamiltonian& H, const GreenSolver& solver,
                                 int want, const OracleOptions& opts) {
  LanczosDriver drv(H, solver, opts);

  int budget = opts.max_passes;
  while (static_cast<int>(drv.locked.size()) < want && budget > 0) {
    --budget;
    const auto found = drv.one_pass(want - static_cast<int>(drv.locked.size()));
    if (found.empty()) continue;
    for (const auto& f : found) {
      if (static_cast<int>(drv.locked.size()) < want) drv.lock(f);
    }
  }

  // completeness verification against missed degenerate copies
  while (static_cast<int>(drv.locked.size()) == want && budget > 0) {
    --budget;
    const auto probe = drv.one_pass(1);
    if (probe.empty()) break;  // nothing further converged; accept the set
    double lam_max = drv.locked.front().lambda_shifted;
    for (const auto& f : drv.locked) lam_max = std::max(lam_max, f.lambda_shifted);
    const double next = probe.front().lambda_shifted;
    if (next >= lam_max * (1.0 - 1e-10)) break;  // spectrum below lam_max is complete
    drv.unlock_largest_lambda();
    drv.lock(probe.front());
  }

  if (static_cast<int>(drv.locked.size()) < want) {
    double worst = 0.0;
    for (const auto& f : drv.locked) worst = std::max(worst, f.residual);
    throw std::runtime_error(
        "oracle iterative mode: only " + std::to_string(drv.locked.size()) + " of " +
        std::to_string(want) + " pairs converged to residual tol (worst residual " +
        std::to_string(worst) + ")");
  }
  std::vector<Found> out = std::move(drv.locked);
  std::sort(out.begin(), out.end(),
            [](const Found& a, const Found& b) { return a.lambda_shifted < b.lambda_shifted; });
  return out;
}

}  // namespace

ReferencePack reference_eigenpairs(const Hamiltonian& H, const GreenSolver& solver,
                                   int k, OracleMode mode, const OracleOptions& opts) {
  if (k < 1 || k + 1 > H.size()) throw std::invalid_argument("reference_eigenpairs: bad k");
  const int want = k + 1;
  std::vector<Found> found = (mode == OracleMode::Dense)
                                 ? dense_solve(H, want)
                                 : lanczos_solve(H, solver, want, opts);

  // Explicit L2 re-orthonormalization, then recompute residuals.
  Orbitals all(H.size(), want);
  for (int i = 0; i < want; ++i) all.col(i) = found[i].u;
  l2_orthonormalize(H.grid, all);

  ReferencePack pack;
  pack.shift = H.shift;
  pack.Ustar = all.leftCols(k);
  pack.lambda.resize(k);
  pack.residuals.resize(want);
  double lam_shift_n = 0, lam_shift_np1 = 0;
  for (int i = 0; i < want; ++i) {
    double lam = 0;
    pack.residuals[i] = eigen_residual(H, all.col(i), &lam);
    if (i < k) pack.lambda[i] = lam - H.shift;
    if (i == k - 1) lam_shift_n = lam;
    if (i == k) {
      pack.lambda_np1 = lam - H.shift;
      lam_shift_np1 = lam;
    }
  }
  pack.e_gs = 0.5 * (pack.lambda.sum() + k * H.shift);
  pack.e_es = pack.e_gs + 0.5 * (lam_shift_np1 - lam_shift_n);
  if (lam_shift_np1 - lam_shift_n <= 1e-10 * std::abs(lam_shift_n)) {
    throw std::runtime_error(
        "reference_eigenpairs: lambda_N and lambda_{N+1} are degenerate; the gap assumption "
        "fails for this N (pick N at a spectral gap)");
  }

  const auto& g = H.grid;
  pack.dim = g.dim();
  pack.cells = g.cells();
  for (int i = 0; i < g.dim(); ++i) {
    pack.box_lower.push_back(g.box().lower[i]);
    pack.box_upper.push_back(g.box().upper[i]);
  }
  return pack;
}

void save_pack(const std::string& path, const ReferencePack& pack) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_pack: cannot open " + path);
  out.precision(17);
  out << "orthoflow-refpack 1\n";
  out << "dim " << pack.dim << "\n";
  out << "cells";
  for (int c : pack.cells) out << ' ' << c;
  out << "\nbox_lower";
  for (double v : pack.box_lower) out << ' ' << v;
  out << "\nbox_upper";
  for (double v : pack.box_upper) out << ' ' << v;
  out << "\nshift " << pack.shift << "\n";
  out << "n " << pack.lambda.size() << "\n";
  out << "ng " << pack.Ustar.rows() << "\n";
  out << "lambda";
  for (long i = 0; i < pack.lambda.size(); ++i) out << ' ' << pack.lambda[i];
  out << "\nlambda_np1 " << pack.lambda_np1 << "\n";
  out << "e_gs " << pack.e_gs << "\ne_es " << pack.e_es << "\n";
  out << "residuals";
  for (long i = 0; i < pack.residuals.size(); ++i) out << ' ' << pack.residuals[i];
  out << "\nustar\n";
  for (long r = 0; r < pack.Ustar.rows(); ++r) {
    for (long c = 0; c < pack.Ustar.cols(); ++c) {
      out << pack.Ustar(r, c) << (c + 1 == pack.Ustar.cols() ? '\n' : ' ');
    }
  }
  if (!out) throw std::runtime_error("save_pack: write failed for " + path);
}

ReferencePack load_pack(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_pack: cannot open " + path);
  std::string tag;
  int version = 0;
  in >> tag >> version;
  if (tag != "orthoflow-refpack" || version != 1) {
    throw std::runtime_error("load_pack: unrecognized format in " + path);
  }
  ReferencePack pack;
  std::string key;
  long n = 0, ng = 0;
  in >> key >> pack.dim;
  in >> key;
  pack.cells.resize(pack.dim);
  for (int i = 0; i < pack.dim; ++i) in >> pack.cells[i];
  in >> key;
  pack.box_lower.resize(pack.dim);
  for (int i = 0; i < pack.dim; ++i) in >> pack.box_lower[i];
  in >> key;
  pack.box_upper.resize(pack.dim);
  for (int i = 0; i < pack.dim; ++i) in >> pack.box_upper[i];
  in >> key >> pack.shift;
  in >> key >> n;
  in >> key >> ng;
  pack.lambda.resize(n);
  in >> key;
  for (long i = 0; i < n; ++i) in >> pack.lambda[i];
  in >> key >> pack.lambda_np1;
  in >> key >> pack.e_gs >> key >> pack.e_es;
  pack.residuals.resize(n + 1);
  in >> key;
  for (long i = 0; i <= n; ++i) in >> pack.residuals[i];
  in >> key;
  pack.Ustar.resize(ng, n);
  for (long r = 0; r < ng; ++r) {
    for (long c = 0; c < n; ++c) in >> pack.Ustar(r, c);
  }
  if (!in) throw std::runtime_error("load_pack: truncated file " + path);
  return pack;
}

}  // namespace orthoflow
