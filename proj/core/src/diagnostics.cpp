#include "orthoflow/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "orthoflow/smallmat.hpp"

namespace orthoflow {

double norm_l2(const TensorGrid& grid, const Orbitals& A) {
  return std::sqrt(grid.mass_weight()) * A.norm();
}

double norm_a(const Hamiltonian& H, const Orbitals& A) {
  return std::sqrt(inner_a(H, A, A).trace());
}

double relative_block_error(const TensorGrid& grid, const Orbitals& U, const Orbitals& U_ref) {
  if (U.rows() != U_ref.rows() || U.cols() != U_ref.cols()) {
    throw std::invalid_argument("relative_block_error: shape mismatch");
  }
  return norm_l2(grid, U - U_ref) / norm_l2(grid, U_ref);
}

std::vector<double> column_errors(const TensorGrid& grid, const Orbitals& U,
                                  const Orbitals& U_ref) {
  if (U.rows() != U_ref.rows() || U.cols() != U_ref.cols()) {
    throw std::invalid_argument("column_errors: shape mismatch");
  }
  std::vector<double> out(U.cols());
  for (long c = 0; c < U.cols(); ++c) {
    out[c] = (U.col(c) - U_ref.col(c)).norm() / U_ref.col(c).norm();
  }
  return out;
}

Projections projections(const TensorGrid& grid, const Orbitals& U, const ReferencePack& pack) {
  Projections p;
  p.PU = pack.Ustar * inner_l2(grid, pack.Ustar, U);
  p.PperpU = U - p.PU;
  return p;
}

namespace {

/// Basis with a-orthonormal columns spanning the same space, via
/// Cholesky of the a-Gram matrix.
Orbitals a_orthonormal_basis(const Hamiltonian& H, const Orbitals& U) {
  const Eigen::MatrixXd G = inner_a(H, U, U);
  Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (G + G.transpose()));
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("subspace_distances: a-Gram matrix not SPD");
  }
  const Eigen::MatrixXd Linv =
      llt.matrixL().solve(Eigen::MatrixXd::Identity(U.cols(), U.cols()));
  return U * Linv.transpose();
}

Eigen::VectorXd principal_angles(const Eigen::MatrixXd& cross) {
  const auto s = smallmat::svd(cross).singular_values;
  Eigen::VectorXd theta(s.size());
  for (long i = 0; i < s.size(); ++i) {
    // descending sigma -> ascending theta
    theta[i] = std::acos(std::clamp(s[i], 0.0, 1.0));
  }
  return theta;
}

}  // namespace

SubspaceDistances subspace_distances(const Hamiltonian& H, const Orbitals& U,
                                     const ReferencePack& pack) {
  if (U.rows() != pack.Ustar.rows() || U.cols() != pack.Ustar.cols()) {
    throw std::invalid_argument("subspace_distances: shape mismatch with reference");
  }
  const TensorGrid& grid = H.grid;
  SubspaceDistances d;

  d.angles = principal_angles(inner_l2(grid, pack.Ustar, U));
  d.delta_L2 = std::sin(d.angles[d.angles.size() - 1]);
  double acc = 0.0;
  for (long i = 0; i < d.angles.size(); ++i) {
    const double s = std::sin(0.5 * d.angles[i]);
    acc += 4.0 * s * s;
  }
  d.dist_class_L2 = std::sqrt(acc);

  const Orbitals Ua = a_orthonormal_basis(H, U);
  const Orbitals Va = a_orthonormal_basis(H, pack.Ustar);
  const Eigen::VectorXd theta_a = principal_angles(inner_a(H, Va, Ua));
  d.delta_H1 = std::sin(theta_a[theta_a.size() - 1]);

  const Eigen::MatrixXd Q = smallmat::procrustes(inner_a(H, pack.Ustar, U));
  d.dist_class_a = norm_a(H, U - pack.Ustar * Q);
  return d;
}

RateFit fit_rate(const std::vector<double>& series, double window) {
  if (!(window > 0.0 && window <= 1.0)) {
    throw std::invalid_argument("fit_rate: window must be in (0, 1]");
  }
  const long n = static_cast<long>(series.size());
  const long start = n - static_cast<long>(std::ceil(window * static_cast<double>(n)));

  std::vector<double> xs, ys;
  for (long i = std::max<long>(start, 0); i < n; ++i) {
    if (series[i] > 0.0 && std::isfinite(series[i])) {
      xs.push_back(static_cast<double>(i));
      ys.push_back(std::log(series[i]));
    }
  }
  const long m = static_cast<long>(xs.size());
  if (m < 10) {
    throw std::runtime_error("fit_rate: need at least 10 positive samples in the window, got " +
                             std::to_string(m));
  }

  double sx = 0, sy = 0;
  for (long i = 0; i < m; ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0, syy = 0;
  for (long i = 0; i < m; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  RateFit fit;
  fit.window = window;
  fit.samples = m;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (syy == 0.0) {
    fit.r_squared = 1.0;  // constant series, fitted exactly by slope 0
  } else {
    double ss_res = 0;
    for (long i = 0; i < m; ++i) {
      const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
      ss_res += r * r;
    }
    fit.r_squared = 1.0 - ss_res / syy;
  }
  return fit;
}

Orbitals apply_flow_operator(const Hamiltonian& H, const GreenSolver& solver,
                             const Orbitals& U, const Orbitals& V) {
  const Orbitals W = solver.solve_block(U);
  return U * inner_l2(H.grid, W, V) - W * inner_l2(H.grid, U, V);
}

Orbitals flow_rhs(const Hamiltonian& H, const GreenSolver& solver, const Orbitals& U) {
  const Orbitals W = solver.solve_block(U);
  return W * inner_l2(H.grid, U, U) - U * inner_l2(H.grid, W, U);
}

Orbitals integrate_flow_rk4(const Orbitals& U0, const Hamiltonian& H,
                            const GreenSolver& solver, double dt, double T) {
  if (dt <= 0 || T < 0) throw std::invalid_argument("integrate_flow_rk4: need dt > 0, T >= 0");
  const long steps = static_cast<long>(std::llround(T / dt));
  Orbitals U = U0;
  for (long n = 0; n < steps; ++n) {
    const Orbitals k1 = flow_rhs(H, solver, U);
    const Orbitals k2 = flow_rhs(H, solver, U + (0.5 * dt) * k1);
    const Orbitals k3 = flow_rhs(H, solver, U + (0.5 * dt) * k2);
    const Orbitals k4 = flow_rhs(H, solver, U + dt * k3);
    U += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (norm_l2(H.grid, U) > 1e3) {
      throw std::runtime_error("integrate_flow_rk4: blow-up at t = " +
                               std::to_string((n + 1) * dt));
    }
  }
  return U;
}

std::vector<std::vector<int>> eigenvalue_clusters(const Eigen::VectorXd& lambda,
                                                  double rel_gap) {
  std::vector<std::vector<int>> clusters;
  for (int i = 0; i < lambda.size(); ++i) {
    const bool close = i > 0 && (lambda[i] - lambda[i - 1]) <=
                                    rel_gap * std::max(1.0, std::abs(lambda[i]));
    if (close) {
      clusters.back().push_back(i);
    } else {
      clusters.push_back({i});
    }
  }
  return clusters;
}

StepObserver make_reference_observer(const Hamiltonian& H, const ReferencePack& pack) {
  return [&H, pack](const Orbitals& U, RunRecord& rec) {
    const auto d = subspace_distances(H, U, pack);
    rec.delta_L2 = d.delta_L2;
    rec.dist_class_a = d.dist_class_a;
  };
}

StepObserver make_replay_observer(const TensorGrid& grid, Orbitals U_end, bool with_columns) {
  return [grid, U_end = std::move(U_end), with_columns](const Orbitals& U, RunRecord& rec) {
    rec.err_U = relative_block_error(grid, U, U_end);
    if (with_columns) rec.column_err = column_errors(grid, U, U_end);
  };
}

}  // namespace orthoflow
