#include "orthoflow/smallmat.hpp"

#include <stdexcept>

namespace orthoflow::smallmat {

SymEig sym_eig(const Eigen::MatrixXd& S) {
  if (S.rows() != S.cols()) throw std::invalid_argument("sym_eig: square matrix required");
  const double nrm = S.norm();
  const double asym = (S - S.transpose()).norm();
  if (nrm > 0 && asym > 1e-8 * nrm) {
    throw std::invalid_argument("sym_eig: input asymmetry exceeds 1e-8 * ||S||");
  }
  Eigen::MatrixXd sym = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) throw std::runtime_error("sym_eig: eigensolver did not converge");
  return {es.eigenvalues(), es.eigenvectors()};
}

Eigen::MatrixXd chol_solve(const Eigen::MatrixXd& M, const Eigen::MatrixXd& RHS) {
  if (M.rows() != M.cols() || M.rows() != RHS.rows()) {
    throw std::invalid_argument("chol_solve: shape mismatch");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (M + M.transpose()));
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("chol_solve: matrix not positive definite");
  }
  return llt.solve(RHS);
}

Svd svd(const Eigen::MatrixXd& S) {
  Eigen::JacobiSVD<Eigen::MatrixXd> d(S, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {d.matrixU(), d.singularValues(), d.matrixV()};
}

Eigen::MatrixXd procrustes(const Eigen::MatrixXd& Sab) {
  auto d = svd(Sab);
  return d.left * d.right.transpose();
}

}  // namespace orthoflow::smallmat
