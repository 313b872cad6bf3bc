#pragma once

#include <Eigen/Dense>

#include "stgp/errors.hpp"
#include "stgp/laplacian.hpp"

namespace stgp {

/// The J lowest eigenpairs of Cφ = λMφ, with ΦᵀMΦ = I and λ ascending.
struct SpectralBasis {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;  // N x J
  Eigen::VectorXd mass;

  Eigen::Index size() const { return eigenvalues.size(); }
  Eigen::Index num_vertices() const { return eigenvectors.rows(); }

  /// Leading `count` eigenpairs.
  SpectralBasis truncated(Eigen::Index count) const {
    if (count < 1 || count > size()) {
      throw InputError("truncated: eigenpair count " + std::to_string(count) +
                       " outside [1, " + std::to_string(size()) + "]");
    }
    return SpectralBasis{eigenvalues.head(count), eigenvectors.leftCols(count), mass};
  }
};

/// Dense generalized eigensolve through the symmetric transform
/// M^{-1/2} C M^{-1/2}. Each eigenvector's largest-magnitude entry is made positive.
inline SpectralBasis spectral_basis(const LaplaceOperator& op, Eigen::Index count) {
  const Eigen::Index n = op.size();
  if (count < 1 || count > n) {
    throw InputError("spectral_basis: eigenpair count " + std::to_string(count) +
                     " outside [1, " + std::to_string(n) + "]");
  }
  if ((op.mass.array() <= 0.0).any()) throw InputError("spectral_basis: non-positive mass entry");

  const Eigen::VectorXd inv_sqrt_mass = op.mass.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd a = inv_sqrt_mass.asDiagonal() * Eigen::MatrixXd(op.stiffness) *
                      inv_sqrt_mass.asDiagonal();
  a = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
  if (solver.info() != Eigen::Success) throw NumericalError("spectral_basis: eigensolver failed");

  SpectralBasis basis;
  basis.eigenvalues = solver.eigenvalues().head(count);
  basis.eigenvectors = inv_sqrt_mass.asDiagonal() * solver.eigenvectors().leftCols(count);
  for (Eigen::Index j = 0; j < count; ++j) {
    Eigen::Index arg = 0;
    basis.eigenvectors.col(j).cwiseAbs().maxCoeff(&arg);
    if (basis.eigenvectors(arg, j) < 0.0) basis.eigenvectors.col(j) *= -1.0;
  }
  basis.mass = op.mass;
  return basis;
}

}  // namespace stgp
