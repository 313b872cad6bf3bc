#pragma once

#include <Eigen/Dense>

#include <string>

#include "stgp/errors.hpp"

namespace stgp {

/// Cholesky factor of a symmetric positive-definite matrix, with the diagonal
/// jitter that was needed to obtain it.
class SpdFactor {
 public:
  SpdFactor() = default;
  SpdFactor(Eigen::LLT<Eigen::MatrixXd> llt, double jitter) : llt_(std::move(llt)), jitter_(jitter) {}

  Eigen::Index size() const { return llt_.rows(); }
  double jitter() const { return jitter_; }
  const Eigen::LLT<Eigen::MatrixXd>& llt() const { return llt_; }

  double log_determinant() const {
    return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
  }

  template <typename Rhs>
  Eigen::MatrixXd solve(const Eigen::MatrixBase<Rhs>& rhs) const {
    return llt_.solve(rhs);
  }

  Eigen::MatrixXd inverse() const {
    return llt_.solve(Eigen::MatrixXd::Identity(size(), size()));
  }

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double jitter_ = 0.0;
};

/// Factorizes `a`; on failure retries with 1e-8 × mean(diag) added to the
/// diagonal, escalating ×10 up to 1e-4 × mean(diag).
inline SpdFactor factorize_spd(Eigen::MatrixXd a, const std::string& what) {
  if (!a.allFinite()) throw NumericalError(what + ": matrix has non-finite entries");
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return SpdFactor(std::move(llt), 0.0);
  const double mean_diag = a.diagonal().mean();
  if (!(mean_diag > 0.0)) throw NumericalError(what + ": non-positive mean diagonal");
  for (double scale = 1e-8; scale <= 1e-4 * (1.0 + 1e-9); scale *= 10.0) {
    const double jitter = scale * mean_diag;
    Eigen::MatrixXd shifted = a;
    shifted.diagonal().array() += jitter;
    llt.compute(shifted);
    if (llt.info() == Eigen::Success) return SpdFactor(std::move(llt), jitter);
  }
  throw NumericalError(what + ": not positive definite after maximum jitter");
}

}  // namespace stgp
