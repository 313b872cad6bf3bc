#pragma once

#include <Eigen/Core>

#include "stgp/errors.hpp"

namespace stgp {

/// ‖predicted − reference‖_F / ‖reference‖_F.
inline double relative_error(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& reference) {
  if (predicted.rows() != reference.rows() || predicted.cols() != reference.cols()) {
    throw InputError("relative_error: shape mismatch");
  }
  const double denom = reference.norm();
  if (!(denom > 0.0)) throw InputError("relative_error: reference field has zero norm");
  return (predicted - reference).norm() / denom;
}

}  // namespace stgp
