#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SparseCore>

#include <vector>

#include "stgp/errors.hpp"
#include "stgp/mesh.hpp"

namespace stgp {

/// Cotangent stiffness C (symmetric, positive semidefinite, zero row sums)
/// and lumped mass M. The surface Laplacian is Δu = -M⁻¹Cu.
struct LaplaceOperator {
  Eigen::SparseMatrix<double> stiffness;
  Eigen::VectorXd mass;

  Eigen::Index size() const { return mass.size(); }

  /// Δu = -M⁻¹Cu.
  Eigen::VectorXd apply(const Eigen::VectorXd& u) const {
    return -(stiffness * u).cwiseQuotient(mass);
  }
};

/// Builds the cotangent Laplacian with barycentric mass lumping (area/3 per
/// incident triangle).
inline LaplaceOperator cotan_laplacian(const TriMesh& mesh) {
  const Eigen::Index n = mesh.num_vertices();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(mesh.num_faces()) * 12);
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(n);

  for (Eigen::Index f = 0; f < mesh.num_faces(); ++f) {
    const int idx[3] = {mesh.faces()(f, 0), mesh.faces()(f, 1), mesh.faces()(f, 2)};
    const Eigen::Vector3d p[3] = {mesh.position(idx[0]), mesh.position(idx[1]),
                                  mesh.position(idx[2])};
    const double double_area = (p[1] - p[0]).cross(p[2] - p[0]).norm();
    if (!(double_area > 0.0)) {
      throw DegenerateFaceError("cotan_laplacian: zero-area face " + std::to_string(f));
    }
    for (int k = 0; k < 3; ++k) {
      // Angle at corner k is opposite edge (i, j).
      const int i = (k + 1) % 3;
      const int j = (k + 2) % 3;
      const Eigen::Vector3d a = p[i] - p[k];
      const Eigen::Vector3d b = p[j] - p[k];
      const double half_cot = 0.5 * a.dot(b) / double_area;
      triplets.emplace_back(idx[i], idx[j], -half_cot);
      triplets.emplace_back(idx[j], idx[i], -half_cot);
      triplets.emplace_back(idx[i], idx[i], half_cot);
      triplets.emplace_back(idx[j], idx[j], half_cot);
      mass(idx[k]) += double_area / 6.0;
    }
  }
  LaplaceOperator op;
  op.stiffness.resize(n, n);
  op.stiffness.setFromTriplets(triplets.begin(), triplets.end());
  op.stiffness.makeCompressed();
  op.mass = std::move(mass);
  return op;
}

/// Upper bound on the largest eigenvalue of M⁻¹C (Gershgorin).
inline double max_eigenvalue_bound(const LaplaceOperator& op) {
  double bound = 0.0;
  for (Eigen::Index col = 0; col < op.stiffness.outerSize(); ++col) {
    double row_abs = 0.0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(op.stiffness, col); it; ++it) {
      row_abs += std::abs(it.value());
    }
    // C is symmetric, so column sums equal row sums.
    bound = std::max(bound, row_abs / op.mass(col));
  }
  return bound;
}

}  // namespace stgp
