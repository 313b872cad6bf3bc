#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <string_view>

#include "stgp/errors.hpp"
#include "stgp/mesh.hpp"
#include "stgp/spectral.hpp"

namespace stgp {

/// Matérn smoothness, fixed for both spatial and temporal kernels.
inline constexpr double kSmoothness = 1.5;
/// Spectral dimension of a surface.
inline constexpr double kSurfaceDimension = 2.0;

struct HyperParams {
  double spatial_length = 1.0;   // l_s
  double spatial_scale = 1.0;    // σ_m
  double spatial_nugget = 0.01;  // σ_{ε,s}
  double temporal_length = 1.0;  // l_t
  double temporal_scale = 1.0;   // σ_a
  double temporal_nugget = 0.01; // σ_{ε,t}

  bool valid() const {
    return spatial_length > 0 && spatial_scale > 0 && spatial_nugget >= 0 && temporal_length > 0 &&
           temporal_scale > 0 && temporal_nugget >= 0 &&
           std::isfinite(spatial_length + spatial_scale + spatial_nugget + temporal_length +
                         temporal_scale + temporal_nugget);
  }

  std::string describe() const {
    return "{l_s=" + std::to_string(spatial_length) + ", sigma_m=" + std::to_string(spatial_scale) +
           ", sigma_eps_s=" + std::to_string(spatial_nugget) +
           ", l_t=" + std::to_string(temporal_length) + ", sigma_a=" + std::to_string(temporal_scale) +
           ", sigma_eps_t=" + std::to_string(temporal_nugget) + "}";
  }

  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

/// Matérn spectral density evaluated at √λ, with the 4π²λ frequency term.
inline double matern_spectral_density(double eigenvalue, double length,
                                      double nu = kSmoothness, double dim = kSurfaceDimension) {
  if (!std::isfinite(eigenvalue) || !std::isfinite(length) || !std::isfinite(nu) ||
      !std::isfinite(dim)) {
    throw InputError("matern_spectral_density: non-finite input");
  }
  if (eigenvalue < 0.0 || length <= 0.0 || nu <= 0.0 || dim <= 0.0) {
    throw InputError("matern_spectral_density: need eigenvalue >= 0 and positive length");
  }
  constexpr double pi = std::numbers::pi;
  const double coef = std::pow(2.0, dim) * std::pow(pi, 0.5 * dim) * std::tgamma(nu + 0.5 * dim) *
                      std::pow(2.0 * nu, nu) / (std::tgamma(nu) * std::pow(length, 2.0 * nu));
  return coef * std::pow(2.0 * nu / (length * length) + 4.0 * pi * pi * eigenvalue,
                         -(nu + 0.5 * dim));
}

/// σ_m S(√λ_j) for every eigenpair. Eigenvalues within round-off below zero are
/// treated as zero.
inline Eigen::VectorXd spectral_weights(const SpectralBasis& basis, const HyperParams& theta) {
  Eigen::VectorXd w(basis.size());
  for (Eigen::Index j = 0; j < basis.size(); ++j) {
    w(j) = theta.spatial_scale *
           matern_spectral_density(std::max(0.0, basis.eigenvalues(j)), theta.spatial_length);
  }
  return w;
}

namespace detail {

inline Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, std::span<const VertexId> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const VertexId r = rows[i];
    if (r < 0 || r >= m.rows()) throw InputError("vertex id " + std::to_string(r) + " out of range");
    out.row(static_cast<Eigen::Index>(i)) = m.row(r);
  }
  return out;
}

inline double matern32(double distance, double length, double scale) {
  const double r = std::sqrt(3.0) * distance / length;
  return scale * (1.0 + r) * std::exp(-r);
}

}  // namespace detail

/// Laplacian-eigenbasis kernel Φ_rows diag(σ_m S(√λ)) Φ_colsᵀ.
inline Eigen::MatrixXd spatial_kernel(const SpectralBasis& basis, const HyperParams& theta,
                                      std::span<const VertexId> rows,
                                      std::span<const VertexId> cols) {
  const Eigen::VectorXd w = spectral_weights(basis, theta);
  const Eigen::MatrixXd phi_rows = detail::gather_rows(basis.eigenvectors, rows);
  const Eigen::MatrixXd phi_cols = detail::gather_rows(basis.eigenvectors, cols);
  return phi_rows * w.asDiagonal() * phi_cols.transpose();
}

/// Matérn-3/2 over time lags.
inline Eigen::MatrixXd temporal_kernel(std::span<const double> times_a,
                                       std::span<const double> times_b, const HyperParams& theta) {
  Eigen::MatrixXd k(static_cast<Eigen::Index>(times_a.size()),
                    static_cast<Eigen::Index>(times_b.size()));
  for (std::size_t i = 0; i < times_a.size(); ++i) {
    for (std::size_t j = 0; j < times_b.size(); ++j) {
      k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = detail::matern32(
          std::abs(times_a[i] - times_b[j]), theta.temporal_length, theta.temporal_scale);
    }
  }
  return k;
}

/// Baseline: Matérn-3/2 over straight-line distances between vertices.
inline Eigen::MatrixXd euclidean_spatial_kernel(const TriMesh& mesh, const HyperParams& theta,
                                                std::span<const VertexId> rows,
                                                std::span<const VertexId> cols) {
  const Eigen::MatrixXd p_rows = detail::gather_rows(mesh.vertices(), rows);
  const Eigen::MatrixXd p_cols = detail::gather_rows(mesh.vertices(), cols);
  Eigen::MatrixXd k(p_rows.rows(), p_cols.rows());
  for (Eigen::Index i = 0; i < k.rows(); ++i) {
    for (Eigen::Index j = 0; j < k.cols(); ++j) {
      k(i, j) = detail::matern32((p_rows.row(i) - p_cols.row(j)).norm(), theta.spatial_length,
                                 theta.spatial_scale);
    }
  }
  return k;
}

enum class KernelKind { laplacian, euclidean };

inline std::string_view to_string(KernelKind kind) {
  return kind == KernelKind::laplacian ? "laplacian" : "euclidean";
}

inline KernelKind parse_kernel_kind(std::string_view name) {
  if (name == "laplacian" || name == "G-ST-GP") return KernelKind::laplacian;
  if (name == "euclidean" || name == "E-ST-GP") return KernelKind::euclidean;
  throw InputError("unknown kernel kind '" + std::string(name) + "'");
}

/// The spatial covariance of a model: either the eigenbasis kernel or the
/// Euclidean baseline, bound to the geometry it needs.
class SpatialCovariance {
 public:
  static SpatialCovariance laplacian(std::shared_ptr<const SpectralBasis> basis) {
    if (!basis) throw InputError("laplacian covariance needs a spectral basis");
    SpatialCovariance c;
    c.kind_ = KernelKind::laplacian;
    c.basis_ = std::move(basis);
    return c;
  }

  static SpatialCovariance euclidean(std::shared_ptr<const TriMesh> mesh) {
    if (!mesh) throw InputError("euclidean covariance needs a mesh");
    SpatialCovariance c;
    c.kind_ = KernelKind::euclidean;
    c.mesh_ = std::move(mesh);
    return c;
  }

  KernelKind kind() const { return kind_; }
  const SpectralBasis* basis() const { return basis_.get(); }
  const TriMesh* mesh() const { return mesh_.get(); }

  Eigen::Index num_vertices() const {
    return kind_ == KernelKind::laplacian ? basis_->num_vertices() : mesh_->num_vertices();
  }

  Eigen::MatrixXd operator()(const HyperParams& theta, std::span<const VertexId> rows,
                             std::span<const VertexId> cols) const {
    return kind_ == KernelKind::laplacian ? spatial_kernel(*basis_, theta, rows, cols)
                                          : euclidean_spatial_kernel(*mesh_, theta, rows, cols);
  }

  /// k(x, x) for each listed vertex.
  Eigen::VectorXd diagonal(const HyperParams& theta, std::span<const VertexId> rows) const {
    if (kind_ == KernelKind::euclidean) {
      for (VertexId r : rows) {
        if (r < 0 || r >= mesh_->num_vertices()) {
          throw InputError("vertex id " + std::to_string(r) + " out of range");
        }
      }
      return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(rows.size()), theta.spatial_scale);
    }
    const Eigen::VectorXd w = spectral_weights(*basis_, theta);
    const Eigen::MatrixXd phi = detail::gather_rows(basis_->eigenvectors, rows);
    return phi.array().square().matrix() * w;
  }

 private:
  SpatialCovariance() = default;

  KernelKind kind_ = KernelKind::laplacian;
  std::shared_ptr<const SpectralBasis> basis_;
  std::shared_ptr<const TriMesh> mesh_;
};

}  // namespace stgp
