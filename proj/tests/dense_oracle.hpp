#pragma once

// Reference implementations on the full N_s·N_t covariance. Slow, simple, and
// deliberately free of Kronecker identities.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "stgp/gp.hpp"

namespace stgp::test {

struct Instance {
  HyperParams theta;
  TrainingSet data;
};

inline Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

inline Eigen::VectorXd vec(const Eigen::MatrixXd& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

/// Random θ, ≤ max_s distinct locations, ≤ max_t irregular times, N(0,1) data.
inline Instance random_instance(std::mt19937_64& rng, Eigen::Index num_vertices, int max_s, int max_t) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto log_uniform = [&](double lo, double hi) { return lo * std::pow(hi / lo, unit(rng)); };
  Instance inst;
  inst.theta.spatial_length = log_uniform(0.05, 0.5);
  inst.theta.spatial_scale = log_uniform(0.5, 2.0);
  inst.theta.spatial_nugget = log_uniform(0.01, 0.5);
  inst.theta.temporal_length = log_uniform(0.3, 3.0);
  inst.theta.temporal_scale = log_uniform(0.5, 2.0);
  inst.theta.temporal_nugget = log_uniform(0.01, 0.5);

  const int ns = std::uniform_int_distribution<int>(2, max_s)(rng);
  const int nt = std::uniform_int_distribution<int>(1, max_t)(rng);
  std::uniform_int_distribution<VertexId> pick(0, num_vertices - 1);
  while (static_cast<int>(inst.data.locations.size()) < ns) {
    const VertexId v = pick(rng);
    if (std::find(inst.data.locations.begin(), inst.data.locations.end(), v) == inst.data.locations.end()) {
      inst.data.locations.push_back(v);
    }
  }
  double t = unit(rng);
  for (int k = 0; k < nt; ++k) {
    inst.data.times.push_back(t);
    t += 0.2 + unit(rng);
  }
  std::normal_distribution<double> normal;
  inst.data.observations = Eigen::MatrixXd::NullaryExpr(nt, ns, [&] { return normal(rng); });
  return inst;
}

inline Eigen::MatrixXd spatial_cov(const HyperParams& th, const TrainingSet& d, const SpatialCovariance& cov) {
  Eigen::MatrixXd k = cov(th, d.locations, d.locations);
  k.diagonal().array() += th.spatial_nugget;
  return k;
}

inline Eigen::MatrixXd temporal_cov(const HyperParams& th, const TrainingSet& d) {
  Eigen::MatrixXd k = temporal_kernel(d.times, d.times, th);
  k.diagonal().array() += th.temporal_nugget;
  return k;
}

/// Full joint covariance of vec(Y), time fastest.
inline Eigen::MatrixXd joint_cov(const HyperParams& th, const TrainingSet& d, const SpatialCovariance& cov) {
  return kron(spatial_cov(th, d, cov), temporal_cov(th, d));
}

inline double dense_nll(const HyperParams& th, const TrainingSet& d, const SpatialCovariance& cov) {
  const Eigen::MatrixXd sigma = joint_cov(th, d, cov);
  const Eigen::VectorXd y = vec(d.observations);
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(sigma);
  const double logdet = lu.matrixLU().diagonal().array().abs().log().sum();
  const double n = static_cast<double>(y.size());
  return 0.5 * y.dot(lu.solve(y)) + 0.5 * logdet + 0.5 * n * std::log(2 * std::numbers::pi);
}

struct DensePosterior {
  Eigen::MatrixXd mean;      // |T*| × |X*|
  Eigen::MatrixXd variance;  // |T*| × |X*|
};

inline DensePosterior dense_posterior(const HyperParams& th, const TrainingSet& d, const SpatialCovariance& cov,
                                      const VertexList& qx, const std::vector<double>& qt) {
  const Eigen::MatrixXd sigma = joint_cov(th, d, cov);
  const Eigen::MatrixXd cross = kron(cov(th, qx, d.locations), temporal_kernel(qt, d.times, th));
  const Eigen::MatrixXd prior = kron(cov(th, qx, qx), temporal_kernel(qt, qt, th));
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(sigma);
  const Eigen::VectorXd mean = cross * lu.solve(vec(d.observations));
  const Eigen::VectorXd var = (prior - cross * lu.solve(cross.transpose())).diagonal();
  const auto rows = static_cast<Eigen::Index>(qt.size());
  const auto cols = static_cast<Eigen::Index>(qx.size());
  return {Eigen::Map<const Eigen::MatrixXd>(mean.data(), rows, cols),
          Eigen::Map<const Eigen::MatrixXd>(var.data(), rows, cols)};
}

/// LOO residuals from the block formula on the dense inverse.
inline Eigen::MatrixXd dense_block_loo(const HyperParams& th, const TrainingSet& d, const SpatialCovariance& cov) {
  const Eigen::MatrixXd inv = joint_cov(th, d, cov).inverse();
  const Eigen::VectorXd alpha = inv * vec(d.observations);
  const Eigen::Index nt = d.num_times();
  Eigen::MatrixXd r(nt, d.num_locations());
  for (Eigen::Index i = 0; i < d.num_locations(); ++i) {
    r.col(i) = inv.block(i * nt, i * nt, nt, nt).fullPivLu().solve(alpha.segment(i * nt, nt));
  }
  return r;
}

/// LOO residuals by conditioning location i on all other locations, one
/// location at a time, with the joint covariance.
inline Eigen::MatrixXd naive_loo(const HyperParams& th, const TrainingSet& d, const SpatialCovariance& cov) {
  const Eigen::Index ns = d.num_locations(), nt = d.num_times();
  const Eigen::MatrixXd st = temporal_cov(th, d);
  Eigen::MatrixXd r(nt, ns);
  for (Eigen::Index i = 0; i < ns; ++i) {
    TrainingSet rest;
    rest.times = d.times;
    rest.observations.resize(nt, ns - 1);
    for (Eigen::Index k = 0, c = 0; k < ns; ++k) {
      if (k == i) continue;
      rest.locations.push_back(d.locations[static_cast<std::size_t>(k)]);
      rest.observations.col(c++) = d.observations.col(k);
    }
    const VertexList held = {d.locations[static_cast<std::size_t>(i)]};
    const Eigen::MatrixXd cross = kron(cov(th, held, rest.locations), st);
    const Eigen::VectorXd pred = cross * joint_cov(th, rest, cov).fullPivLu().solve(vec(rest.observations));
    r.col(i) = d.observations.col(i) - pred;
  }
  return r;
}

/// One draw of Y with vec(Y) ~ N(0, Σ_s ⊗ Σ_t) on a regular grid.
inline TrainingSet sample_from_prior(std::mt19937_64& rng, const HyperParams& th, const SpatialCovariance& cov,
                                     int ns, int nt) {
  TrainingSet d;
  const Eigen::Index stride = cov.num_vertices() / ns;
  for (int i = 0; i < ns; ++i) d.locations.push_back(static_cast<VertexId>(i) * stride);
  for (int k = 0; k < nt; ++k) d.times.push_back(k);
  const Eigen::MatrixXd ls = spatial_cov(th, d, cov).llt().matrixL();
  const Eigen::MatrixXd lt = temporal_cov(th, d).llt().matrixL();
  std::normal_distribution<double> normal;
  const Eigen::MatrixXd z = Eigen::MatrixXd::NullaryExpr(nt, ns, [&] { return normal(rng); });
  d.observations = lt * z * ls.transpose();
  return d;
}

}  // namespace stgp::test
