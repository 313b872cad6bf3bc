#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "stgp/errors.hpp"
#include "stgp/kernels.hpp"
#include "stgp/linalg.hpp"
#include "stgp/optimize.hpp"

namespace stgp {

/// Observations on a full grid of training locations × training times.
/// `observations` is N_t × N_s: column i is the time series at locations[i],
/// so vec(observations) stacks time fastest.
struct TrainingSet {
  VertexList locations;
  std::vector<double> times;
  Eigen::MatrixXd observations;

  Eigen::Index num_locations() const { return static_cast<Eigen::Index>(locations.size()); }
  Eigen::Index num_times() const { return static_cast<Eigen::Index>(times.size()); }

  void validate(Eigen::Index num_vertices) const {
    if (locations.empty() || times.empty()) throw InputError("training set is empty");
    if (observations.rows() != num_times() || observations.cols() != num_locations()) {
      throw InputError("training observations must be N_t x N_s");
    }
    if (!observations.allFinite()) throw InputError("training observations are not finite");
    VertexList sorted = locations;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw InputError("training set has duplicate locations");
    }
    if (sorted.front() < 0 || sorted.back() >= num_vertices) {
      throw InputError("training location out of range");
    }
    for (std::size_t k = 1; k < times.size(); ++k) {
      if (!(times[k] > times[k - 1])) throw InputError("training times must be strictly increasing");
    }
  }
};

/// Negative log marginal likelihood split into data fit, complexity and constant.
struct NllTerms {
  double data_fit = 0.0;
  double complexity = 0.0;
  double constant = 0.0;
  double total() const { return data_fit + complexity + constant; }
};

/// Evaluates the Kronecker-structured likelihood for one training set,
/// caching the θ-independent pieces (eigenvector rows, distances, lags).
class LikelihoodEvaluator {
 public:
  LikelihoodEvaluator(const TrainingSet& data, SpatialCovariance spatial)
      : data_(data), spatial_(std::move(spatial)) {
    data_.validate(spatial_.num_vertices());
    const Eigen::Index ns = data_.num_locations(), nt = data_.num_times();
    if (spatial_.kind() == KernelKind::laplacian) {
      phi_ = detail::gather_rows(spatial_.basis()->eigenvectors, data_.locations);
    } else {
      const Eigen::MatrixXd p = detail::gather_rows(spatial_.mesh()->vertices(), data_.locations);
      distances_.resize(ns, ns);
      for (Eigen::Index i = 0; i < ns; ++i) {
        for (Eigen::Index j = 0; j < ns; ++j) distances_(i, j) = (p.row(i) - p.row(j)).norm();
      }
    }
    lags_.resize(nt, nt);
    for (Eigen::Index i = 0; i < nt; ++i) {
      for (Eigen::Index j = 0; j < nt; ++j) {
        lags_(i, j) = std::abs(data_.times[static_cast<std::size_t>(i)] -
                               data_.times[static_cast<std::size_t>(j)]);
      }
    }
  }

  const TrainingSet& data() const { return data_; }
  const SpatialCovariance& spatial() const { return spatial_; }

  /// K_s(X, X); the nugget is not included.
  Eigen::MatrixXd spatial_kernel_matrix(const HyperParams& theta) const {
    if (spatial_.kind() == KernelKind::laplacian) {
      const Eigen::VectorXd w = spectral_weights(*spatial_.basis(), theta);
      return phi_ * w.asDiagonal() * phi_.transpose();
    }
    return distances_.unaryExpr([&](double d) {
      return detail::matern32(d, theta.spatial_length, theta.spatial_scale);
    });
  }

  /// Σ_tr,s = K_s(X, X) + σ_{ε,s} I.
  Eigen::MatrixXd spatial_covariance(const HyperParams& theta) const {
    Eigen::MatrixXd k = spatial_kernel_matrix(theta);
    k.diagonal().array() += theta.spatial_nugget;
    return k;
  }

  /// Σ_tr,t = K_t(T, T) + σ_{ε,t} I.
  Eigen::MatrixXd temporal_covariance(const HyperParams& theta) const {
    Eigen::MatrixXd k = lags_.unaryExpr([&](double lag) {
      return detail::matern32(lag, theta.temporal_length, theta.temporal_scale);
    });
    k.diagonal().array() += theta.temporal_nugget;
    return k;
  }

  NllTerms terms(const HyperParams& theta) const {
    if (!theta.valid()) throw InputError("nll: invalid hyperparameters " + theta.describe());
    const SpdFactor fs = factorize_spd(spatial_covariance(theta), "spatial covariance " + theta.describe());
    const SpdFactor ft = factorize_spd(temporal_covariance(theta), "temporal covariance " + theta.describe());
    return terms(fs, ft);
  }

  NllTerms terms(const SpdFactor& spatial_factor, const SpdFactor& temporal_factor) const {
    const double ns = static_cast<double>(data_.num_locations());
    const double nt = static_cast<double>(data_.num_times());
    // Σ_t⁻¹ Y Σ_s⁻¹, using symmetry of Σ_s.
    const Eigen::MatrixXd left = temporal_factor.solve(data_.observations);
    const Eigen::MatrixXd weighted = spatial_factor.solve(left.transpose()).transpose();
    NllTerms t;
    t.data_fit = 0.5 * data_.observations.cwiseProduct(weighted).sum();
    t.complexity = 0.5 * (nt * spatial_factor.log_determinant() + ns * temporal_factor.log_determinant());
    t.constant = 0.5 * ns * nt * std::log(2.0 * std::numbers::pi);
    return t;
  }

  double operator()(const HyperParams& theta) const { return terms(theta).total(); }

 private:
  TrainingSet data_;
  SpatialCovariance spatial_;
  Eigen::MatrixXd phi_;
  Eigen::MatrixXd distances_;
  Eigen::MatrixXd lags_;
};

inline NllTerms nll_terms(const HyperParams& theta, const TrainingSet& data,
                          const SpatialCovariance& spatial) {
  return LikelihoodEvaluator(data, spatial).terms(theta);
}

inline double nll(const HyperParams& theta, const TrainingSet& data,
                  const SpatialCovariance& spatial) {
  return nll_terms(theta, data, spatial).total();
}

/// A GP conditioned on a training set at fixed hyperparameters. Immutable.
class FittedModel {
 public:
  FittedModel(std::shared_ptr<const TrainingSet> data, SpatialCovariance spatial, HyperParams theta)
      : data_(std::move(data)), spatial_(std::move(spatial)), theta_(theta) {
    if (!data_) throw InputError("model needs a training set");
    if (!theta_.valid()) throw InputError("model: invalid hyperparameters " + theta_.describe());
    const LikelihoodEvaluator eval(*data_, spatial_);
    spatial_factor_ = factorize_spd(eval.spatial_covariance(theta_), "spatial covariance " + theta_.describe());
    temporal_factor_ = factorize_spd(eval.temporal_covariance(theta_), "temporal covariance " + theta_.describe());
    const Eigen::MatrixXd left = temporal_factor_.solve(data_->observations);
    weights_ = spatial_factor_.solve(left.transpose()).transpose();
    nll_ = eval.terms(spatial_factor_, temporal_factor_).total();
  }

  const HyperParams& theta() const { return theta_; }
  const TrainingSet& data() const { return *data_; }
  std::shared_ptr<const TrainingSet> data_ptr() const { return data_; }
  const SpatialCovariance& spatial() const { return spatial_; }
  KernelKind kind() const { return spatial_.kind(); }
  const SpdFactor& spatial_factor() const { return spatial_factor_; }
  const SpdFactor& temporal_factor() const { return temporal_factor_; }
  /// Σ_t⁻¹ Y Σ_s⁻¹ (N_t × N_s).
  const Eigen::MatrixXd& weights() const { return weights_; }
  double nll() const { return nll_; }

 private:
  std::shared_ptr<const TrainingSet> data_;
  SpatialCovariance spatial_;
  HyperParams theta_;
  SpdFactor spatial_factor_;
  SpdFactor temporal_factor_;
  Eigen::MatrixXd weights_;
  double nll_ = 0.0;
};

/// Posterior mean of u on the query grid, |T*| × |X*|.
inline Eigen::MatrixXd posterior_mean(const FittedModel& model, std::span<const VertexId> query_vertices,
                                      std::span<const double> query_times) {
  const auto& data = model.data();
  const Eigen::MatrixXd ks = model.spatial()(model.theta(), query_vertices, data.locations);
  const Eigen::MatrixXd kt = temporal_kernel(query_times, data.times, model.theta());
  return kt * model.weights() * ks.transpose();
}

/// Posterior standard deviation of u on the query grid, |T*| × |X*|.
inline Eigen::MatrixXd posterior_std(const FittedModel& model, std::span<const VertexId> query_vertices,
                                     std::span<const double> query_times) {
  const auto& data = model.data();
  const auto& theta = model.theta();
  const Eigen::MatrixXd ks = model.spatial()(theta, query_vertices, data.locations);
  const Eigen::MatrixXd kt = temporal_kernel(query_times, data.times, theta);
  const Eigen::VectorXd explained_s =
      ks.cwiseProduct(model.spatial_factor().solve(ks.transpose()).transpose()).rowwise().sum();
  const Eigen::VectorXd explained_t =
      kt.cwiseProduct(model.temporal_factor().solve(kt.transpose()).transpose()).rowwise().sum();
  const Eigen::VectorXd prior_s = model.spatial().diagonal(theta, query_vertices);
  const double prior_t = theta.temporal_scale;

  Eigen::MatrixXd out(kt.rows(), ks.rows());
  for (Eigen::Index x = 0; x < out.cols(); ++x) {
    for (Eigen::Index t = 0; t < out.rows(); ++t) {
      const double prior = prior_s(x) * prior_t;
      double var = prior - explained_s(x) * explained_t(t);
      if (var < 0.0) {
        if (var < -1e-10 * std::max(1.0, prior)) {
          throw NumericalError("posterior_std: negative variance " + std::to_string(var) +
                               " at query (" + std::to_string(x) + ", " + std::to_string(t) + ")");
        }
        var = 0.0;
      }
      out(t, x) = std::sqrt(var);
    }
  }
  return out;
}

struct FitConfig {
  /// Extra starting points, tried before the default grid.
  std::vector<HyperParams> initial_points;
  /// Whether to add the 8-point log-grid of default starts.
  bool use_default_grid = true;
  NelderMeadOptions optimizer{};
  std::uint64_t seed = 0;
};

namespace detail {

constexpr double kLogBound = 30.0;

// Optimizer coordinates: log of (l_s, σ_{ε,s}, l_t, σ_a, σ_{ε,t}) with σ_m = 1.
inline Eigen::VectorXd to_search_space(HyperParams theta) {
  // Move σ_m into the temporal factor; Σ_s ⊗ Σ_t is unchanged.
  const double c = theta.spatial_scale;
  theta.spatial_nugget /= c;
  theta.temporal_scale *= c;
  theta.temporal_nugget *= c;
  constexpr double floor = 1e-12;
  Eigen::VectorXd x(5);
  x << std::log(theta.spatial_length), std::log(std::max(theta.spatial_nugget, floor)),
      std::log(theta.temporal_length), std::log(theta.temporal_scale),
      std::log(std::max(theta.temporal_nugget, floor));
  return x;
}

inline HyperParams from_search_space(const Eigen::VectorXd& x) {
  HyperParams theta;
  theta.spatial_length = std::exp(x(0));
  theta.spatial_scale = 1.0;
  theta.spatial_nugget = std::exp(x(1));
  theta.temporal_length = std::exp(x(2));
  theta.temporal_scale = std::exp(x(3));
  theta.temporal_nugget = std::exp(x(4));
  return theta;
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

// Characteristic spatial length of the geometry behind a covariance.
inline double spatial_length_scale(const SpatialCovariance& spatial) {
  if (spatial.kind() == KernelKind::laplacian) {
    const auto& ev = spatial.basis()->eigenvalues;
    for (Eigen::Index j = 0; j < ev.size(); ++j) {
      if (ev(j) > 1e-8 * std::max(1.0, ev(ev.size() - 1))) return 1.0 / std::sqrt(ev(j));
    }
    return 1.0;
  }
  return spatial.mesh()->bounding_box_diagonal() / (2.0 * std::sqrt(3.0));
}

}  // namespace detail

/// Default multi-start points: a 2×2×2 log-grid over spatial length, temporal
/// length and noise ratio, each jittered by a seeded log-uniform factor.
inline std::vector<HyperParams> default_starts(const TrainingSet& data, const SpatialCovariance& spatial,
                                               std::uint64_t seed) {
  const double radius = detail::spatial_length_scale(spatial);
  const std::array<double, 2> length_factors =
      spatial.kind() == KernelKind::laplacian ? std::array<double, 2>{0.03, 0.15}
                                              : std::array<double, 2>{0.2, 1.0};
  std::vector<double> steps;
  for (std::size_t k = 1; k < data.times.size(); ++k) steps.push_back(data.times[k] - data.times[k - 1]);
  const double dt = steps.empty() ? 1.0 : detail::median_of(steps);
  const double second_moment = std::max(data.observations.squaredNorm() /
                                            static_cast<double>(data.observations.size()),
                                        1e-12);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);

  std::vector<HyperParams> starts;
  for (double ls : length_factors) {
    for (double lt : {3.0, 15.0}) {
      for (double ratio : {0.01, 0.1}) {
        HyperParams theta;
        theta.spatial_scale = 1.0;
        theta.spatial_length = radius * ls * std::exp(jitter(rng));
        theta.temporal_length = dt * lt * std::exp(jitter(rng));
        const double prior_s =
            spatial.diagonal(theta, data.locations).mean();
        theta.spatial_nugget = ratio * prior_s;
        theta.temporal_scale = second_moment / std::max(prior_s, 1e-300) / (1.0 + ratio) / (1.0 + ratio);
        theta.temporal_nugget = ratio * theta.temporal_scale;
        starts.push_back(theta);
      }
    }
  }
  return starts;
}

/// Maximum-likelihood fit by multi-start Nelder–Mead in log space with σ_m = 1.
inline FittedModel fit(std::shared_ptr<const TrainingSet> data, const SpatialCovariance& spatial,
                       const FitConfig& config = {}) {
  if (!data) throw InputError("fit: missing training set");
  const LikelihoodEvaluator eval(*data, spatial);
  std::vector<HyperParams> starts = config.initial_points;
  if (config.use_default_grid) {
    const auto grid = default_starts(*data, spatial, config.seed);
    starts.insert(starts.end(), grid.begin(), grid.end());
  }
  if (starts.empty()) throw InputError("fit: no starting points");

  auto objective = [&](const Eigen::VectorXd& x) {
    if ((x.array().abs() > detail::kLogBound).any()) return std::numeric_limits<double>::infinity();
    try {
      return eval(detail::from_search_space(x));
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  Eigen::VectorXd best_x;
  double best_value = std::numeric_limits<double>::infinity();
  for (const auto& start : starts) {
    if (!start.valid()) throw InputError("fit: invalid start " + start.describe());
    const auto result = nelder_mead(objective, detail::to_search_space(start), config.optimizer);
    if (result.value < best_value) {
      best_value = result.value;
      best_x = result.argmin;
    }
  }
  if (!std::isfinite(best_value)) {
    throw NumericalError("fit: every start failed to factorize");
  }
  return FittedModel(std::move(data), spatial, detail::from_search_space(best_x));
}

}  // namespace stgp
