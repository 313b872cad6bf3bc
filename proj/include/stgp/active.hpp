#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stgp/errors.hpp"
#include "stgp/geodesic.hpp"
#include "stgp/gp.hpp"
#include "stgp/metrics.hpp"

namespace stgp {

struct LooResult {
  double tau2 = 0.0;
  Eigen::MatrixXd residuals;  // N_t × n
};

/// Leave-one-location-out residuals without refitting. With Σ = Σ_s ⊗ Σ_t the
/// block formula collapses to residual_i = (Y Σ_s⁻¹)_{:,i} / (Σ_s⁻¹)_{ii}.
inline LooResult loo_cv_error(const FittedModel& model) {
  const auto& data = model.data();
  const Eigen::Index n = data.num_locations();
  if (n < 2) throw InputError("loo_cv_error: need at least two training locations");
  const Eigen::MatrixXd spatial_inverse = model.spatial_factor().inverse();
  LooResult out;
  out.residuals = data.observations * spatial_inverse;
  for (Eigen::Index i = 0; i < n; ++i) out.residuals.col(i) /= spatial_inverse(i, i);
  out.tau2 = out.residuals.squaredNorm() / static_cast<double>(n);
  return out;
}

struct Weights {
  double space_filling = 0.5;  // α_{n,1}
  double uncertainty = 0.5;    // α_{n,2}
};

/// α₁ = τ²/(τ²+σ²), α₂ = σ²/(τ²+σ²).
inline Weights adaptive_weights(double tau2, double noise_variance) {
  if (!(tau2 >= 0.0) || !(noise_variance >= 0.0)) {
    throw InputError("adaptive_weights: inputs must be nonnegative");
  }
  const double total = tau2 + noise_variance;
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw InputError("adaptive_weights: tau2 + noise variance must be positive and finite");
  }
  const double a1 = tau2 / total;
  return {a1, 1.0 - a1};
}

/// Mean posterior standard deviation over the training times, per candidate.
inline Eigen::VectorXd uncertainty_score(const FittedModel& model, std::span<const VertexId> candidates) {
  if (candidates.empty()) return {};
  return posterior_std(model, candidates, model.data().times).colwise().mean().transpose();
}

/// Minimum geodesic distance from each candidate to the measured set.
inline Eigen::VectorXd space_filling_score(const Eigen::VectorXd& distance_to_measured,
                                           std::span<const VertexId> candidates) {
  Eigen::VectorXd s(static_cast<Eigen::Index>(candidates.size()));
  for (std::size_t k = 0; k < candidates.size(); ++k) s(static_cast<Eigen::Index>(k)) = distance_to_measured(candidates[k]);
  return s;
}

inline Eigen::VectorXd space_filling_score(const EdgeGraph& graph, const VertexList& measured,
                                           std::span<const VertexId> candidates) {
  if (measured.empty()) throw InputError("space_filling_score: measured set is empty");
  return space_filling_score(graph.distances_from(measured), candidates);
}

/// Greedy batch under α₁·(distance/max) + α₂·(uncertainty/max). The distance
/// term is updated after every pick; uncertainty stays frozen within the
/// batch. Ties go to the lowest vertex id.
inline VertexList select_next(const EdgeGraph& graph, const VertexList& measured,
                              VertexList candidates, Eigen::VectorXd uncertainty, Weights weights,
                              std::size_t batch_size) {
  if (candidates.empty()) throw InputError("select_next: empty candidate set");
  if (candidates.size() < batch_size) throw InputError("select_next: fewer candidates than batch size");
  if (uncertainty.size() != static_cast<Eigen::Index>(candidates.size())) {
    throw InputError("select_next: one uncertainty score per candidate required");
  }
  if (measured.empty() && weights.space_filling > 0.0) {
    throw InputError("select_next: distance term needs a nonempty measured set");
  }
  // Sort candidates by id so index order is the tie-break order.
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return candidates[a] < candidates[b]; });
  VertexList ids(candidates.size());
  Eigen::VectorXd unc(uncertainty.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    ids[k] = candidates[order[k]];
    unc(static_cast<Eigen::Index>(k)) = uncertainty(static_cast<Eigen::Index>(order[k]));
  }

  Eigen::VectorXd distance = measured.empty()
                                 ? Eigen::VectorXd::Zero(graph.num_vertices())
                                 : graph.distances_from(measured);
  std::vector<char> taken(ids.size(), 0);
  VertexList picked;
  for (std::size_t b = 0; b < batch_size; ++b) {
    double dmax = 0.0, umax = 0.0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (taken[k]) continue;
      dmax = std::max(dmax, distance(ids[k]));
      umax = std::max(umax, unc(static_cast<Eigen::Index>(k)));
    }
    std::size_t best = ids.size();
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (taken[k]) continue;
      const double d = dmax > 0.0 ? distance(ids[k]) / dmax : 0.0;
      const double u = umax > 0.0 ? unc(static_cast<Eigen::Index>(k)) / umax : 0.0;
      const double score = weights.space_filling * d + weights.uncertainty * u;
      if (score > best_score) {
        best_score = score;
        best = k;
      }
    }
    taken[best] = 1;
    picked.push_back(ids[best]);
    if (b + 1 < batch_size && weights.space_filling > 0.0) {
      distance = distance.cwiseMin(graph.distances_from({ids[best]}));
    }
  }
  return picked;
}

/// Uniform draw without replacement.
inline VertexList select_random(const VertexList& candidates, std::size_t batch_size, std::mt19937_64& rng) {
  if (candidates.size() < batch_size) throw InputError("select_random: fewer candidates than batch size");
  VertexList pool = candidates;
  std::sort(pool.begin(), pool.end());
  VertexList picked;
  for (std::size_t b = 0; b < batch_size; ++b) {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    const std::size_t k = pick(rng);
    picked.push_back(pool[k]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return picked;
}

enum class Strategy { adaptive, fixed, uncertainty, space_filling, random };

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::adaptive: return "A-AL";
    case Strategy::fixed: return "F-AL";
    case Strategy::uncertainty: return "U-AL";
    case Strategy::space_filling: return "S-AL";
    case Strategy::random: return "R-AL";
  }
  return "?";
}

inline Strategy parse_strategy(std::string_view name) {
  if (name == "A-AL") return Strategy::adaptive;
  if (name == "F-AL") return Strategy::fixed;
  if (name == "U-AL" || name == "V-AL") return Strategy::uncertainty;
  if (name == "S-AL") return Strategy::space_filling;
  if (name == "R-AL") return Strategy::random;
  throw InputError("unknown active-learning strategy '" + std::string(name) + "'");
}

struct ALConfig {
  Strategy strategy = Strategy::adaptive;
  double gamma = 1.0;  // α₁/α₂ for F-AL
  std::size_t batch_size = 3;
  std::size_t rounds = 30;
  std::size_t initial_count = 50;
  std::uint64_t seed = 0;
  bool refit_each_round = true;
  /// Refits also try the default multi-start grid, not only the previous θ.
  bool refit_with_grid = false;
  FitConfig fit{};
};

struct ALRound {
  std::size_t round = 0;
  std::size_t n_plus = 0;
  double re = 0.0;
  double tau2 = 0.0;
  double sigma2_eps_s = 0.0;
  Weights weights;
  VertexList picked;
};

struct ALHistory {
  Strategy strategy = Strategy::adaptive;
  VertexList initial;
  double initial_re = 0.0;
  std::vector<ALRound> rounds;
  HyperParams final_theta;

  double final_re() const { return rounds.empty() ? initial_re : rounds.back().re; }
};

/// Selection weights a strategy uses given the adaptive ones.
inline Weights strategy_weights(const ALConfig& config, Weights adaptive) {
  switch (config.strategy) {
    case Strategy::adaptive: return adaptive;
    case Strategy::fixed: return {config.gamma / (1.0 + config.gamma), 1.0 / (1.0 + config.gamma)};
    case Strategy::uncertainty: return {0.0, 1.0};
    case Strategy::space_filling: return {1.0, 0.0};
    case Strategy::random: return adaptive;  // recorded only
  }
  return adaptive;
}

/// Sequential sensor placement over a fully simulated field. Observations are
/// revealed only at measured vertices; the reference field is used for RE.
class ActiveLearner {
 public:
  ActiveLearner(Eigen::MatrixXd truth, Eigen::MatrixXd observed, std::vector<double> times,
                SpatialCovariance spatial, std::shared_ptr<const EdgeGraph> graph, ALConfig config)
      : truth_(std::move(truth)), observed_(std::move(observed)), times_(std::move(times)),
        spatial_(std::move(spatial)), graph_(std::move(graph)), config_(std::move(config)),
        rng_(config_.seed) {
    const Eigen::Index n = truth_.cols();
    if (!graph_ || graph_->num_vertices() != n || spatial_.num_vertices() != n) {
      throw InputError("active learning: geometry does not match the field");
    }
    if (observed_.rows() != truth_.rows() || observed_.cols() != n ||
        static_cast<Eigen::Index>(times_.size()) != truth_.rows()) {
      throw InputError("active learning: truth, observations and times disagree in shape");
    }
    if (config_.batch_size < 1 || config_.initial_count < 2) {
      throw InputError("active learning: batch_size >= 1 and initial_count >= 2 required");
    }
    if (config_.initial_count + config_.rounds * config_.batch_size > static_cast<std::size_t>(n)) {
      throw InputError("active learning: initial_count + rounds * batch_size exceeds vertex count");
    }
    VertexList all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), VertexId{0});
    history_.strategy = config_.strategy;
    history_.initial = select_random(all, config_.initial_count, rng_);
    measured_ = history_.initial;
    refresh_candidates();
    model_ = std::make_unique<FittedModel>(fit(training_set(), spatial_, config_.fit));
    history_.initial_re = current_re();
  }

  const VertexList& measured() const { return measured_; }
  const VertexList& candidates() const { return candidates_; }
  const FittedModel& model() const { return *model_; }
  const ALHistory& history() const { return history_; }
  const Weights& weights() const { return weights_; }
  bool done() const { return history_.rounds.size() >= config_.rounds; }

  /// One round: score, pick a batch, reveal it, update the model, record RE.
  void step() {
    ALRound record;
    record.round = history_.rounds.size() + 1;
    const LooResult loo = loo_cv_error(*model_);
    record.tau2 = loo.tau2;
    record.sigma2_eps_s = model_->theta().spatial_nugget;
    const Weights adaptive = adaptive_weights(record.tau2, record.sigma2_eps_s);
    weights_ = strategy_weights(config_, adaptive);
    record.weights = weights_;

    if (config_.strategy == Strategy::random) {
      record.picked = select_random(candidates_, config_.batch_size, rng_);
    } else {
      Eigen::VectorXd unc = weights_.uncertainty > 0.0
                                ? uncertainty_score(*model_, candidates_)
                                : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(candidates_.size()));
      record.picked = select_next(*graph_, measured_, candidates_, std::move(unc), weights_,
                                  config_.batch_size);
    }
    measured_.insert(measured_.end(), record.picked.begin(), record.picked.end());
    refresh_candidates();

    if (config_.refit_each_round) {
      FitConfig warm = config_.fit;
      warm.initial_points = {model_->theta()};
      warm.use_default_grid = config_.refit_with_grid;
      model_ = std::make_unique<FittedModel>(fit(training_set(), spatial_, warm));
    } else {
      model_ = std::make_unique<FittedModel>(training_set(), spatial_, model_->theta());
    }
    record.n_plus = record.round * config_.batch_size;
    record.re = current_re();
    history_.rounds.push_back(std::move(record));
    history_.final_theta = model_->theta();
  }

  const ALHistory& run() {
    while (!done()) step();
    history_.final_theta = model_->theta();
    return history_;
  }

 private:
  std::shared_ptr<const TrainingSet> training_set() const {
    auto set = std::make_shared<TrainingSet>();
    set->locations = measured_;
    set->times = times_;
    set->observations.resize(observed_.rows(), static_cast<Eigen::Index>(measured_.size()));
    for (std::size_t i = 0; i < measured_.size(); ++i) {
      set->observations.col(static_cast<Eigen::Index>(i)) = observed_.col(measured_[i]);
    }
    return set;
  }

  void refresh_candidates() {
    std::vector<char> is_measured(static_cast<std::size_t>(truth_.cols()), 0);
    for (VertexId v : measured_) is_measured[static_cast<std::size_t>(v)] = 1;
    candidates_.clear();
    for (VertexId v = 0; v < truth_.cols(); ++v) {
      if (!is_measured[static_cast<std::size_t>(v)]) candidates_.push_back(v);
    }
  }

  double current_re() const {
    VertexList all(static_cast<std::size_t>(truth_.cols()));
    std::iota(all.begin(), all.end(), VertexId{0});
    return relative_error(posterior_mean(*model_, all, times_), truth_);
  }

  Eigen::MatrixXd truth_;
  Eigen::MatrixXd observed_;
  std::vector<double> times_;
  SpatialCovariance spatial_;
  std::shared_ptr<const EdgeGraph> graph_;
  ALConfig config_;
  std::mt19937_64 rng_;
  VertexList measured_;
  VertexList candidates_;
  std::unique_ptr<FittedModel> model_;
  Weights weights_;
  ALHistory history_;
};

/// Full protocol on observations already drawn.
inline ALHistory run_active_learning(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& observed,
                                     const std::vector<double>& times, const SpatialCovariance& spatial,
                                     std::shared_ptr<const EdgeGraph> graph, const ALConfig& config) {
  ActiveLearner learner(truth, observed, times, spatial, std::move(graph), config);
  return learner.run();
}

}  // namespace stgp
