#pragma once

#include <Eigen/Core>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "stgp/errors.hpp"
#include "stgp/laplacian.hpp"
#include "stgp/mesh.hpp"

namespace stgp {

/// Aliev–Panfilov reaction constants (toolkit defaults, dimensionless) and
/// integration settings.
struct APParams {
  double k = 8.0;
  double a = 0.15;
  double epsilon0 = 0.002;
  double mu1 = 0.2;
  double mu2 = 0.3;
  double diffusion = 0.01;
  double dt = 0.05;
  long steps = 1000;
  long record_every = 10;
};

/// Source current added to du/dt on a vertex set while active. A zero period
/// fires once.
struct StimulusProtocol {
  VertexList vertices;
  double amplitude = 0.3;
  double start = 0.0;
  double period = 0.0;
  double duration = 1.0;

  bool active(double t) const {
    if (t < start) return false;
    if (period <= 0.0) return t < start + duration;
    return std::fmod(t - start, period) < duration;
  }
};

/// Recorded transmembrane-like variable, N_t × N (time fastest per vertex column).
struct SimulationResult {
  Eigen::MatrixXd u;
  std::vector<double> times;
};

/// Single-cell Aliev–Panfilov right-hand side, shared by the mesh integrator.
struct AlievPanfilovReaction {
  const APParams& p;

  double du(double u, double v) const { return -p.k * u * (u - p.a) * (u - 1.0) - u * v; }
  double dv(double u, double v) const {
    return (p.epsilon0 + p.mu1 * v / (u + p.mu2)) * (-v - p.k * u * (u - p.a - 1.0));
  }
};

/// Explicit-Euler integration of the Aliev–Panfilov model on a mesh with the
/// cotangent Laplacian as diffusion operator. State starts at rest (u = v = 0).
/// Records the state at every `record_every`-th step, starting with step 0.
inline SimulationResult simulate_aliev_panfilov(const TriMesh& mesh, const LaplaceOperator& lap,
                                                const APParams& params,
                                                const std::vector<StimulusProtocol>& stimuli) {
  const Eigen::Index n = mesh.num_vertices();
  if (lap.size() != n) throw InputError("simulate: Laplacian does not match mesh");
  if (!(params.dt > 0.0) || params.steps < 1 || params.record_every < 1 || params.diffusion < 0.0) {
    throw InputError("simulate: need dt > 0, steps >= 1, record_every >= 1, diffusion >= 0");
  }
  const double lambda_max = max_eigenvalue_bound(lap);
  if (params.dt * params.diffusion * lambda_max > 2.0) {
    throw InputError("simulate: explicit Euler unstable, dt*D*lambda_max = " +
                     std::to_string(params.dt * params.diffusion * lambda_max) + " > 2");
  }
  for (const auto& s : stimuli) {
    if (s.vertices.empty() || !(s.duration > 0.0)) {
      throw InputError("simulate: stimulus needs vertices and a positive duration");
    }
    for (VertexId v : s.vertices) {
      if (v < 0 || v >= n) throw InputError("simulate: stimulus vertex out of range");
    }
  }

  const AlievPanfilovReaction reaction{params};
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd du(n);

  SimulationResult out;
  const long records = params.steps / params.record_every + 1;
  out.u.resize(records, n);
  out.times.reserve(static_cast<std::size_t>(records));
  long row = 0;
  auto record = [&](long step) {
    out.u.row(row++) = u.transpose();
    out.times.push_back(static_cast<double>(step) * params.dt);
  };
  record(0);

  for (long step = 0; step < params.steps; ++step) {
    const double t = static_cast<double>(step) * params.dt;
    if (params.diffusion > 0.0) {
      du = params.diffusion * lap.apply(u);
    } else {
      du.setZero();
    }
    for (const auto& s : stimuli) {
      if (!s.active(t)) continue;
      for (VertexId id : s.vertices) du(id) += s.amplitude;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const double ui = u(i), vi = v(i);
      u(i) = ui + params.dt * (du(i) + reaction.du(ui, vi));
      v(i) = vi + params.dt * reaction.dv(ui, vi);
    }
    const long done = step + 1;
    if (!u.allFinite() || !v.allFinite()) {
      throw NumericalError("simulate: non-finite state at step " + std::to_string(done));
    }
    if (u.minCoeff() < -0.05 || u.maxCoeff() > 1.05 || v.minCoeff() < -0.05) {
      throw NumericalError("simulate: state left [-0.05, 1.05] at step " + std::to_string(done));
    }
    if (done % params.record_every == 0) record(done);
  }
  return out;
}

/// Y = U + σ ξ with ξ standard normal from a seeded generator.
inline Eigen::MatrixXd add_noise(const Eigen::MatrixXd& u, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw InputError("add_noise: sigma must be >= 0");
  Eigen::MatrixXd y = u;
  if (sigma == 0.0) return y;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  // Column-major walk: deterministic order independent of storage details.
  for (Eigen::Index c = 0; c < y.cols(); ++c) {
    for (Eigen::Index r = 0; r < y.rows(); ++r) y(r, c) += sigma * normal(rng);
  }
  return y;
}

}  // namespace stgp
