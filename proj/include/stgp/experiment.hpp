#pragma once

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stgp/active.hpp"
#include "stgp/errors.hpp"
#include "stgp/geodesic.hpp"
#include "stgp/gp.hpp"
#include "stgp/io.hpp"
#include "stgp/kernels.hpp"
#include "stgp/laplacian.hpp"
#include "stgp/mesh.hpp"
#include "stgp/metrics.hpp"
#include "stgp/shapes.hpp"
#include "stgp/simulate.hpp"
#include "stgp/spectral.hpp"

namespace stgp::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

/// splitmix64 over the base seed, a tag hash and an index. Every random
/// stream in an experiment comes from here.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index = 0) {
  std::uint64_t z = base ^ io::fnv1a(tag.data(), tag.size()) ^ (index * 0x9e3779b97f4a7c15ULL);
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Stimulus as written in a config: explicit vertices, or every vertex within
/// a geodesic radius of a center (a vertex id or the vertex nearest a point).
struct StimulusSpec {
  VertexList vertices;
  std::optional<VertexId> center;
  std::optional<Eigen::Vector3d> near;
  double radius = 0.0;
  double amplitude = 0.3;
  double start = 0.0;
  double period = 0.0;
  double duration = 1.0;
};

struct BenchmarkSpec {
  std::vector<Eigen::Index> eigen_sweep = {32, 64, 128, 256, 512};
  std::vector<std::size_t> sizes = {50, 100};
  std::vector<double> noise_levels = {0.01, 0.05, 0.1};
  std::size_t replications = 5;
  std::vector<Strategy> al_strategies = {Strategy::adaptive, Strategy::random, Strategy::uncertainty,
                                         Strategy::space_filling, Strategy::fixed};
  std::size_t al_seeds = 3;
  bool persist_predictions = false;
};

struct ExperimentConfig {
  fs::path base_dir;
  std::optional<fs::path> mesh_path;
  json shape;  // generator spec when no mesh path
  std::uint64_t seed = 0;
  Eigen::Index eigenpairs = 128;
  KernelKind kernel = KernelKind::laplacian;
  std::size_t training_size = 50;
  double noise = 0.01;
  APParams simulation;
  std::vector<StimulusSpec> stimuli;
  std::optional<fs::path> truth_path;
  std::optional<fs::path> observed_path;
  ALConfig active;
  std::vector<Strategy> strategies = {Strategy::adaptive};
  std::size_t al_seeds = 1;
  BenchmarkSpec benchmark;
  FitConfig fit;
  fs::path out_dir = "out";
};

namespace detail {

// Reads one JSON object, rejecting unknown keys and mistyped values.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw InputError("config: '" + path_ + "' must be an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    return has(key) ? convert<T>(j_.at(key), key) : fallback;
  }

  template <class T>
  T require(const std::string& key) {
    if (!has(key)) throw InputError("config: missing '" + path_ + "." + key + "'");
    return convert<T>(j_.at(key), key);
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    return Section(j_.at(key), path_ + "." + key);
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) {
        throw InputError("config: unknown key '" + path_ + "." + item.key() + "'");
      }
    }
  }

 private:
  template <class T>
  T convert(const json& value, const std::string& key) const {
    try {
      return value.get<T>();
    } catch (const json::exception&) {
      throw InputError("config: wrong type for '" + path_ + "." + key + "'");
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline double positive(double v, const std::string& what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw InputError("config: " + what + " must be positive");
  return v;
}

inline double non_negative(double v, const std::string& what) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("config: " + what + " must be >= 0");
  return v;
}

inline StimulusSpec parse_stimulus(const json& j, std::size_t index) {
  Section s(j, "simulation.stimuli[" + std::to_string(index) + "]");
  StimulusSpec out;
  out.vertices = s.get<VertexList>("vertices", {});
  if (s.has("center")) out.center = s.require<VertexId>("center");
  if (s.has("near")) {
    const auto p = s.require<std::vector<double>>("near");
    if (p.size() != 3) throw InputError("config: stimulus 'near' needs three coordinates");
    out.near = Eigen::Vector3d(p[0], p[1], p[2]);
  }
  out.radius = non_negative(s.get("radius", 0.0), "stimulus radius");
  out.amplitude = s.get("amplitude", out.amplitude);
  out.start = s.get("start", out.start);
  out.period = non_negative(s.get("period", out.period), "stimulus period");
  out.duration = positive(s.get("duration", out.duration), "stimulus duration");
  s.finish();
  const int modes = !out.vertices.empty() + out.center.has_value() + out.near.has_value();
  if (modes != 1) throw InputError("config: a stimulus needs exactly one of vertices, center, near");
  return out;
}

inline Strategy strategy_from_json(const json& j) {
  if (!j.is_string()) throw InputError("config: strategies are strings such as \"A-AL\"");
  return parse_strategy(j.get<std::string>());
}

inline std::vector<Strategy> strategies_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw InputError("config: strategy list must be a nonempty array");
  std::vector<Strategy> out;
  for (const auto& item : j) out.push_back(strategy_from_json(item));
  return out;
}

}  // namespace detail

/// Parses a config object; relative paths resolve against `base_dir`.
inline ExperimentConfig parse_config(const json& j, const fs::path& base_dir) {
  detail::Section root(j, "config");
  ExperimentConfig c;
  c.base_dir = base_dir;
  if (!root.has("mesh")) throw InputError("config: missing 'mesh'");
  const json& mesh = root.raw("mesh");
  if (mesh.is_string()) {
    c.mesh_path = base_dir / mesh.get<std::string>();
  } else if (mesh.is_object()) {
    c.shape = mesh;
  } else {
    throw InputError("config: 'mesh' must be a path or a shape object");
  }
  c.seed = root.get<std::uint64_t>("seed", 0);
  c.eigenpairs = root.get<Eigen::Index>("eigenpairs", c.eigenpairs);
  if (c.eigenpairs < 1) throw InputError("config: eigenpairs must be >= 1");
  if (root.has("kernel")) c.kernel = parse_kernel_kind(root.require<std::string>("kernel"));
  c.training_size = root.get<std::size_t>("training_size", c.training_size);
  c.noise = detail::non_negative(root.get("noise", c.noise), "noise");
  c.out_dir = base_dir / root.get<std::string>("out", "out");

  if (root.has("simulation")) {
    auto s = root.child("simulation");
    auto& p = c.simulation;
    p.k = s.get("k", p.k);
    p.a = s.get("a", p.a);
    p.epsilon0 = s.get("epsilon0", p.epsilon0);
    p.mu1 = s.get("mu1", p.mu1);
    p.mu2 = s.get("mu2", p.mu2);
    p.diffusion = detail::non_negative(s.get("diffusion", p.diffusion), "diffusion");
    p.dt = detail::positive(s.get("dt", p.dt), "dt");
    p.steps = s.get("steps", p.steps);
    p.record_every = s.get("record_every", p.record_every);
    if (p.steps < 1 || p.record_every < 1) throw InputError("config: steps and record_every must be >= 1");
    if (s.has("stimuli")) {
      const json& list = s.raw("stimuli");
      if (!list.is_array()) throw InputError("config: simulation.stimuli must be an array");
      for (std::size_t i = 0; i < list.size(); ++i) c.stimuli.push_back(detail::parse_stimulus(list[i], i));
    }
    s.finish();
  }

  if (root.has("data")) {
    auto d = root.child("data");
    c.truth_path = base_dir / d.require<std::string>("truth");
    if (d.has("observed")) c.observed_path = base_dir / d.require<std::string>("observed");
    d.finish();
  }

  if (root.has("fit")) {
    auto f = root.child("fit");
    c.fit.optimizer.max_iterations = f.get("max_iterations", c.fit.optimizer.max_iterations);
    c.fit.optimizer.relative_tolerance =
        detail::positive(f.get("tolerance", c.fit.optimizer.relative_tolerance), "fit tolerance");
    c.fit.optimizer.initial_step = detail::positive(f.get("initial_step", c.fit.optimizer.initial_step), "initial_step");
    f.finish();
  }

  if (root.has("active_learning")) {
    auto a = root.child("active_learning");
    if (a.has("strategy")) c.strategies = {detail::strategy_from_json(a.raw("strategy"))};
    if (a.has("strategies")) c.strategies = detail::strategies_from_json(a.raw("strategies"));
    c.active.gamma = detail::positive(a.get("gamma", c.active.gamma), "gamma");
    c.active.batch_size = a.get("batch_size", c.active.batch_size);
    c.active.rounds = a.get("rounds", c.active.rounds);
    c.active.initial_count = a.get("initial_count", c.active.initial_count);
    c.active.refit_each_round = a.get("refit_each_round", c.active.refit_each_round);
    c.active.refit_with_grid = a.get("refit_with_grid", c.active.refit_with_grid);
    c.al_seeds = a.get("seeds", c.al_seeds);
    if (c.al_seeds < 1) throw InputError("config: active_learning.seeds must be >= 1");
    a.finish();
  }

  if (root.has("benchmark")) {
    auto b = root.child("benchmark");
    auto& s = c.benchmark;
    s.eigen_sweep = b.get("eigen_sweep", s.eigen_sweep);
    s.sizes = b.get("sizes", s.sizes);
    s.noise_levels = b.get("noise_levels", s.noise_levels);
    s.replications = b.get("replications", s.replications);
    if (b.has("al_strategies")) s.al_strategies = detail::strategies_from_json(b.raw("al_strategies"));
    s.al_seeds = b.get("al_seeds", s.al_seeds);
    s.persist_predictions = b.get("persist_predictions", s.persist_predictions);
    for (double n : s.noise_levels) detail::non_negative(n, "benchmark noise level");
    if (s.replications < 1) throw InputError("config: benchmark.replications must be >= 1");
    b.finish();
  }
  root.finish();
  return c;
}

inline ExperimentConfig load_config(const fs::path& path) {
  const json j = io::read_json(path);
  return parse_config(j, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

/// Mesh plus everything derived from it that does not depend on θ.
struct Geometry {
  std::shared_ptr<const TriMesh> mesh;
  LaplaceOperator laplacian;
  std::shared_ptr<const EdgeGraph> graph;

  Eigen::Index num_vertices() const { return mesh->num_vertices(); }
};

inline TriMesh make_shape(const json& spec) {
  detail::Section s(spec, "mesh");
  const auto kind = s.require<std::string>("shape");
  const int level = s.get("level", 3);
  TriMesh mesh = [&] {
    if (kind == "cup") return shapes::cup(level, s.get("wall", 0.25));
    if (kind == "icosphere") return shapes::icosphere(level);
    if (kind == "grid") return shapes::grid(s.get("cells", 10));
    throw InputError("config: unknown shape '" + kind + "'");
  }();
  s.finish();
  return mesh;
}

inline Geometry load_geometry(const ExperimentConfig& c) {
  Geometry g;
  g.mesh = std::make_shared<const TriMesh>(c.mesh_path ? load_mesh(*c.mesh_path) : make_shape(c.shape));
  g.laplacian = cotan_laplacian(*g.mesh);
  g.graph = std::make_shared<const EdgeGraph>(*g.mesh);
  return g;
}

inline std::vector<StimulusProtocol> resolve_stimuli(const std::vector<StimulusSpec>& specs, const Geometry& g) {
  std::vector<StimulusProtocol> out;
  for (const auto& s : specs) {
    StimulusProtocol p;
    p.amplitude = s.amplitude;
    p.start = s.start;
    p.period = s.period;
    p.duration = s.duration;
    if (!s.vertices.empty()) {
      p.vertices = s.vertices;
    } else {
      VertexId center = 0;
      if (s.center) {
        center = *s.center;
        if (center < 0 || center >= g.num_vertices()) throw InputError("config: stimulus center out of range");
      } else {
        (g.mesh->vertices().rowwise() - s.near->transpose()).rowwise().squaredNorm().minCoeff(&center);
      }
      const Eigen::VectorXd d = g.graph->distances_from({center});
      for (VertexId v = 0; v < g.num_vertices(); ++v) {
        if (d(v) <= s.radius) p.vertices.push_back(v);
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

/// Reference field and its noisy observation, N_t × N.
struct Dataset {
  std::vector<double> times;
  Eigen::MatrixXd truth;
  Eigen::MatrixXd observed;
};

inline Eigen::MatrixXd noisy(const Eigen::MatrixXd& truth, double sigma, std::uint64_t seed, std::uint64_t index) {
  return add_noise(truth, sigma, derive_seed(seed, "noise", index));
}

inline SimulationResult simulate(const ExperimentConfig& c, const Geometry& g) {
  if (c.stimuli.empty()) throw InputError("config: simulation needs at least one stimulus");
  return simulate_aliev_panfilov(*g.mesh, g.laplacian, c.simulation, resolve_stimuli(c.stimuli, g));
}

namespace detail {

inline Eigen::MatrixXd full_field(const io::Signals& s, Eigen::Index n, const std::string& what) {
  if (static_cast<Eigen::Index>(s.vertices.size()) != n) {
    throw InputError(what + ": expected one column per mesh vertex");
  }
  Eigen::MatrixXd out(s.values.rows(), n);
  std::vector<char> filled(static_cast<std::size_t>(n), 0);
  for (std::size_t c = 0; c < s.vertices.size(); ++c) {
    const VertexId v = s.vertices[c];
    if (v < 0 || v >= n || filled[static_cast<std::size_t>(v)]) throw InputError(what + ": bad vertex columns");
    filled[static_cast<std::size_t>(v)] = 1;
    out.col(v) = s.values.col(static_cast<Eigen::Index>(c));
  }
  return out;
}

}  // namespace detail

/// Reads the configured signal files, or simulates when none are given. The
/// observed field defaults to truth plus seeded noise at the configured level.
inline Dataset load_dataset(const ExperimentConfig& c, const Geometry& g) {
  Dataset d;
  if (c.truth_path) {
    const io::Signals truth = io::read_signals(*c.truth_path);
    d.times = truth.times;
    d.truth = detail::full_field(truth, g.num_vertices(), c.truth_path->string());
    if (c.observed_path) {
      const io::Signals obs = io::read_signals(*c.observed_path);
      if (obs.times != truth.times) throw InputError("observed and truth files disagree on times");
      d.observed = detail::full_field(obs, g.num_vertices(), c.observed_path->string());
      return d;
    }
  } else {
    SimulationResult sim = simulate(c, g);
    d.times = std::move(sim.times);
    d.truth = std::move(sim.u);
  }
  d.observed = noisy(d.truth, c.noise, c.seed, 0);
  return d;
}

inline VertexList sample_training(Eigen::Index num_vertices, std::size_t size, std::uint64_t seed) {
  if (size < 1 || static_cast<Eigen::Index>(size) > num_vertices) {
    throw InputError("training size must lie in [1, number of vertices]");
  }
  VertexList all(static_cast<std::size_t>(num_vertices));
  std::iota(all.begin(), all.end(), VertexId{0});
  std::mt19937_64 rng(seed);
  return select_random(all, size, rng);
}

inline std::shared_ptr<const TrainingSet> training_set(const Dataset& d, const VertexList& locations) {
  auto t = std::make_shared<TrainingSet>();
  t->locations = locations;
  t->times = d.times;
  t->observations.resize(d.observed.rows(), static_cast<Eigen::Index>(locations.size()));
  for (std::size_t i = 0; i < locations.size(); ++i) {
    t->observations.col(static_cast<Eigen::Index>(i)) = d.observed.col(locations[i]);
  }
  return t;
}

inline SpatialCovariance make_covariance(KernelKind kind, const Geometry& g,
                                         std::shared_ptr<const SpectralBasis> basis) {
  if (kind == KernelKind::laplacian) {
    if (!basis) throw InputError("laplacian kernel needs a spectral basis");
    return SpatialCovariance::laplacian(std::move(basis));
  }
  return SpatialCovariance::euclidean(g.mesh);
}

struct Prediction {
  VertexList training;
  HyperParams theta;
  double nll = 0.0;
  Eigen::MatrixXd mean;  // N_t × N
  double re = 0.0;
};

inline VertexList all_vertices(Eigen::Index n) {
  VertexList v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), VertexId{0});
  return v;
}

/// Fit on the training locations, predict every vertex at every time, score
/// against the reference field.
inline Prediction fit_predict(const Dataset& d, const VertexList& training, const SpatialCovariance& cov,
                              const FitConfig& fit_config) {
  const FittedModel model = fit(training_set(d, training), cov, fit_config);
  Prediction p;
  p.training = training;
  p.theta = model.theta();
  p.nll = model.nll();
  p.mean = posterior_mean(model, all_vertices(d.truth.cols()), d.times);
  p.re = relative_error(p.mean, d.truth);
  return p;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline std::shared_ptr<const SpectralBasis> basis_for(const Geometry& g, Eigen::Index count) {
  if (count > g.num_vertices()) {
    throw InputError("eigenpairs (" + std::to_string(count) + ") exceed vertex count (" +
                     std::to_string(g.num_vertices()) + ")");
  }
  return std::make_shared<const SpectralBasis>(spectral_basis(g.laplacian, count));
}

inline json cmd_eigs(const ExperimentConfig& c) {
  const Stopwatch clock;
  const Geometry g = load_geometry(c);
  const auto basis = basis_for(g, c.eigenpairs);
  io::write_spectrum(c.out_dir / "eigenvalues.csv", c.out_dir / "eigenvectors.csv", *basis);
  json summary = {{"vertices", g.num_vertices()},
                  {"eigenpairs", basis->size()},
                  {"first", basis->eigenvalues(0)},
                  {"last", basis->eigenvalues(basis->size() - 1)},
                  {"wall_seconds", clock.seconds()}};
  io::write_json(c.out_dir / "eigs.json", summary);
  return summary;
}

inline json cmd_simulate(const ExperimentConfig& c) {
  const Stopwatch clock;
  const Geometry g = load_geometry(c);
  const SimulationResult sim = simulate(c, g);
  const Eigen::MatrixXd observed = noisy(sim.u, c.noise, c.seed, 0);
  io::write_signals(c.out_dir / "truth.csv", sim.times, sim.u);
  io::write_signals(c.out_dir / "observed.csv", sim.times, observed);
  json stimuli = json::array();
  for (const auto& s : resolve_stimuli(c.stimuli, g)) {
    stimuli.push_back({{"vertices", s.vertices.size()}, {"amplitude", s.amplitude}, {"period", s.period}});
  }
  json summary = {{"vertices", g.num_vertices()}, {"times", sim.times.size()},
                  {"noise", c.noise},             {"noise_seed", derive_seed(c.seed, "noise", 0)},
                  {"u_max", sim.u.maxCoeff()},     {"u_min", sim.u.minCoeff()},
                  {"stimuli", stimuli},           {"wall_seconds", clock.seconds()}};
  io::write_json(c.out_dir / "simulation.json", summary);
  return summary;
}

inline json cmd_fit_predict(const ExperimentConfig& c) {
  const Stopwatch clock;
  const Geometry g = load_geometry(c);
  const Dataset d = load_dataset(c, g);
  const auto basis = c.kernel == KernelKind::laplacian ? basis_for(g, c.eigenpairs) : nullptr;
  const VertexList training = sample_training(g.num_vertices(), c.training_size, derive_seed(c.seed, "training", 0));
  FitConfig fc = c.fit;
  fc.seed = derive_seed(c.seed, "fit", 0);
  const Prediction p = fit_predict(d, training, make_covariance(c.kernel, g, basis), fc);
  io::write_signals(c.out_dir / "prediction.csv", d.times, p.mean);
  json summary = {{"kernel", std::string(to_string(c.kernel))},
                  {"eigenpairs", c.kernel == KernelKind::laplacian ? c.eigenpairs : 0},
                  {"training_locations", p.training},
                  {"theta", io::to_json(p.theta)},
                  {"nll", p.nll},
                  {"RE", p.re},
                  {"wall_seconds", clock.seconds()}};
  io::write_json(c.out_dir / "fit_predict.json", summary);
  return summary;
}

/// Runs every configured strategy for every AL seed on one noisy dataset.
/// All strategies for a seed share the same initial design.
inline std::vector<std::pair<std::size_t, ALHistory>> run_strategies(const ExperimentConfig& c, const Geometry& g,
                                                                     const Dataset& d,
                                                                     const std::vector<Strategy>& strategies,
                                                                     std::size_t seeds) {
  const auto basis = basis_for(g, c.eigenpairs);
  const SpatialCovariance cov = SpatialCovariance::laplacian(basis);
  std::vector<std::pair<std::size_t, ALHistory>> out;
  for (std::size_t k = 0; k < seeds; ++k) {
    for (Strategy s : strategies) {
      ALConfig config = c.active;
      config.strategy = s;
      config.seed = derive_seed(c.seed, "active", k);
      config.fit = c.fit;
      config.fit.seed = derive_seed(c.seed, "fit", k);
      out.emplace_back(k, run_active_learning(d.truth, d.observed, d.times, cov, g.graph, config));
    }
  }
  return out;
}

inline void write_al_tables(const fs::path& dir, const std::vector<std::pair<std::size_t, ALHistory>>& runs) {
  {
    auto f = io::detail::open_out(dir / "al_final.csv");
    f << "strategy,seed,initial_RE,final_RE\n";
    for (const auto& [k, h] : runs) f << to_string(h.strategy) << ',' << k << ',' << h.initial_re << ',' << h.final_re() << '\n';
  }
  auto out = io::detail::open_out(dir / "al_curves.csv");
  out << "strategy,seed,round,N_plus,RE,tau2,sigma2_eps_s,alpha1,alpha2\n";
  for (const auto& [k, h] : runs) {
    out << to_string(h.strategy) << ',' << k << ",0,0," << h.initial_re << ",,,,\n";
    for (const auto& r : h.rounds) {
      out << to_string(h.strategy) << ',' << k << ',' << r.round << ',' << r.n_plus << ',' << r.re << ','
          << r.tau2 << ',' << r.sigma2_eps_s << ',' << r.weights.space_filling << ',' << r.weights.uncertainty
          << '\n';
    }
  }
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw InputError("median of an empty list");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Median final RE per strategy.
inline std::map<Strategy, double> median_final_re(const std::vector<std::pair<std::size_t, ALHistory>>& runs) {
  std::map<Strategy, std::vector<double>> by;
  for (const auto& [k, h] : runs) by[h.strategy].push_back(h.final_re());
  std::map<Strategy, double> out;
  for (const auto& [s, v] : by) out[s] = median(v);
  return out;
}

inline json cmd_active_learn(const ExperimentConfig& c) {
  const Stopwatch clock;
  const Geometry g = load_geometry(c);
  const Dataset d = load_dataset(c, g);
  const auto runs = run_strategies(c, g, d, c.strategies, c.al_seeds);
  json histories = json::array();
  for (const auto& [k, h] : runs) {
    io::write_history_csv(c.out_dir / ("history_" + std::string(to_string(h.strategy)) + "_seed" + std::to_string(k) + ".csv"), h);
    json s = io::history_summary(h);
    s["seed_index"] = k;
    histories.push_back(s);
  }
  write_al_tables(c.out_dir, runs);
  json medians;
  for (const auto& [s, m] : median_final_re(runs)) medians[std::string(to_string(s))] = m;
  json summary = {{"runs", histories}, {"median_final_RE", medians}, {"wall_seconds", clock.seconds()}};
  io::write_json(c.out_dir / "active_learning.json", summary);
  return summary;
}

struct GridCell {
  std::size_t size = 0;
  double noise = 0.0;
  KernelKind kernel = KernelKind::laplacian;
  std::size_t replication = 0;

  std::string name() const {
    std::ostringstream s;
    s << "n" << size << "_sigma" << noise << "_" << (kernel == KernelKind::laplacian ? "G" : "E") << "_rep"
      << replication;
    return s.str();
  }
};

/// One grid cell. Noise and training indices depend on (size, noise,
/// replication) only, so both kernels see identical data.
inline Prediction run_grid_cell(const ExperimentConfig& c, const Geometry& g, const Eigen::MatrixXd& truth,
                                const std::vector<double>& times, std::shared_ptr<const SpectralBasis> basis,
                                const GridCell& cell) {
  Dataset d;
  d.times = times;
  d.truth = truth;
  const auto noise_index = static_cast<std::uint64_t>(std::llround(cell.noise * 1e6));
  d.observed = add_noise(truth, cell.noise, derive_seed(c.seed, "grid-noise", noise_index * 1000 + cell.replication));
  const VertexList training =
      sample_training(g.num_vertices(), cell.size, derive_seed(c.seed, "grid-training", cell.size * 1000 + cell.replication));
  FitConfig fc = c.fit;
  fc.seed = derive_seed(c.seed, "fit", cell.replication);
  return fit_predict(d, training, make_covariance(cell.kernel, g, std::move(basis)), fc);
}

/// Eigenpair sweep: RE at each J on the configured size and noise.
struct SweepPoint {
  Eigen::Index eigenpairs = 0;
  Prediction prediction;
};

inline std::vector<SweepPoint> eigen_sweep(const ExperimentConfig& c, const Geometry& g, const Dataset& d,
                                           const std::vector<Eigen::Index>& counts) {
  if (counts.empty()) throw InputError("eigen sweep needs at least one eigenpair count");
  const Eigen::Index max_count = *std::max_element(counts.begin(), counts.end());
  const auto full = basis_for(g, max_count);
  const VertexList training = sample_training(g.num_vertices(), c.training_size, derive_seed(c.seed, "training", 0));
  std::vector<SweepPoint> out;
  for (Eigen::Index j : counts) {
    auto basis = std::make_shared<const SpectralBasis>(full->truncated(j));
    FitConfig fc = c.fit;
    fc.seed = derive_seed(c.seed, "fit", 0);
    out.push_back({j, fit_predict(d, training, SpatialCovariance::laplacian(basis), fc)});
  }
  return out;
}

/// RE(first) > RE(at 128 or the middle) and the last two agree within 5%.
inline json sweep_shape(const std::vector<SweepPoint>& sweep) {
  json j;
  bool monotone = true;
  for (std::size_t k = 1; k < sweep.size(); ++k) monotone = monotone && sweep[k].prediction.re <= sweep[k - 1].prediction.re;
  j["monotone"] = monotone;
  if (sweep.size() >= 3) {
    const double a = sweep[sweep.size() - 2].prediction.re;
    const double b = sweep.back().prediction.re;
    std::size_t mid = sweep.size() / 2;
    for (std::size_t k = 0; k < sweep.size(); ++k) {
      if (sweep[k].eigenpairs == 128) mid = k;
    }
    j["decreasing_head"] = sweep.front().prediction.re > sweep[mid].prediction.re;
    j["plateau"] = std::abs(a - b) <= 0.05 * a;
    j["monotone_then_plateau"] = j["decreasing_head"].get<bool>() && j["plateau"].get<bool>();
  }
  return j;
}

inline void write_cell_prediction(const fs::path& dir, const GridCell& cell, const std::vector<double>& times,
                                  const Prediction& p) {
  io::write_signals(dir / "cells" / (cell.name() + ".csv"), times, p.mean);
}

inline json cmd_benchmark(const ExperimentConfig& c) {
  const Stopwatch clock;
  const Geometry g = load_geometry(c);
  const Dataset d = load_dataset(c, g);
  const auto& spec = c.benchmark;
  json report;
  report["config_seed"] = c.seed;
  report["vertices"] = g.num_vertices();
  report["times"] = d.times.size();
  report["library"] = {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                     "." + std::to_string(EIGEN_MINOR_VERSION)},
                       {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                    std::to_string(NLOHMANN_JSON_VERSION_MINOR)}};

  // Eigenpair sweep.
  {
    const Stopwatch t;
    const auto sweep = eigen_sweep(c, g, d, spec.eigen_sweep);
    auto out = io::detail::open_out(c.out_dir / "eigen_sweep.csv");
    out << "eigenpairs,RE\n";
    json points = json::array();
    for (const auto& p : sweep) {
      out << p.eigenpairs << ',' << p.prediction.re << '\n';
      points.push_back({{"eigenpairs", p.eigenpairs}, {"RE", p.prediction.re}});
    }
    report["eigen_sweep"] = {{"points", points}, {"shape", sweep_shape(sweep)}, {"wall_seconds", t.seconds()}};
  }

  // Size × noise × kernel grid.
  {
    const Eigen::Index max_j = c.eigenpairs;
    const auto basis = basis_for(g, max_j);
    auto table = io::detail::open_out(c.out_dir / "grid.csv");
    table << "size,noise,kernel,replication,RE\n";
    json cells = json::array();
    std::map<std::tuple<std::size_t, double, KernelKind>, std::vector<double>> groups;
    for (std::size_t size : spec.sizes) {
      for (double noise : spec.noise_levels) {
        for (KernelKind kernel : {KernelKind::laplacian, KernelKind::euclidean}) {
          for (std::size_t r = 0; r < spec.replications; ++r) {
            const GridCell cell{size, noise, kernel, r};
            const Stopwatch t;
            const Prediction p = run_grid_cell(c, g, d.truth, d.times, basis, cell);
            table << size << ',' << noise << ',' << to_string(kernel) << ',' << r << ',' << p.re << '\n';
            groups[{size, noise, kernel}].push_back(p.re);
            json entry = {{"name", cell.name()}, {"size", size}, {"noise", noise},
                          {"kernel", std::string(to_string(kernel))}, {"replication", r},
                          {"RE", p.re}, {"wall_seconds", t.seconds()}};
            if (spec.persist_predictions) {
              write_cell_prediction(c.out_dir, cell, d.times, p);
              entry["prediction"] = "cells/" + cell.name() + ".csv";
            }
            cells.push_back(entry);
          }
        }
      }
    }
    auto summary = io::detail::open_out(c.out_dir / "grid_summary.csv");
    summary << "size,noise,kernel,median_RE,mean_RE,min_RE,max_RE\n";
    json stats = json::array();
    for (const auto& [key, values] : groups) {
      const auto& [size, noise, kernel] = key;
      const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
      const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
      summary << size << ',' << noise << ',' << to_string(kernel) << ',' << median(values) << ',' << mean << ','
              << *lo << ',' << *hi << '\n';
      stats.push_back({{"size", size}, {"noise", noise}, {"kernel", std::string(to_string(kernel))},
                       {"median_RE", median(values)}, {"mean_RE", mean}});
    }
    if (spec.persist_predictions) io::write_signals(c.out_dir / "truth.csv", d.times, d.truth);
    report["grid"] = {{"cells", cells}, {"summary", stats}};
  }

  // Active-learning comparison.
  if (!spec.al_strategies.empty() && spec.al_seeds > 0) {
    const Stopwatch t;
    const auto runs = run_strategies(c, g, d, spec.al_strategies, spec.al_seeds);
    write_al_tables(c.out_dir, runs);
    json medians;
    for (const auto& [s, m] : median_final_re(runs)) medians[std::string(to_string(s))] = m;
    report["active_learning"] = {{"median_final_RE", medians}, {"wall_seconds", t.seconds()}};
  }
  report["wall_seconds"] = clock.seconds();
  io::write_json(c.out_dir / "report.json", report);
  return report;
}

/// Recomputes every persisted cell's RE from `truth.csv` and the saved
/// predictions. Returns name → {stored, recomputed}.
inline json regenerate_report(const fs::path& dir) {
  const json report = io::read_json(dir / "report.json");
  const io::Signals truth = io::read_signals(dir / "truth.csv");
  json out = json::object();
  for (const auto& cell : report.at("grid").at("cells")) {
    if (!cell.contains("prediction")) continue;
    const io::Signals pred = io::read_signals(dir / cell.at("prediction").get<std::string>());
    out[cell.at("name").get<std::string>()] = {{"stored", cell.at("RE")},
                                               {"recomputed", relative_error(pred.values, truth.values)}};
  }
  if (out.empty()) throw InputError("no persisted predictions under " + dir.string());
  return out;
}

}  // namespace stgp::experiment
