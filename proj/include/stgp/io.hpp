#pragma once

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "stgp/active.hpp"
#include "stgp/errors.hpp"
#include "stgp/gp.hpp"
#include "stgp/kernels.hpp"
#include "stgp/spectral.hpp"

namespace stgp::io {

namespace fs = std::filesystem;

/// A signals table: one row per time, one column per vertex.
struct Signals {
  std::vector<double> times;
  VertexList vertices;
  Eigen::MatrixXd values;  // N_t × |vertices|
};

namespace detail {

inline std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(line);
  while (std::getline(in, item, sep)) parts.push_back(item);
  if (!line.empty() && line.back() == sep) parts.emplace_back();
  return parts;
}

inline double parse_double(const std::string& text, const std::string& where) {
  try {
    std::size_t used = 0;
    const double value = std::stod(text, &used);
    if (used != text.size() && text.find_first_not_of(" \t\r", used) != std::string::npos) {
      throw ParseError(where + ": trailing characters in '" + text + "'");
    }
    return value;
  } catch (const std::logic_error&) {
    throw ParseError(where + ": not a number '" + text + "'");
  }
}

}  // namespace detail

/// Header `time,v<id>,...`; rows ascending in time.
inline void write_signals(const fs::path& path, const std::vector<double>& times,
                          const VertexList& vertices, const Eigen::MatrixXd& values) {
  if (values.rows() != static_cast<Eigen::Index>(times.size()) ||
      values.cols() != static_cast<Eigen::Index>(vertices.size())) {
    throw InputError("write_signals: shape mismatch");
  }
  auto out = detail::open_out(path);
  out << "time";
  for (VertexId v : vertices) out << ",v" << v;
  out << '\n';
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    out << times[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < values.cols(); ++c) out << ',' << values(r, c);
    out << '\n';
  }
}

inline void write_signals(const fs::path& path, const std::vector<double>& times, const Eigen::MatrixXd& values) {
  VertexList vertices(static_cast<std::size_t>(values.cols()));
  for (std::size_t i = 0; i < vertices.size(); ++i) vertices[i] = static_cast<VertexId>(i);
  write_signals(path, times, vertices, values);
}

inline Signals read_signals(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open signals file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty signals file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split(line, ',');
  if (header.size() < 2 || header[0] != "time") {
    throw ParseError(path.string() + ": header must start with 'time' followed by vertex columns");
  }
  Signals s;
  for (std::size_t c = 1; c < header.size(); ++c) {
    const auto& h = header[c];
    if (h.size() < 2 || h[0] != 'v') throw ParseError(path.string() + ": bad column name '" + h + "'");
    s.vertices.push_back(static_cast<VertexId>(detail::parse_double(h.substr(1), path.string())));
  }
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split(line, ',');
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (cells.size() != header.size()) throw ParseError(where + ": wrong number of columns");
    std::vector<double> row;
    for (const auto& cell : cells) row.push_back(detail::parse_double(cell, where));
    if (!s.times.empty() && !(row[0] > s.times.back())) {
      throw ParseError(where + ": times must be strictly increasing");
    }
    s.times.push_back(row[0]);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(path.string() + ": no data rows");
  s.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(s.vertices.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < s.vertices.size(); ++c) {
      s.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c + 1];
    }
  }
  return s;
}

/// Plain numeric matrix, optional header line.
inline void write_matrix(const fs::path& path, const Eigen::MatrixXd& m, const std::string& header = {}) {
  auto out = detail::open_out(path);
  if (!header.empty()) out << header << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
    out << '\n';
  }
}

/// `index,eigenvalue` CSV plus an N × J eigenvector CSV.
inline void write_spectrum(const fs::path& eigenvalues_path, const fs::path& eigenvectors_path,
                           const SpectralBasis& basis) {
  auto out = detail::open_out(eigenvalues_path);
  out << "index,eigenvalue\n";
  for (Eigen::Index j = 0; j < basis.size(); ++j) out << j << ',' << basis.eigenvalues(j) << '\n';
  write_matrix(eigenvectors_path, basis.eigenvectors);
}

inline std::vector<double> read_eigenvalues(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = detail::split(line, ',');
    if (cells.size() != 2) throw ParseError(path.string() + ": expected index,eigenvalue");
    values.push_back(detail::parse_double(cells[1], path.string()));
  }
  return values;
}

/// FNV-1a over raw bytes; used to tie a saved model to its training data.
inline std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t hash = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    hash ^= p[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

inline std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

inline nlohmann::json to_json(const HyperParams& t) {
  return {{"l_s", t.spatial_length},      {"sigma_m", t.spatial_scale},
          {"sigma_eps_s", t.spatial_nugget}, {"l_t", t.temporal_length},
          {"sigma_a", t.temporal_scale},   {"sigma_eps_t", t.temporal_nugget},
          {"nu", kSmoothness},             {"d", kSurfaceDimension}};
}

inline HyperParams hyperparams_from_json(const nlohmann::json& j) {
  HyperParams t;
  t.spatial_length = j.at("l_s").get<double>();
  t.spatial_scale = j.at("sigma_m").get<double>();
  t.spatial_nugget = j.at("sigma_eps_s").get<double>();
  t.temporal_length = j.at("l_t").get<double>();
  t.temporal_scale = j.at("sigma_a").get<double>();
  t.temporal_nugget = j.at("sigma_eps_t").get<double>();
  if (!t.valid()) throw InputError("invalid hyperparameters in JSON");
  return t;
}

/// Persisted model: θ̂, kernel kind, eigenpair count and training-set hashes.
inline nlohmann::json model_to_json(const FittedModel& model) {
  const auto& d = model.data();
  const std::uint64_t loc_hash = fnv1a(d.locations.data(), d.locations.size() * sizeof(VertexId));
  std::uint64_t obs_hash = fnv1a(d.observations.data(),
                                 static_cast<std::size_t>(d.observations.size()) * sizeof(double));
  obs_hash = fnv1a(d.times.data(), d.times.size() * sizeof(double), obs_hash);
  nlohmann::json j;
  j["theta"] = to_json(model.theta());
  j["kernel"] = std::string(to_string(model.kind()));
  j["eigenpairs"] = model.kind() == KernelKind::laplacian ? model.spatial().basis()->size() : 0;
  j["nll"] = model.nll();
  j["training"] = {{"locations", d.locations},
                   {"num_times", d.num_times()},
                   {"locations_hash", hex(loc_hash)},
                   {"data_hash", hex(obs_hash)},
                   {"layout", "Y is N_t x N_s, vec stacks time fastest"}};
  return j;
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  auto out = detail::open_out(path);
  out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline std::string join_ids(const VertexList& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) s += (i ? ";" : "") + std::to_string(ids[i]);
  return s;
}

/// `round,N_plus,RE,tau2,sigma2_eps_s,alpha1,alpha2,picked_ids`.
inline void write_history_csv(const fs::path& path, const ALHistory& h) {
  auto out = detail::open_out(path);
  out << "round,N_plus,RE,tau2,sigma2_eps_s,alpha1,alpha2,picked_ids\n";
  for (const auto& r : h.rounds) {
    out << r.round << ',' << r.n_plus << ',' << r.re << ',' << r.tau2 << ',' << r.sigma2_eps_s << ','
        << r.weights.space_filling << ',' << r.weights.uncertainty << ',' << join_ids(r.picked) << '\n';
  }
}

inline nlohmann::json history_summary(const ALHistory& h) {
  nlohmann::json j;
  j["strategy"] = std::string(to_string(h.strategy));
  j["initial_locations"] = h.initial;
  j["initial_re"] = h.initial_re;
  j["final_re"] = h.final_re();
  j["rounds"] = h.rounds.size();
  j["final_theta"] = to_json(h.final_theta);
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& r : h.rounds) curve.push_back({{"N_plus", r.n_plus}, {"RE", r.re}});
  j["re_curve"] = curve;
  return j;
}

}  // namespace stgp::io
