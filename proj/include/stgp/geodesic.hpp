#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <queue>
#include <utility>
#include <vector>

#include "stgp/errors.hpp"
#include "stgp/mesh.hpp"

namespace stgp {

struct GeodesicField {
  VertexId source = 0;
  Eigen::VectorXd distances;
};

/// Edge graph weighted by Euclidean edge length, the metric used for
/// geodesic distances.
class EdgeGraph {
 public:
  explicit EdgeGraph(const TriMesh& mesh) : adjacency_(mesh.adjacency()) {
    weights_.resize(adjacency_.size());
    for (std::size_t v = 0; v < adjacency_.size(); ++v) {
      for (VertexId w : adjacency_[v]) {
        weights_[v].push_back((mesh.position(static_cast<VertexId>(v)) - mesh.position(w)).norm());
      }
    }
  }

  Eigen::Index num_vertices() const { return static_cast<Eigen::Index>(adjacency_.size()); }
  const VertexList& neighbors(VertexId v) const { return adjacency_[static_cast<std::size_t>(v)]; }
  const std::vector<double>& weights(VertexId v) const {
    return weights_[static_cast<std::size_t>(v)];
  }

  /// Multi-source Dijkstra: distance from every vertex to the nearest source.
  Eigen::VectorXd distances_from(const VertexList& sources) const {
    const Eigen::Index n = num_vertices();
    Eigen::VectorXd dist = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    using Entry = std::pair<double, VertexId>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
    for (VertexId s : sources) {
      if (s < 0 || s >= n) throw InputError("geodesic source " + std::to_string(s) + " out of range");
      dist(s) = 0.0;
      queue.emplace(0.0, s);
    }
    while (!queue.empty()) {
      const auto [d, v] = queue.top();
      queue.pop();
      if (d > dist(v)) continue;
      const auto& nbrs = neighbors(v);
      const auto& w = weights(v);
      for (std::size_t k = 0; k < nbrs.size(); ++k) {
        const double candidate = d + w[k];
        if (candidate < dist(nbrs[k])) {
          dist(nbrs[k]) = candidate;
          queue.emplace(candidate, nbrs[k]);
        }
      }
    }
    if (!dist.allFinite()) throw DisconnectedMeshError("geodesic: unreachable vertex");
    return dist;
  }

 private:
  std::vector<VertexList> adjacency_;
  std::vector<std::vector<double>> weights_;
};

inline GeodesicField geodesic_distances(const EdgeGraph& graph, VertexId source) {
  return GeodesicField{source, graph.distances_from({source})};
}

inline GeodesicField geodesic_distances(const TriMesh& mesh, VertexId source) {
  return geodesic_distances(EdgeGraph(mesh), source);
}

/// CSV with header `vertex_id,distance`.
inline void write_geodesic_csv(const std::filesystem::path& path, const GeodesicField& field) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "vertex_id,distance\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < field.distances.size(); ++i) {
    out << i << ',' << field.distances(i) << '\n';
  }
}

}  // namespace stgp
