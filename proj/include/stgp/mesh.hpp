#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "stgp/errors.hpp"

namespace stgp {

using VertexId = Eigen::Index;
using VertexList = std::vector<VertexId>;

/// Triangle surface mesh. Validated on construction and immutable afterwards:
/// indices in range, no degenerate faces, connected edge graph.
class TriMesh {
 public:
  TriMesh(Eigen::MatrixX3d vertices, Eigen::MatrixX3i faces)
      : vertices_(std::move(vertices)), faces_(std::move(faces)) {
    validate();
  }

  Eigen::Index num_vertices() const { return vertices_.rows(); }
  Eigen::Index num_faces() const { return faces_.rows(); }
  const Eigen::MatrixX3d& vertices() const { return vertices_; }
  const Eigen::MatrixX3i& faces() const { return faces_; }
  Eigen::Vector3d position(VertexId v) const { return vertices_.row(v).transpose(); }

  double bounding_box_diagonal() const {
    return (vertices_.colwise().maxCoeff() - vertices_.colwise().minCoeff()).norm();
  }

  double face_area(Eigen::Index f) const {
    const Eigen::Vector3d a = position(faces_(f, 0));
    const Eigen::Vector3d b = position(faces_(f, 1));
    const Eigen::Vector3d c = position(faces_(f, 2));
    return 0.5 * (b - a).cross(c - a).norm();
  }

  double surface_area() const {
    double total = 0.0;
    for (Eigen::Index f = 0; f < num_faces(); ++f) total += face_area(f);
    return total;
  }

  /// Sorted, deduplicated neighbor lists of the edge graph.
  std::vector<VertexList> adjacency() const {
    std::vector<VertexList> adj(static_cast<std::size_t>(num_vertices()));
    for (Eigen::Index f = 0; f < num_faces(); ++f) {
      for (int k = 0; k < 3; ++k) {
        const VertexId i = faces_(f, k);
        const VertexId j = faces_(f, (k + 1) % 3);
        adj[static_cast<std::size_t>(i)].push_back(j);
        adj[static_cast<std::size_t>(j)].push_back(i);
      }
    }
    for (auto& nbrs : adj) {
      std::sort(nbrs.begin(), nbrs.end());
      nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    }
    return adj;
  }

 private:
  void validate() const {
    const Eigen::Index n = num_vertices();
    if (n == 0 || num_faces() == 0) throw InputError("mesh has no vertices or no faces");
    if (!vertices_.allFinite()) throw InputError("mesh has non-finite vertex coordinates");
    const double diag = bounding_box_diagonal();
    const double min_area = 1e-12 * diag * diag;
    for (Eigen::Index f = 0; f < num_faces(); ++f) {
      const int a = faces_(f, 0), b = faces_(f, 1), c = faces_(f, 2);
      if (a < 0 || b < 0 || c < 0 || a >= n || b >= n || c >= n) {
        throw InputError("face " + std::to_string(f) + " references a vertex out of range");
      }
      if (a == b || b == c || a == c) {
        throw DegenerateFaceError("degenerate face " + std::to_string(f) + ": repeated vertex");
      }
      if (face_area(f) < min_area) {
        throw DegenerateFaceError("degenerate face " + std::to_string(f) + ": zero area");
      }
    }
    // Connectivity by BFS over the edge graph.
    const auto adj = adjacency();
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<VertexId> stack{0};
    seen[0] = 1;
    Eigen::Index reached = 1;
    while (!stack.empty()) {
      const VertexId v = stack.back();
      stack.pop_back();
      for (VertexId w : adj[static_cast<std::size_t>(v)]) {
        if (!seen[static_cast<std::size_t>(w)]) {
          seen[static_cast<std::size_t>(w)] = 1;
          ++reached;
          stack.push_back(w);
        }
      }
    }
    if (reached != n) {
      throw DisconnectedMeshError("mesh edge graph is disconnected: " + std::to_string(reached) +
                                  " of " + std::to_string(n) + " vertices reachable from vertex 0");
    }
  }

  Eigen::MatrixX3d vertices_;
  Eigen::MatrixX3i faces_;
};

namespace detail {

// Next non-empty, non-comment line of an OFF stream.
inline bool next_off_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
  }
  return false;
}

}  // namespace detail

/// Parses an ASCII OFF mesh. Only triangle faces are accepted.
inline TriMesh read_off(std::istream& in) {
  std::string line;
  if (!detail::next_off_line(in, line)) throw ParseError("OFF: empty input");
  std::istringstream header(line);
  std::string magic;
  header >> magic;
  if (magic != "OFF") throw ParseError("OFF: missing 'OFF' header");
  long nv = -1, nf = -1, ne = 0;
  // Counts may share the header line.
  if (!(header >> nv >> nf)) {
    if (!detail::next_off_line(in, line)) throw ParseError("OFF: missing counts line");
    std::istringstream counts(line);
    if (!(counts >> nv >> nf)) throw ParseError("OFF: malformed counts line");
    counts >> ne;
  }
  if (nv <= 0 || nf <= 0) throw ParseError("OFF: vertex and face counts must be positive");

  Eigen::MatrixX3d vertices(nv, 3);
  for (long i = 0; i < nv; ++i) {
    if (!detail::next_off_line(in, line)) throw ParseError("OFF: truncated vertex list");
    std::istringstream row(line);
    if (!(row >> vertices(i, 0) >> vertices(i, 1) >> vertices(i, 2))) {
      throw ParseError("OFF: malformed vertex line " + std::to_string(i));
    }
  }
  Eigen::MatrixX3i faces(nf, 3);
  for (long f = 0; f < nf; ++f) {
    if (!detail::next_off_line(in, line)) throw ParseError("OFF: truncated face list");
    std::istringstream row(line);
    int count = 0;
    if (!(row >> count)) throw ParseError("OFF: malformed face line " + std::to_string(f));
    if (count != 3) {
      throw NonTriangleFaceError("non-triangle face " + std::to_string(f) + " with " +
                                 std::to_string(count) + " vertices");
    }
    if (!(row >> faces(f, 0) >> faces(f, 1) >> faces(f, 2))) {
      throw ParseError("OFF: malformed face line " + std::to_string(f));
    }
  }
  return TriMesh(std::move(vertices), std::move(faces));
}

inline TriMesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open mesh file " + path.string());
  return read_off(in);
}

inline void write_off(std::ostream& out, const TriMesh& mesh) {
  out << "OFF\n" << mesh.num_vertices() << ' ' << mesh.num_faces() << " 0\n";
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < mesh.num_vertices(); ++i) {
    out << mesh.vertices()(i, 0) << ' ' << mesh.vertices()(i, 1) << ' ' << mesh.vertices()(i, 2)
        << '\n';
  }
  for (Eigen::Index f = 0; f < mesh.num_faces(); ++f) {
    out << "3 " << mesh.faces()(f, 0) << ' ' << mesh.faces()(f, 1) << ' ' << mesh.faces()(f, 2)
        << '\n';
  }
}

inline void save_mesh(const std::filesystem::path& path, const TriMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write mesh file " + path.string());
  write_off(out, mesh);
}

}  // namespace stgp
