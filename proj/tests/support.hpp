#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <sstream>
#include <string>

#include "stgp/mesh.hpp"
#include "stgp/shapes.hpp"

namespace stgp::test {

inline TriMesh tetrahedron() {
  std::istringstream in(
      "OFF\n4 4 0\n"
      "0 0 0\n1 0 0\n0 1 0\n0 0 1\n"
      "3 0 2 1\n3 0 1 3\n3 1 2 3\n3 0 3 2\n");
  return read_off(in);
}

/// Two equilateral triangles sharing edge (0, 1).
inline TriMesh equilateral_pair() {
  const double h = std::sqrt(3.0) / 2.0;
  Eigen::MatrixX3d v(4, 3);
  v << 0, 0, 0, 1, 0, 0, 0.5, h, 0, 0.5, -h, 0;
  Eigen::MatrixX3i f(2, 3);
  f << 0, 1, 2, 1, 0, 3;
  return TriMesh(v, f);
}

/// Grid of the unit square with seeded random out-of-plane bumps.
inline TriMesh bumpy_grid(int cells, std::uint64_t seed) {
  const TriMesh flat = shapes::grid(cells);
  Eigen::MatrixX3d v = flat.vertices();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> bump(-0.1, 0.1);
  for (Eigen::Index i = 0; i < v.rows(); ++i) v(i, 2) = bump(rng);
  return TriMesh(v, flat.faces());
}

inline double max_relative_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max(1e-300, b.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace stgp::test
