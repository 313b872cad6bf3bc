#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "stgp/mesh.hpp"

namespace stgp::shapes {

/// Unit square [0,1]² split into cells x cells squares, two triangles each.
inline TriMesh grid(int cells) {
  if (cells < 1) throw InputError("grid: need at least one cell");
  const int side = cells + 1;
  Eigen::MatrixX3d v(side * side, 3);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      v.row(r * side + c) << static_cast<double>(c) / cells, static_cast<double>(r) / cells, 0.0;
    }
  }
  Eigen::MatrixX3i f(2 * cells * cells, 3);
  int k = 0;
  for (int r = 0; r < cells; ++r) {
    for (int c = 0; c < cells; ++c) {
      const int a = r * side + c, b = a + 1, d = a + side, e = d + 1;
      f.row(k++) << a, b, e;
      f.row(k++) << a, e, d;
    }
  }
  return TriMesh(std::move(v), std::move(f));
}

/// Unit icosphere after `level` rounds of midpoint subdivision
/// (10·4^level + 2 vertices).
inline TriMesh icosphere(int level) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> v = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<Eigen::Vector3i> f = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
      {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      if (auto it = midpoint.find(key); it != midpoint.end()) return it->second;
      v.push_back((v[static_cast<std::size_t>(a)] + v[static_cast<std::size_t>(b)]).normalized());
      const int id = static_cast<int>(v.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<Eigen::Vector3i> next;
    next.reserve(f.size() * 4);
    for (const auto& tri : f) {
      const int ab = mid(tri[0], tri[1]), bc = mid(tri[1], tri[2]), ca = mid(tri[2], tri[0]);
      next.emplace_back(tri[0], ab, ca);
      next.emplace_back(tri[1], bc, ab);
      next.emplace_back(tri[2], ca, bc);
      next.emplace_back(ab, bc, ca);
    }
    f = std::move(next);
  }
  Eigen::MatrixX3d vm(static_cast<Eigen::Index>(v.size()), 3);
  for (std::size_t i = 0; i < v.size(); ++i) vm.row(static_cast<Eigen::Index>(i)) = v[i].transpose();
  Eigen::MatrixX3i fm(static_cast<Eigen::Index>(f.size()), 3);
  for (std::size_t i = 0; i < f.size(); ++i) fm.row(static_cast<Eigen::Index>(i)) = f[i].transpose();
  return TriMesh(std::move(vm), std::move(fm));
}

/// Closed cup-shaped surface: an outer and an inner hemispherical wall of
/// radii 1 and 1 - wall joined by a rounded rim. Points on opposite walls are
/// `wall` apart in space but far apart along the surface. Built by mapping the
/// icosphere's polar angle to arc length along the profile curve.
inline TriMesh cup(int level, double wall = 0.25) {
  if (!(wall > 0.0 && wall < 1.0)) throw InputError("cup: wall thickness must lie in (0, 1)");
  const TriMesh sphere = icosphere(level);
  const double pi = std::acos(-1.0);
  const double inner = 1.0 - wall;
  const double len_inner = 0.5 * pi * inner;
  const double len_rim = 0.5 * pi * wall;
  const double len_total = len_inner + len_rim + 0.5 * pi;  // equals pi
  Eigen::MatrixX3d v(sphere.num_vertices(), 3);
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const Eigen::Vector3d p = sphere.position(i);
    const double polar = std::acos(std::clamp(p.z(), -1.0, 1.0));
    const double azimuth = std::atan2(p.y(), p.x());
    const double s = polar / pi * len_total;
    double rho = 0.0, z = 0.0;
    if (s <= len_inner) {
      const double a = s / inner;
      rho = inner * std::sin(a);
      z = -inner * std::cos(a);
    } else if (s <= len_inner + len_rim) {
      const double b = (s - len_inner) / (0.5 * wall);
      rho = 1.0 - 0.5 * wall - 0.5 * wall * std::cos(b);
      z = 0.5 * wall * std::sin(b);
    } else {
      const double g = s - len_inner - len_rim;
      rho = std::cos(g);
      z = -std::sin(g);
    }
    v.row(i) << rho * std::cos(azimuth), rho * std::sin(azimuth), z;
  }
  return TriMesh(std::move(v), sphere.faces());
}

}  // namespace stgp::shapes
