#pragma once

#include <cmath>
#include <vector>

#include "stgp/simulate.hpp"

namespace stgp::test {

struct CellState {
  double u = 0.0, v = 0.0;
};

// Reference single cell: classical RK4 at a fine step, same right-hand side
// written out independently.
inline std::vector<double> rk4_cell(const APParams& p, double amplitude, double duration, double t_end, double h) {
  auto f = [&](double t, CellState s) {
    const double stim = t < duration ? amplitude : 0.0;
    CellState d;
    d.u = -p.k * s.u * (s.u - p.a) * (s.u - 1.0) - s.u * s.v + stim;
    d.v = (p.epsilon0 + p.mu1 * s.v / (s.u + p.mu2)) * (-s.v - p.k * s.u * (s.u - p.a - 1.0));
    return d;
  };
  auto axpy = [](CellState s, double a, CellState d) { return CellState{s.u + a * d.u, s.v + a * d.v}; };
  std::vector<double> trace;
  CellState s;
  const long steps = std::lround(t_end / h);
  for (long n = 0; n < steps; ++n) {
    const double t = static_cast<double>(n) * h;
    trace.push_back(s.u);
    const CellState k1 = f(t, s);
    const CellState k2 = f(t + h / 2, axpy(s, h / 2, k1));
    const CellState k3 = f(t + h / 2, axpy(s, h / 2, k2));
    const CellState k4 = f(t + h, axpy(s, h, k3));
    s.u += h / 6 * (k1.u + 2 * k2.u + 2 * k3.u + k4.u);
    s.v += h / 6 * (k1.v + 2 * k2.v + 2 * k3.v + k4.v);
  }
  trace.push_back(s.u);
  return trace;
}

}  // namespace stgp::test
