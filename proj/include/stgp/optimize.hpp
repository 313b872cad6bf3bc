#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace stgp {

struct NelderMeadOptions {
  int max_iterations = 500;
  double relative_tolerance = 1e-6;
  double initial_step = 0.5;
};

struct NelderMeadResult {
  Eigen::VectorXd argmin;
  double value = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int evaluations = 0;
};

/// Derivative-free simplex minimization. Non-finite objective values are
/// treated as +inf, so infeasible regions can be signalled by returning NaN/inf.
inline NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& objective,
                                    const Eigen::VectorXd& start,
                                    const NelderMeadOptions& options = {}) {
  const Eigen::Index dim = start.size();
  NelderMeadResult result;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++result.evaluations;
    const double f = objective(x);
    return std::isfinite(f) ? f : std::numeric_limits<double>::infinity();
  };

  std::vector<Eigen::VectorXd> simplex(static_cast<std::size_t>(dim + 1), start);
  std::vector<double> values(simplex.size());
  values[0] = eval(start);
  for (Eigen::Index i = 0; i < dim; ++i) {
    simplex[static_cast<std::size_t>(i + 1)](i) += options.initial_step;
    values[static_cast<std::size_t>(i + 1)] = eval(simplex[static_cast<std::size_t>(i + 1)]);
  }

  std::vector<std::size_t> order(simplex.size());
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<Eigen::VectorXd> s2;
    std::vector<double> v2;
    for (std::size_t k : order) {
      s2.push_back(simplex[k]);
      v2.push_back(values[k]);
    }
    simplex = std::move(s2);
    values = std::move(v2);
  };

  constexpr double reflect = 1.0, expand = 2.0, contract = 0.5, shrink = 0.5;
  const std::size_t worst = simplex.size() - 1;
  sort_simplex();
  for (; result.iterations < options.max_iterations; ++result.iterations) {
    const double best = values.front(), worst_value = values.back();
    if (std::isfinite(worst_value) &&
        std::abs(worst_value - best) <=
            options.relative_tolerance * (std::abs(best) + std::abs(worst_value)) * 0.5 + 1e-300) {
      break;
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (std::size_t k = 0; k < worst; ++k) centroid += simplex[k];
    centroid /= static_cast<double>(worst);

    const Eigen::VectorXd xr = centroid + reflect * (centroid - simplex[worst]);
    const double fr = eval(xr);
    if (fr < values.front()) {
      const Eigen::VectorXd xe = centroid + expand * (xr - centroid);
      const double fe = eval(xe);
      if (fe < fr) {
        simplex[worst] = xe;
        values[worst] = fe;
      } else {
        simplex[worst] = xr;
        values[worst] = fr;
      }
    } else if (fr < values[worst - 1]) {
      simplex[worst] = xr;
      values[worst] = fr;
    } else {
      const bool outside = fr < values[worst];
      const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + contract * (xr - centroid))
                                         : Eigen::VectorXd(centroid + contract * (simplex[worst] - centroid));
      const double fc = eval(xc);
      if (fc < std::min(fr, values[worst])) {
        simplex[worst] = xc;
        values[worst] = fc;
      } else {
        for (std::size_t k = 1; k < simplex.size(); ++k) {
          simplex[k] = simplex[0] + shrink * (simplex[k] - simplex[0]);
          values[k] = eval(simplex[k]);
        }
      }
    }
    sort_simplex();
  }
  result.argmin = simplex.front();
  result.value = values.front();
  return result;
}

}  // namespace stgp
