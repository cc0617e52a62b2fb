#pragma once

// Reference solvers used only by the tests. They share no code with the
// library's subproblem solvers: brute-force grids, a plain projected
// subgradient loop and direct loops over tensor indices.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Minimum {
  Vec x;
  double value = std::numeric_limits<double>::infinity();
};

/// Minimum over [lo, hi] on a uniform grid followed by golden-section
/// refinement around the best grid cell (fn is assumed unimodal near it).
inline double grid_min_1d(const std::function<double(double)>& fn, double lo, double hi, int n,
                          double* argmin = nullptr) {
  double best_t = lo;
  double best = fn(lo);
  for (int i = 1; i <= n; ++i) {
    const double t = lo + (hi - lo) * i / n;
    const double v = fn(t);
    if (v < best) {
      best = v;
      best_t = t;
    }
  }
  double a = std::max(lo, best_t - (hi - lo) / n);
  double b = std::min(hi, best_t + (hi - lo) / n);
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 200; ++it) {
    const double c = b - r * (b - a);
    const double d = a + r * (b - a);
    if (fn(c) < fn(d)) {
      b = d;
    } else {
      a = c;
    }
  }
  const double t = 0.5 * (a + b);
  if (fn(t) < best) {
    best = fn(t);
    best_t = t;
  }
  if (argmin) *argmin = best_t;
  return best;
}

/// Polar grid over the disk of the given radius.
inline Minimum disk_grid_min(const std::function<double(const Vec&)>& fn, double radius, int n_r, int n_theta) {
  Minimum m;
  Vec x(2);
  for (int i = 0; i <= n_r; ++i) {
    const double r = radius * i / n_r;
    for (int j = 0; j < (i == 0 ? 1 : n_theta); ++j) {
      const double th = 2.0 * M_PI * j / n_theta;
      x << r * std::cos(th), r * std::sin(th);
      const double v = fn(x);
      if (v < m.value) {
        m.value = v;
        m.x = x;
      }
    }
  }
  return m;
}

/// Projected subgradient with steps step0 / sqrt(k) along normalized
/// subgradients; returns the best point seen.
inline Minimum projected_subgradient(const std::function<double(const Vec&)>& fn,
                                     const std::function<Vec(const Vec&)>& subgrad,
                                     const std::function<Vec(const Vec&)>& project, Vec x, double step0,
                                     int iterations) {
  Minimum m{x, fn(x)};
  for (int k = 1; k <= iterations; ++k) {
    const Vec s = subgrad(x);
    const double ns = s.norm();
    if (ns == 0.0) break;
    x = project(x - (step0 / (ns * std::sqrt(static_cast<double>(k)))) * s);
    const double v = fn(x);
    if (v < m.value) {
      m.value = v;
      m.x = x;
    }
  }
  return m;
}

inline Vec project_ball(const Vec& x, double r = 1.0) {
  const double n = x.norm();
  return n <= r ? x : Vec(x * (r / n));
}

inline double sgn(double v) { return (v > 0) - (v < 0); }

inline Vec sign_vec(const Vec& x) {
  Vec s(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) s[i] = sgn(x[i]);
  return s;
}

/// Best of several projected-subgradient runs from random starts and the
/// origin, to make the oracle robust against a poor start.
inline Minimum ball_minimize(const std::function<double(const Vec&)>& fn,
                             const std::function<Vec(const Vec&)>& subgrad, int dim, int iterations,
                             std::mt19937_64& rng, int restarts = 3) {
  std::normal_distribution<double> nd;
  Minimum best;
  for (int r = 0; r < restarts; ++r) {
    Vec x0 = Vec::Zero(dim);
    if (r > 0) {
      for (int i = 0; i < dim; ++i) x0[i] = nd(rng);
      x0 = project_ball(x0) * 0.5;
    }
    Minimum m = projected_subgradient(fn, subgrad, [](const Vec& v) { return project_ball(v); }, x0, 1.0,
                                      iterations);
    if (m.value < best.value) best = m;
  }
  return best;
}

/// Dense multilinear form by explicit index enumeration.
inline double multilinear_brute(const std::vector<double>& entries, const std::vector<int>& dims,
                                const std::vector<Vec>& blocks) {
  const int d = static_cast<int>(dims.size());
  std::vector<int> idx(d, 0);
  double total = 0.0;
  for (std::size_t lin = 0; lin < entries.size(); ++lin) {
    double term = entries[lin];
    for (int m = 0; m < d; ++m) term *= blocks[m][idx[m]];
    total += term;
    for (int m = d - 1; m >= 0; --m) {
      if (++idx[m] < dims[m]) break;
      idx[m] = 0;
    }
  }
  return total;
}

}  // namespace oracle
