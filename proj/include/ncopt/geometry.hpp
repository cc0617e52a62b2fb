#ifndef NCOPT_GEOMETRY_HPP
#define NCOPT_GEOMETRY_HPP

// Feasible sets and the two convex subproblems solved over them:
//   linear:        argmin_{y in S} g^T y + h(y)
//   powered prox:  argmin_{y in S} g^T (y - z) + lambda/2 ||y - z||_p^p + h(y)
// Closed forms are used where they exist (L1 terms on the Euclidean ball and
// on boxes); everything else goes through a projected-subgradient reference
// solver.

#include "ncopt/model.hpp"

#include <algorithm>
#include <memory>
#include <vector>

namespace ncopt {

// ---------------------------------------------------------------------------
// Closed-form pieces
// ---------------------------------------------------------------------------

/// z_j = sign(b_j) max(|b_j| - rho, 0). Ties |b_j| = rho give 0.
inline Vec soft_threshold(const Vec& b, double rho) {
  Vec z(b.size());
  for (Eigen::Index j = 0; j < b.size(); ++j) z[j] = sign(b[j]) * std::max(std::abs(b[j]) - rho, 0.0);
  return z;
}

inline Vec weighted_soft_threshold(const Vec& b, const L1Structure& w) {
  Vec z(b.size());
  for (Eigen::Index j = 0; j < b.size(); ++j)
    z[j] = sign(b[j]) * std::max(std::abs(b[j]) - w.weight(j), 0.0);
  return z;
}

namespace detail {

inline Vec normalize_or_zero(const Vec& z, double radius) {
  const double nz = z.norm();
  if (nz == 0.0) return Vec::Zero(z.size());
  return z * (radius / nz);
}

inline Vec shrink_to_ball(const Vec& z, double lambda, double radius) {
  return z / (lambda + std::max(0.0, z.norm() / radius - lambda));
}

}  // namespace detail

/// argmin_{||y||_2 <= radius} -y^T b + rho ||y||_1.
inline Vec ball_l1_linear_argmin(const Vec& b, double rho, double radius = 1.0) {
  return detail::normalize_or_zero(soft_threshold(b, rho), radius);
}

/// argmin_{||y||_2 <= radius} -y^T b + rho ||y||_1 + lambda/2 ||y||_2^2.
/// The prox subproblem around a center x with gradient g maps onto this form
/// with b = lambda x - g.
inline Vec ball_l1_prox_argmin(const Vec& b, double rho, double lambda, double radius = 1.0) {
  if (!(lambda > 0.0)) throw PreconditionError("ball_l1_prox_argmin: lambda must be positive");
  return detail::shrink_to_ball(soft_threshold(b, rho), lambda, radius);
}

/// Step size of the conditional-gradient update: the global minimizer over
/// [0, 1] of
///   phi(a) = a gd + a^p lambda/2 dnorm_p + (1 - a) hx + a hy.
/// phi is convex with phi'(a) = c + (p lambda/2) dnorm_p a^{p-1}, c = gd + hy - hx,
/// so its stationary point has a closed form for every p > 1.
inline double line_search_alpha(double gd, double dnorm_p, double hx, double hy, double lambda,
                                double p) {
  if (!(p > 1.0) || !(lambda > 0.0))
    throw PreconditionError("line_search_alpha: need p > 1 and lambda > 0");
  const double c = gd + hy - hx;
  if (c >= 0.0) return 0.0;
  if (dnorm_p <= 0.0) return 1.0;
  double a;
  if (p == 2.0) {
    a = -c / (lambda * dnorm_p);
  } else {
    a = std::pow(-2.0 * c / (p * lambda * dnorm_p), 1.0 / (p - 1.0));
  }
  return std::clamp(a, 0.0, 1.0);
}

/// Uniform sample from {y : ||y||_2 <= r}: Gaussian direction scaled by r U^{1/dim}.
inline Vec uniform_ball_sample(Eigen::Index dim, double r, Rng& rng) {
  if (!(r > 0.0)) throw PreconditionError("uniform_ball_sample: radius must be positive");
  Vec v = gaussian_vector(dim, rng);
  double nv = v.norm();
  while (nv == 0.0) {
    v = gaussian_vector(dim, rng);
    nv = v.norm();
  }
  const double u = uniform01(rng);
  return v * (r * std::pow(u, 1.0 / static_cast<double>(dim)) / nv);
}

/// Minimizer over [lo, hi] of the convex scalar function
///   c t + lambda/2 |t - z|^p + w |t| + mu/2 t^2,
/// with lambda, mu, w >= 0.
inline double scalar_prox(double c, double z, double lambda, double p, double w, double mu,
                          double lo = -std::numeric_limits<double>::infinity(),
                          double hi = std::numeric_limits<double>::infinity()) {
  if (lambda == 0.0 && mu == 0.0) {
    // Piecewise linear: an endpoint or the kink at 0.
    auto phi = [&](double t) { return c * t + w * std::abs(t); };
    if (!std::isfinite(lo) || !std::isfinite(hi))
      throw PreconditionError("scalar_prox: unbounded linear scalar problem");
    double best = lo;
    if (phi(hi) < phi(best)) best = hi;
    if (lo < 0.0 && hi > 0.0 && phi(0.0) < phi(best)) best = 0.0;
    return best;
  }
  // Derivative of the smooth part.
  auto smooth_slope = [&](double t) {
    const double d = t - z;
    double s = c + mu * t;
    if (lambda != 0.0) {
      s += (p == 2.0) ? lambda * d : 0.5 * lambda * p * sign(d) * std::pow(std::abs(d), p - 1.0);
    }
    return s;
  };
  auto root = [&](double shift) {
    // Solve smooth_slope(t) + shift = 0; the function is strictly increasing.
    if (p == 2.0 || lambda == 0.0) return (lambda * z - c - shift) / (lambda + mu);
    double a = -1.0;
    double b = 1.0;
    while (smooth_slope(a) + shift > 0.0) a *= 2.0;
    while (smooth_slope(b) + shift < 0.0) b *= 2.0;
    for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, std::abs(a) + std::abs(b)); ++it) {
      const double m = 0.5 * (a + b);
      if (smooth_slope(m) + shift > 0.0) {
        b = m;
      } else {
        a = m;
      }
    }
    return 0.5 * (a + b);
  };
  const double s0 = smooth_slope(0.0);
  double t = 0.0;
  if (s0 + w < 0.0) {
    t = std::max(0.0, root(w));
  } else if (s0 - w > 0.0) {
    t = std::min(0.0, root(-w));
  }
  return std::clamp(t, lo, hi);
}

// ---------------------------------------------------------------------------
// Feasible set oracles
// ---------------------------------------------------------------------------

class FeasibleSetOracle;

/// Projected-subgradient reference solver for the powered-prox subproblem
/// (lambda = 0 gives the linear subproblem). Diminishing normalized steps; the
/// best iterate seen is returned.
inline Vec reference_subgradient_solve(const FeasibleSetOracle& set, const Vec& g, const Vec& z,
                                double lambda, double p, const NonsmoothTerm& h,
                                int iterations = 10000);

class FeasibleSetOracle {
 public:
  virtual ~FeasibleSetOracle() = default;

  [[nodiscard]] virtual Eigen::Index dim() const = 0;
  [[nodiscard]] virtual bool contains(const Vec& x, double tol = 1e-10) const = 0;
  [[nodiscard]] virtual double diam_p(double p) const = 0;
  virtual Vec sample(Rng& rng) const = 0;
  [[nodiscard]] virtual Vec project(const Vec& x) const = 0;
  [[nodiscard]] virtual Vec center() const = 0;

  /// argmin_{y in S} g^T y + h(y).
  [[nodiscard]] virtual Vec solve_linear(const Vec& g, const NonsmoothTerm& h) const {
    return reference_subgradient_solve(*this, g, center(), 0.0, 2.0, h);
  }

  /// argmin_{y in S} g^T (y - z) + lambda/2 ||y - z||_p^p + h(y).
  [[nodiscard]] virtual Vec solve_powered_prox(const Vec& g, const Vec& z, double lambda, double p,
                                               const NonsmoothTerm& h) const {
    return reference_subgradient_solve(*this, g, z, lambda, p, h);
  }
};

inline double powered_prox_objective(const Vec& g, const Vec& z, double lambda, double p,
                                     const NonsmoothTerm& h, const Vec& y) {
  const Vec d = y - z;
  return g.dot(d) + 0.5 * lambda * pnorm_pow(d, p) + h(y);
}

inline Vec reference_subgradient_solve(const FeasibleSetOracle& set, const Vec& g, const Vec& z,
                                       double lambda, double p, const NonsmoothTerm& h,
                                       int iterations) {
  auto objective = [&](const Vec& y) { return powered_prox_objective(g, z, lambda, p, h, y); };
  const double diam = set.diam_p(2.0);
  Vec y = set.project(z);
  Vec best = y;
  double best_val = objective(y);
  for (int k = 1; k <= iterations; ++k) {
    Vec s = g + h.subgrad(y);
    if (lambda > 0.0) {
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double d = y[i] - z[i];
        s[i] += (p == 2.0) ? lambda * d : 0.5 * lambda * p * sign(d) * std::pow(std::abs(d), p - 1.0);
      }
    }
    const double ns = s.norm();
    if (ns == 0.0) break;
    y = set.project(y - (diam / (ns * std::sqrt(static_cast<double>(k)))) * s);
    const double val = objective(y);
    if (val < best_val) {
      best_val = val;
      best = y;
    }
  }
  return best;
}

/// Result of the linear subproblem with h(x) = sum_i w_i |(W x)_i| on a ball.
struct MappedL1Solution {
  Vec x;
  double objective = 0.0;
  double gap = 0.0;  // certified primal-dual gap
  int iterations = 0;
};

/// argmin_{||x||_2 <= r} g^T x + sum_i w_i |(W x)_i|.
///
/// Square orthogonal W: substitute u = W x and use the weighted soft threshold.
/// Otherwise solve the dual  max_{|v_i| <= w_i} -r ||g + W^T v||_2  by
/// accelerated projected gradient on 1/2 ||g + W^T v||^2 and recover
/// x = -r (g + W^T v) / ||g + W^T v||; the duality gap certifies the result.
inline MappedL1Solution solve_mapped_l1_linear_ball(const Vec& g, const Vec& weights, const Mat& w_map,
                                                    double radius, double gap_tol = 1e-9,
                                                    int max_iters = 200000) {
  const Eigen::Index n = g.size();
  const Eigen::Index m = w_map.rows();
  auto primal = [&](const Vec& x) { return g.dot(x) + weights.dot((w_map * x).cwiseAbs()); };
  MappedL1Solution out;
  if (m == n && (w_map.transpose() * w_map - Mat::Identity(n, n)).norm() <= 1e-10) {
    L1Structure s{0.0, weights, std::nullopt};
    const Vec u = detail::normalize_or_zero(weighted_soft_threshold(-(w_map * g), s), radius);
    out.x = w_map.transpose() * u;
    out.objective = primal(out.x);
    out.gap = 0.0;
    return out;
  }
  Eigen::JacobiSVD<Mat> svd(w_map);
  const double lip = std::max(svd.singularValues()(0) * svd.singularValues()(0), 1e-300);
  auto project_box = [&](Vec v) {
    for (Eigen::Index i = 0; i < m; ++i) v[i] = std::clamp(v[i], -weights[i], weights[i]);
    return v;
  };
  Vec v = Vec::Zero(m);
  Vec v_prev = v;
  Vec yv = v;
  double t = 1.0;
  double dual_obj_prev = std::numeric_limits<double>::infinity();
  Vec best_x = Vec::Zero(n);
  double best_primal = 0.0;
  double best_dual = -std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < max_iters; ++it) {
    const Vec res_v = g + w_map.transpose() * v;
    const double nres = res_v.norm();
    best_dual = std::max(best_dual, -radius * nres);
    if (nres > 0.0) {
      const Vec x = res_v * (-radius / nres);
      const double val = primal(x);
      if (val < best_primal) {
        best_primal = val;
        best_x = x;
      }
    }
    if (best_primal - best_dual <= gap_tol * std::max(1.0, std::abs(best_dual))) break;
    const Vec res_y = g + w_map.transpose() * yv;
    const Vec v_next = project_box(yv - (w_map * res_y) / lip);
    const double obj_next = 0.5 * (g + w_map.transpose() * v_next).squaredNorm();
    double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    if (obj_next > dual_obj_prev) {
      // Function-value restart.
      t = 1.0;
      t_next = 1.0;
      yv = v;
      dual_obj_prev = 0.5 * (g + w_map.transpose() * v).squaredNorm();
      continue;
    }
    v_prev = v;
    v = v_next;
    yv = v + ((t - 1.0) / t_next) * (v - v_prev);
    t = t_next;
    dual_obj_prev = obj_next;
  }
  out.x = best_x;
  out.objective = best_primal;
  out.gap = best_primal - best_dual;
  out.iterations = it;
  return out;
}

class L2BallSet final : public FeasibleSetOracle {
 public:
  L2BallSet(Eigen::Index dim, double radius = 1.0) : dim_(dim), radius_(radius) {
    if (!(radius > 0.0)) throw PreconditionError("L2BallSet: radius must be positive");
    if (dim < 1) throw PreconditionError("L2BallSet: dimension must be positive");
  }

  [[nodiscard]] double radius() const { return radius_; }
  [[nodiscard]] Eigen::Index dim() const override { return dim_; }

  [[nodiscard]] bool contains(const Vec& x, double tol = 1e-10) const override {
    return x.size() == dim_ && x.norm() <= radius_ * (1.0 + tol) + tol;
  }

  /// 2r max_{||u||_2 <= 1} ||u||_p: 2r for p >= 2, 2r n^{1/p - 1/2} below.
  [[nodiscard]] double diam_p(double p) const override {
    if (p >= 2.0) return 2.0 * radius_;
    return 2.0 * radius_ * std::pow(static_cast<double>(dim_), 1.0 / p - 0.5);
  }

  Vec sample(Rng& rng) const override { return uniform_ball_sample(dim_, radius_, rng); }

  [[nodiscard]] Vec project(const Vec& x) const override {
    const double nx = x.norm();
    return nx <= radius_ ? x : Vec(x * (radius_ / nx));
  }

  [[nodiscard]] Vec center() const override { return Vec::Zero(dim_); }

  [[nodiscard]] Vec solve_linear(const Vec& g, const NonsmoothTerm& h) const override {
    const L1Structure* s = h.l1();
    if (s == nullptr) return FeasibleSetOracle::solve_linear(g, h);
    if (s->is_zero()) return detail::normalize_or_zero(-g, radius_);
    if (s->separable()) return detail::normalize_or_zero(weighted_soft_threshold(-g, *s), radius_);
    return solve_mapped_l1_linear_ball(g, s->weights, *s->map, radius_).x;
  }

  [[nodiscard]] Vec solve_powered_prox(const Vec& g, const Vec& z, double lambda, double p,
                                       const NonsmoothTerm& h) const override {
    const L1Structure* s = h.l1();
    if (s == nullptr || !s->separable() || !(lambda > 0.0))
      return FeasibleSetOracle::solve_powered_prox(g, z, lambda, p, h);
    if (p == 2.0) {
      const Vec b = lambda * z - g;
      return detail::shrink_to_ball(weighted_soft_threshold(b, *s), lambda, radius_);
    }
    // Separable scalar problems plus bisection on the ball multiplier mu:
    // ||y(mu)||_2 is nonincreasing in mu.
    auto solve_mu = [&](double mu) {
      Vec y(dim_);
      for (Eigen::Index i = 0; i < dim_; ++i) y[i] = scalar_prox(g[i], z[i], lambda, p, s->weight(i), mu);
      return y;
    };
    Vec y = solve_mu(0.0);
    if (y.norm() <= radius_) return y;
    double mu_lo = 0.0;
    double mu_hi = 1.0;
    while (solve_mu(mu_hi).norm() > radius_) mu_hi *= 2.0;
    for (int it = 0; it < 200 && mu_hi - mu_lo > 1e-15 * std::max(1.0, mu_hi); ++it) {
      const double mid = 0.5 * (mu_lo + mu_hi);
      if (solve_mu(mid).norm() > radius_) {
        mu_lo = mid;
      } else {
        mu_hi = mid;
      }
    }
    return project(solve_mu(mu_hi));
  }

 private:
  Eigen::Index dim_;
  double radius_;
};

class BoxSet final : public FeasibleSetOracle {
 public:
  BoxSet(Vec lo, Vec hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
    if (lo_.size() != hi_.size() || lo_.size() == 0) throw PreconditionError("BoxSet: bad bounds");
    if ((hi_ - lo_).minCoeff() < 0.0) throw PreconditionError("BoxSet: lo must not exceed hi");
  }
  static BoxSet uniform(Eigen::Index dim, double lo, double hi) {
    return BoxSet(Vec::Constant(dim, lo), Vec::Constant(dim, hi));
  }

  [[nodiscard]] const Vec& lo() const { return lo_; }
  [[nodiscard]] const Vec& hi() const { return hi_; }
  [[nodiscard]] Eigen::Index dim() const override { return lo_.size(); }

  [[nodiscard]] bool contains(const Vec& x, double tol = 1e-10) const override {
    if (x.size() != lo_.size()) return false;
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (x[i] < lo_[i] - tol || x[i] > hi_[i] + tol) return false;
    return true;
  }

  [[nodiscard]] double diam_p(double p) const override { return pnorm(hi_ - lo_, p); }

  Vec sample(Rng& rng) const override {
    Vec x(lo_.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = lo_[i] + (hi_[i] - lo_[i]) * uniform01(rng);
    return x;
  }

  [[nodiscard]] Vec project(const Vec& x) const override { return x.cwiseMax(lo_).cwiseMin(hi_); }
  [[nodiscard]] Vec center() const override { return 0.5 * (lo_ + hi_); }

  [[nodiscard]] Vec solve_linear(const Vec& g, const NonsmoothTerm& h) const override {
    const L1Structure* s = h.l1();
    if (s == nullptr || !s->separable()) return FeasibleSetOracle::solve_linear(g, h);
    Vec y(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i)
      y[i] = scalar_prox(g[i], 0.0, 0.0, 2.0, s->weight(i), 0.0, lo_[i], hi_[i]);
    return y;
  }

  [[nodiscard]] Vec solve_powered_prox(const Vec& g, const Vec& z, double lambda, double p,
                                       const NonsmoothTerm& h) const override {
    const L1Structure* s = h.l1();
    if (s == nullptr || !s->separable() || !(lambda > 0.0))
      return FeasibleSetOracle::solve_powered_prox(g, z, lambda, p, h);
    Vec y(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i)
      y[i] = scalar_prox(g[i], z[i], lambda, p, s->weight(i), 0.0, lo_[i], hi_[i]);
    return y;
  }

 private:
  Vec lo_;
  Vec hi_;
};

/// Cartesian product of block sets, in concatenated coordinates. Only the
/// geometric queries are specialized; subproblems use the reference solver.
class ProductSet final : public FeasibleSetOracle {
 public:
  explicit ProductSet(std::vector<std::shared_ptr<const FeasibleSetOracle>> blocks)
      : blocks_(std::move(blocks)) {
    Eigen::Index off = 0;
    for (const auto& b : blocks_) {
      offsets_.push_back(off);
      off += b->dim();
    }
    dim_ = off;
  }

  [[nodiscard]] Eigen::Index dim() const override { return dim_; }
  [[nodiscard]] std::size_t block_count() const { return blocks_.size(); }
  [[nodiscard]] const FeasibleSetOracle& block(std::size_t i) const { return *blocks_[i]; }
  [[nodiscard]] Eigen::Index offset(std::size_t i) const { return offsets_[i]; }

  [[nodiscard]] bool contains(const Vec& x, double tol = 1e-10) const override {
    if (x.size() != dim_) return false;
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      if (!blocks_[i]->contains(x.segment(offsets_[i], blocks_[i]->dim()), tol)) return false;
    return true;
  }

  [[nodiscard]] double diam_p(double p) const override {
    double s = 0.0;
    for (const auto& b : blocks_) s += std::pow(b->diam_p(p), p);
    return std::pow(s, 1.0 / p);
  }

  Vec sample(Rng& rng) const override {
    Vec x(dim_);
    for (std::size_t i = 0; i < blocks_.size(); ++i) x.segment(offsets_[i], blocks_[i]->dim()) = blocks_[i]->sample(rng);
    return x;
  }

  [[nodiscard]] Vec project(const Vec& x) const override {
    Vec y(dim_);
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      y.segment(offsets_[i], blocks_[i]->dim()) = blocks_[i]->project(x.segment(offsets_[i], blocks_[i]->dim()));
    return y;
  }

  [[nodiscard]] Vec center() const override {
    Vec y(dim_);
    for (std::size_t i = 0; i < blocks_.size(); ++i) y.segment(offsets_[i], blocks_[i]->dim()) = blocks_[i]->center();
    return y;
  }

 private:
  std::vector<std::shared_ptr<const FeasibleSetOracle>> blocks_;
  std::vector<Eigen::Index> offsets_;
  Eigen::Index dim_ = 0;
};

}  // namespace ncopt

#endif  // NCOPT_GEOMETRY_HPP
