#ifndef NCOPT_MODEL_HPP
#define NCOPT_MODEL_HPP

// Building blocks of the composite objective Phi(x) = f(x) + h(x): the smooth
// oracle f, the nonsmooth convex term h and the smoothness parameters (p, q,
// lambda) of the p-power descent inequality
//   f(y) <= f(x) + grad f(x)^T (y - x) + lambda/2 ||y - x||_p^p.

#include "ncopt/common.hpp"

#include <functional>
#include <optional>
#include <utility>

namespace ncopt {

/// Floor applied to estimated smoothness constants.
inline constexpr double kLambdaMin = 1e-8;

struct SmoothnessParams {
  double p = 2.0;
  double q = 2.0;
  double lambda = 1.0;

  SmoothnessParams() = default;
  SmoothnessParams(double p_, double lambda_) : p(p_), q(conjugate_exponent(p_)), lambda(lambda_) {
    if (!(lambda_ > 0.0)) throw PreconditionError("smoothness constant lambda must be positive");
  }

  [[nodiscard]] bool consistent() const {
    return p > 1.0 && lambda > 0.0 && std::abs(1.0 / p + 1.0 / q - 1.0) <= 1e-12;
  }
};

struct SmoothOracle {
  std::function<double(const Vec&)> eval;
  std::function<Vec(const Vec&)> grad;
  bool concave = false;

  double operator()(const Vec& x) const { return eval(x); }
};

/// h(x) = sum_i w_i |(M x)_i|. Empty weights mean the uniform weight rho; an
/// absent map means M = I.
struct L1Structure {
  double rho = 0.0;
  Vec weights;
  std::optional<Mat> map;

  [[nodiscard]] double weight(Eigen::Index i) const { return weights.size() ? weights[i] : rho; }
  [[nodiscard]] bool is_zero() const {
    return weights.size() == 0 ? rho == 0.0 : weights.cwiseAbs().maxCoeff() == 0.0;
  }
  [[nodiscard]] bool separable() const { return !map.has_value(); }
};

class NonsmoothTerm {
 public:
  using EvalFn = std::function<double(const Vec&)>;
  using SubgradFn = std::function<Vec(const Vec&)>;

  NonsmoothTerm() : l1_(L1Structure{}) {}

  static NonsmoothTerm zero() { return l1(0.0); }

  static NonsmoothTerm l1(double rho) {
    if (rho < 0.0) throw PreconditionError("l1 weight must be nonnegative");
    NonsmoothTerm t;
    t.l1_ = L1Structure{rho, Vec(), std::nullopt};
    return t;
  }

  static NonsmoothTerm weighted_l1(Vec weights) {
    if (weights.size() && weights.minCoeff() < 0.0)
      throw PreconditionError("l1 weights must be nonnegative");
    NonsmoothTerm t;
    t.l1_ = L1Structure{0.0, std::move(weights), std::nullopt};
    return t;
  }

  /// h(x) = sum_i w_i |(M x)_i|.
  static NonsmoothTerm weighted_l1_map(Vec weights, Mat map) {
    if (weights.size() != map.rows()) throw PreconditionError("weights must match map rows");
    if (weights.size() && weights.minCoeff() < 0.0)
      throw PreconditionError("l1 weights must be nonnegative");
    NonsmoothTerm t;
    t.l1_ = L1Structure{0.0, std::move(weights), std::move(map)};
    return t;
  }

  /// Arbitrary term given by value and (sub)gradient callbacks. `bound` is the
  /// sup of subgradient 2-norms on the region of interest.
  static NonsmoothTerm custom(EvalFn eval, SubgradFn subgrad, double bound, bool concave = false) {
    NonsmoothTerm t(Tag{});
    t.eval_ = std::move(eval);
    t.subgrad_ = std::move(subgrad);
    t.bound_ = bound;
    t.concave_ = concave;
    return t;
  }

  double operator()(const Vec& x) const { return eval(x); }

  double eval(const Vec& x) const {
    if (!l1_) return eval_(x);
    const L1Structure& s = *l1_;
    if (s.is_zero()) return 0.0;
    if (s.map) {
      const Vec y = *s.map * x;
      return s.weights.dot(y.cwiseAbs());
    }
    if (s.weights.size()) return s.weights.dot(x.cwiseAbs());
    return s.rho * x.lpNorm<1>();
  }

  /// One element of the subdifferential (0 is chosen at kinks of |.|).
  Vec subgrad(const Vec& x) const {
    if (!l1_) return subgrad_(x);
    const L1Structure& s = *l1_;
    if (s.map) {
      const Vec y = *s.map * x;
      Vec w(y.size());
      for (Eigen::Index i = 0; i < y.size(); ++i) w[i] = s.weights[i] * sign(y[i]);
      return s.map->transpose() * w;
    }
    Vec g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) g[i] = s.weight(i) * sign(x[i]);
    return g;
  }

  /// Upper bound on ||g||_2 over subgradients g, for points of dimension `dim`.
  [[nodiscard]] double subgrad_bound(Eigen::Index dim) const {
    if (!l1_) return bound_;
    const L1Structure& s = *l1_;
    if (s.map) {
      Eigen::JacobiSVD<Mat> svd(*s.map);
      return svd.singularValues()(0) * s.weights.norm();
    }
    if (s.weights.size()) return s.weights.norm();
    return s.rho * std::sqrt(static_cast<double>(dim));
  }

  [[nodiscard]] const L1Structure* l1() const { return l1_ ? &*l1_ : nullptr; }
  [[nodiscard]] bool is_zero() const { return l1_ && l1_->is_zero(); }
  [[nodiscard]] bool concave() const { return concave_; }

 private:
  struct Tag {};
  explicit NonsmoothTerm(Tag) {}

  std::optional<L1Structure> l1_;
  EvalFn eval_;
  SubgradFn subgrad_;
  double bound_ = 0.0;
  bool concave_ = false;
};

/// Central-difference gradient.
inline Vec finite_difference_gradient(const std::function<double(const Vec&)>& f, const Vec& x,
                                      double step = 1e-6) {
  Vec g(x.size());
  Vec xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    const double hstep = step * std::max(1.0, std::abs(xi));
    xp[i] = xi + hstep;
    const double fp = f(xp);
    xp[i] = xi - hstep;
    const double fm = f(xp);
    xp[i] = xi;
    g[i] = (fp - fm) / (2.0 * hstep);
  }
  return g;
}

/// Relative error ||grad - fd|| / max(1, ||fd||) between the analytic gradient
/// and central differences at x.
inline double gradient_check_error(const SmoothOracle& f, const Vec& x, double step = 1e-6) {
  const Vec fd = finite_difference_gradient(f.eval, x, step);
  const Vec g = f.grad(x);
  return (g - fd).norm() / std::max(1.0, fd.norm());
}

}  // namespace ncopt

#endif  // NCOPT_MODEL_HPP
