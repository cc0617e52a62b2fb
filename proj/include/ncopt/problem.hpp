#ifndef NCOPT_PROBLEM_HPP
#define NCOPT_PROBLEM_HPP

#include "ncopt/geometry.hpp"

#include <memory>

namespace ncopt {

/// min_{x in S} Phi(x) = f(x) + h(x).
struct ProblemInstance {
  SmoothOracle f;
  NonsmoothTerm h;
  std::shared_ptr<const FeasibleSetOracle> set;
  SmoothnessParams params;
  double phi_star_lower = -std::numeric_limits<double>::infinity();

  [[nodiscard]] Eigen::Index dim() const { return set->dim(); }
};

/// Phi(x) = f(x) + h(x) for feasible x.
inline double phi(const ProblemInstance& problem, const Vec& x) {
  if (!problem.set->contains(x, 1e-9)) throw DomainError("phi: point is not feasible");
  return problem.f(x) + problem.h(x);
}

/// Sampled minimum of Phi over `n_samples` feasible points minus a 10% margin of
/// its magnitude. Only a heuristic lower bound; callers with an analytic bound
/// should prefer it.
inline double sampled_phi_star_lower(const ProblemInstance& problem, std::uint64_t seed,
                                     int n_samples = 10000) {
  Rng rng = child_rng(seed, 0, 0x5048495354ULL);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_samples; ++i) {
    const Vec x = problem.set->sample(rng);
    best = std::min(best, problem.f(x) + problem.h(x));
  }
  return best - 0.1 * std::abs(best);
}

namespace detail {

template <class PairFn>
void for_sampled_pairs(const FeasibleSetOracle& set, double p, int n_pairs, std::uint64_t seed,
                       PairFn&& fn) {
  if (n_pairs < 1) throw PreconditionError("need at least one sample pair");
  Rng rng = child_rng(seed, 0, 0x504149525355ULL);
  for (int k = 0; k < n_pairs; ++k) {
    Vec x = set.sample(rng);
    Vec y = set.sample(rng);
    int retries = 0;
    while (pnorm(y - x, p) < 1e-12) {
      if (++retries > 1000) throw std::runtime_error("set sampling keeps producing degenerate pairs");
      y = set.sample(rng);
    }
    fn(x, y);
  }
}

}  // namespace detail

/// Smallest lambda making the p-power descent inequality hold on every sampled
/// pair:  max 2 (f(y) - f(x) - grad f(x)^T (y - x)) / ||y - x||_p^p, floored at
/// kLambdaMin.
inline double estimate_lambda(const SmoothOracle& f, const FeasibleSetOracle& set, double p,
                              int n_pairs, std::uint64_t rng_seed) {
  if (!(p > 1.0)) throw PreconditionError("estimate_lambda: p must exceed 1");
  double lam = kLambdaMin;
  detail::for_sampled_pairs(set, p, n_pairs, rng_seed, [&](const Vec& x, const Vec& y) {
    const Vec d = y - x;
    const double rem = f(y) - f(x) - f.grad(x).dot(d);
    lam = std::max(lam, 2.0 * rem / pnorm_pow(d, p));
  });
  return lam;
}

/// Sampled constant M in ||grad f(x) - grad f(y)||_q^q <= M ||x - y||_p^p.
inline double estimate_holder_constant(const SmoothOracle& f, const FeasibleSetOracle& set, double p,
                                       int n_pairs, std::uint64_t rng_seed) {
  const double q = conjugate_exponent(p);
  double m = 0.0;
  detail::for_sampled_pairs(set, p, n_pairs, rng_seed, [&](const Vec& x, const Vec& y) {
    m = std::max(m, pnorm_pow(f.grad(x) - f.grad(y), q) / pnorm_pow(x - y, p));
  });
  return m;
}

struct HolderReport {
  int pairs = 0;
  int holder_failures = 0;       // ||grad f(x) - grad f(y)||_q^q > M ||x - y||_p^p
  int consequence_failures = 0;  // f(y) > f(x) + grad^T (y - x) + M^{1/q}/p ||y - x||_p^p
  double worst_holder_margin = std::numeric_limits<double>::infinity();
  double worst_consequence_margin = std::numeric_limits<double>::infinity();

  [[nodiscard]] bool passed() const { return holder_failures == 0 && consequence_failures == 0; }
};

/// Checks the Hölder gradient condition with constant M and the descent
/// inequality it implies, on sampled pairs. Margins are rhs - lhs; comparisons
/// carry a relative slack of 1e-10.
inline HolderReport verify_holder_power(const SmoothOracle& f, const FeasibleSetOracle& set, double p,
                                        double M, int n_pairs, std::uint64_t rng_seed) {
  if (!(M > 0.0)) throw PreconditionError("verify_holder_power: M must be positive");
  const double q = conjugate_exponent(p);
  const double coef = std::pow(M, 1.0 / q) / p;
  HolderReport r;
  detail::for_sampled_pairs(set, p, n_pairs, rng_seed, [&](const Vec& x, const Vec& y) {
    ++r.pairs;
    const Vec d = y - x;
    const Vec gx = f.grad(x);
    const double dp = pnorm_pow(d, p);
    const double lhs1 = pnorm_pow(gx - f.grad(y), q);
    const double rhs1 = M * dp;
    const double m1 = rhs1 - lhs1;
    if (m1 < -1e-10 * std::max(1.0, std::abs(rhs1))) ++r.holder_failures;
    r.worst_holder_margin = std::min(r.worst_holder_margin, m1);
    const double fy = f(y);
    const double rhs2 = f(x) + gx.dot(d) + coef * dp;
    const double m2 = rhs2 - fy;
    if (m2 < -1e-10 * std::max(1.0, std::abs(rhs2))) ++r.consequence_failures;
    r.worst_consequence_margin = std::min(r.worst_consequence_margin, m2);
  });
  return r;
}

/// Failure count of the p-power descent inequality with the given lambda on a
/// fresh sample.
inline int count_descent_violations(const SmoothOracle& f, const FeasibleSetOracle& set, double p,
                                    double lambda, int n_pairs, std::uint64_t rng_seed) {
  int failures = 0;
  detail::for_sampled_pairs(set, p, n_pairs, rng_seed, [&](const Vec& x, const Vec& y) {
    const Vec d = y - x;
    const double rhs = f(x) + f.grad(x).dot(d) + 0.5 * lambda * pnorm_pow(d, p);
    if (f(y) > rhs + 1e-10 * std::max(1.0, std::abs(rhs))) ++failures;
  });
  return failures;
}

}  // namespace ncopt

#endif  // NCOPT_PROBLEM_HPP
