#ifndef NCOPT_STATIONARITY_HPP
#define NCOPT_STATIONARITY_HPP

// Model improvements and the epsilon-stationarity tests built on them.
//
// For a feasible z, with z_L / z_U the minimizers of the linearized and the
// p-powered models,
//   dL(z) = -grad f(z)^T (z_L - z) + h(z) - h(z_L)
//   dU(z) = -grad f(z)^T (z_U - z) - lambda/2 ||z_U - z||_p^p + h(z) - h(z_U).
// dL <= eps certifies eps-stationarity directly; dU certifies it once it is
// below 1/2 (eps / (diam_p lambda^{1/p}))^q, provided eps <= diam_p^p lambda.

#include "ncopt/problem.hpp"

#include <span>
#include <string>

namespace ncopt {

enum class CertificateKind { linear, powered };

inline const char* to_string(CertificateKind k) { return k == CertificateKind::linear ? "linear" : "powered"; }

struct StationarityCertificate {
  CertificateKind kind = CertificateKind::linear;
  double value = kNaN;
  double epsilon = kNaN;
  double threshold = kNaN;
  long iterate_index = -1;
  bool passed = false;
};

struct ModelImprovement {
  double delta = 0.0;
  Vec minimizer;
};

/// dL given the gradient at z.
inline ModelImprovement linear_improvement(const FeasibleSetOracle& set, const NonsmoothTerm& h,
                                           const Vec& grad, const Vec& z) {
  ModelImprovement out;
  out.minimizer = set.solve_linear(grad, h);
  out.delta = -grad.dot(out.minimizer - z) + h(z) - h(out.minimizer);
  return out;
}

/// dU given the gradient at z.
inline ModelImprovement powered_improvement(const FeasibleSetOracle& set, const NonsmoothTerm& h,
                                            const Vec& grad, const Vec& z, double lambda, double p) {
  ModelImprovement out;
  out.minimizer = set.solve_powered_prox(grad, z, lambda, p, h);
  const Vec d = out.minimizer - z;
  out.delta = -grad.dot(d) - 0.5 * lambda * pnorm_pow(d, p) + h(z) - h(out.minimizer);
  return out;
}

inline void require_feasible(const ProblemInstance& problem, const Vec& z, const char* who) {
  if (!problem.set->contains(z, 1e-9)) throw DomainError(std::string(who) + ": point is not feasible");
}

inline ModelImprovement delta_L(const ProblemInstance& problem, const Vec& z) {
  require_feasible(problem, z, "delta_L");
  return linear_improvement(*problem.set, problem.h, problem.f.grad(z), z);
}

inline ModelImprovement delta_U(const ProblemInstance& problem, const Vec& z) {
  require_feasible(problem, z, "delta_U");
  return powered_improvement(*problem.set, problem.h, problem.f.grad(z), z, problem.params.lambda,
                             problem.params.p);
}

/// 1/2 (eps / (diam lambda^{1/p}))^q, valid when 0 < eps <= diam^p lambda.
inline double powered_threshold(double eps, double diam_p, double lambda, double p) {
  if (!(eps > 0.0)) throw PreconditionError("epsilon must be positive");
  if (eps > std::pow(diam_p, p) * lambda)
    throw PreconditionError("powered certificate requires eps <= diam_p(S)^p * lambda");
  const double q = conjugate_exponent(p);
  return 0.5 * std::pow(eps / (diam_p * std::pow(lambda, 1.0 / p)), q);
}

inline StationarityCertificate check_eps_stationary_L(double delta_l, double eps, long iterate_index = -1) {
  if (!(eps > 0.0)) throw PreconditionError("epsilon must be positive");
  return {CertificateKind::linear, delta_l, eps, eps, iterate_index, delta_l <= eps};
}

inline StationarityCertificate check_eps_stationary_U(double delta_u, double eps, double diam_p,
                                                      double lambda, double p, long iterate_index = -1) {
  const double thr = powered_threshold(eps, diam_p, lambda, p);
  return {CertificateKind::powered, delta_u, eps, thr, iterate_index, delta_u <= thr};
}

struct ProxResidual {
  Vec residual;  // (x - x+) / gamma
  double norm_sq = 0.0;
  Vec x_plus;
};

/// Gradient-mapping residual with the Euclidean prox function:
///   x+ = argmin_{y in S} grad f(x)^T y + 1/(2 gamma) ||y - x||^2 + h(y).
inline ProxResidual prox_residual(const ProblemInstance& problem, const Vec& x, double gamma) {
  if (!(gamma > 0.0)) throw PreconditionError("prox_residual: gamma must be positive");
  require_feasible(problem, x, "prox_residual");
  ProxResidual out;
  // grad^T y differs from grad^T (y - x) by a constant, so the powered-prox
  // oracle with p = 2 and lambda = 1/gamma solves the same problem.
  out.x_plus = problem.set->solve_powered_prox(problem.f.grad(x), x, 1.0 / gamma, 2.0, problem.h);
  out.residual = (x - out.x_plus) / gamma;
  out.norm_sq = out.residual.squaredNorm();
  return out;
}

/// min over sampled feasible y of grad f(x)^T (y - x) + h(y) - h(x): an upper
/// bound on the infimum defining epsilon-stationarity. `extra` points are
/// included as candidates; samples farther than `max_step` (2-norm) from x are
/// skipped.
inline double sampled_psi_lower(const ProblemInstance& problem, const Vec& x, int n_samples, Rng& rng,
                                std::span<const Vec> extra = {},
                                double max_step = std::numeric_limits<double>::infinity()) {
  require_feasible(problem, x, "sampled_psi_lower");
  const Vec g = problem.f.grad(x);
  const double hx = problem.h(x);
  auto value = [&](const Vec& y) { return g.dot(y - x) + problem.h(y) - hx; };
  double best = 0.0;  // y = x
  for (int i = 0; i < n_samples; ++i) {
    const Vec y = problem.set->sample(rng);
    if ((y - x).norm() > max_step) continue;
    best = std::min(best, value(y));
  }
  for (const Vec& y : extra) {
    if ((y - x).norm() > max_step) continue;
    best = std::min(best, value(y));
  }
  return best;
}

}  // namespace ncopt

#endif  // NCOPT_STATIONARITY_HPP
