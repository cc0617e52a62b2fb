#ifndef NCOPT_SOLVERS_DET_HPP
#define NCOPT_SOLVERS_DET_HPP

// Deterministic single-block solvers: the proximal conditional-gradient method
// (linearized model + line search), its unit-step variant for concave f, and
// the p-powered proximal method. Each run starts at k = 1 with x^1 = x0.

#include "ncopt/trace.hpp"

namespace ncopt {

enum class PlannerMode { explicit_N, eps_target };

struct SolveConfig {
  double eps = 1e-3;
  long max_iters = 1000;
  PlannerMode planner_mode = PlannerMode::eps_target;
  bool early_stop = true;
  bool record_trace = true;
  bool timing = false;
};

/// ceil(2 gap (diam_p^p lambda)^{q-1} / eps^q), at least 1; requires
/// 0 < eps < diam_p^p lambda.
inline long plan_alg1_N(double phi_gap, double diam_p, double lambda, double p, double eps) {
  const double q = conjugate_exponent(p);
  const double scale = std::pow(diam_p, p) * lambda;
  if (!(eps > 0.0) || !(eps < scale))
    throw PreconditionError("iteration bound requires 0 < eps < diam_p(S)^p * lambda");
  const double n = 2.0 * std::max(phi_gap, 0.0) * std::pow(scale, q - 1.0) / std::pow(eps, q);
  return std::max(1L, static_cast<long>(std::ceil(n)));
}

/// ceil(gap / eps), at least 1: the unit-step bound for concave f.
inline long plan_concave_N(double phi_gap, double eps) {
  if (!(eps > 0.0)) throw PreconditionError("epsilon must be positive");
  return std::max(1L, static_cast<long>(std::ceil(std::max(phi_gap, 0.0) / eps)));
}

namespace detail {

inline double phi_unchecked(const ProblemInstance& pr, const Vec& x) { return pr.f(x) + pr.h(x); }

inline double phi_gap(const ProblemInstance& pr, const Vec& x0) {
  if (!std::isfinite(pr.phi_star_lower))
    throw PreconditionError("planner needs a finite lower bound on the optimal value");
  return phi_unchecked(pr, x0) - pr.phi_star_lower;
}

inline void require_start(const ProblemInstance& pr, const Vec& x0) {
  if (x0.size() != pr.dim() || !pr.set->contains(x0, 1e-9)) throw DomainError("starting point is not feasible");
}

/// Fills the trace tail: best index, certificate for non-early exits, final point.
inline void finish_trace(IterationTrace& t, const StationarityCertificate& early, bool hit,
                         const ProblemInstance& pr, const Vec& x) {
  t.best_index = select_best_row(t.rows);
  if (hit) {
    t.certificate = early;
  } else {
    t.certificate = early;
    if (t.best_index >= 0) {
      const TraceRow& b = t.rows[static_cast<std::size_t>(t.best_index)];
      t.certificate.value = b.cert;
      t.certificate.iterate_index = b.k;
      t.certificate.passed = b.cert <= t.certificate.threshold;
    }
  }
  t.x_final = x;
  t.final_phi = phi_unchecked(pr, x);
}

inline IterationTrace run_conditional_gradient(const ProblemInstance& pr, const Vec& x0,
                                               const SolveConfig& cfg, bool unit_step) {
  require_start(pr, x0);
  if (!(cfg.eps > 0.0)) throw PreconditionError("epsilon must be positive");
  if (cfg.max_iters < 1) throw PreconditionError("max_iters must be at least 1");
  const double lambda = pr.params.lambda;
  const double p = pr.params.p;
  IterationTrace t;
  t.algorithm = unit_step ? "alg1_concave" : "alg1";
  long n_max = cfg.max_iters;
  if (cfg.planner_mode == PlannerMode::eps_target) {
    const double gap = phi_gap(pr, x0);
    t.planned_N = unit_step ? plan_concave_N(gap, cfg.eps)
                            : plan_alg1_N(gap, pr.set->diam_p(p), lambda, p, cfg.eps);
    n_max = std::min(n_max, t.planned_N);
  } else {
    t.planned_N = n_max;
  }
  StationarityCertificate cert = check_eps_stationary_L(kNaN, cfg.eps);
  bool hit = false;
  Vec x = x0;
  Vec best_x = x0;
  double best_val = std::numeric_limits<double>::infinity();
  StepTimer timer(cfg.timing);
  for (long k = 1; k <= n_max; ++k) {
    const Vec g = pr.f.grad(x);
    const double hx = pr.h(x);
    const ModelImprovement lin = linear_improvement(*pr.set, pr.h, g, x);
    TraceRow row;
    row.k = k;
    row.phi = pr.f(x) + hx;
    row.cert = lin.delta;
    t.iterations = k;
    if (lin.delta < best_val) {
      best_val = lin.delta;
      best_x = x;
    }
    if (lin.delta <= cfg.eps && !hit) {
      hit = true;
      cert = check_eps_stationary_L(lin.delta, cfg.eps, k);
    }
    if (hit && cfg.early_stop) {
      row.wall_ns = timer.lap();
      t.rows.push_back(row);
      break;
    }
    const Vec d = lin.minimizer - x;
    const double alpha =
        unit_step ? 1.0 : line_search_alpha(g.dot(d), pnorm_pow(d, p), hx, pr.h(lin.minimizer), lambda, p);
    row.alpha = alpha;
    x = (1.0 - alpha) * x + alpha * lin.minimizer;
    row.wall_ns = timer.lap();
    t.rows.push_back(row);
  }
  finish_trace(t, cert, hit, pr, x);
  t.x_best = best_x;
  return t;
}

}  // namespace detail

/// Proximal conditional gradient: y^k minimizes the linearized model, the step
/// along d^k = y^k - x^k minimizes the p-powered upper model on [0, 1].
inline IterationTrace run_alg1(const ProblemInstance& problem, const Vec& x0, const SolveConfig& config) {
  return detail::run_conditional_gradient(problem, x0, config, false);
}

/// Conditional gradient with unit steps, x^{k+1} = y^k. Only valid for concave f.
inline IterationTrace run_alg1_concave(const ProblemInstance& problem, const Vec& x0,
                                       const SolveConfig& config) {
  if (!problem.f.concave) throw PreconditionError("concave_flag required for the unit-step variant");
  return detail::run_conditional_gradient(problem, x0, config, true);
}

/// p-powered proximal method: x^{k+1} minimizes the upper model
/// f(x^k) + grad^T (y - x^k) + lambda/2 ||y - x^k||_p^p + h(y) over S.
inline IterationTrace run_alg2(const ProblemInstance& problem, const Vec& x0, const SolveConfig& config) {
  detail::require_start(problem, x0);
  if (config.max_iters < 1) throw PreconditionError("max_iters must be at least 1");
  const double lambda = problem.params.lambda;
  const double p = problem.params.p;
  const double diam = problem.set->diam_p(p);
  IterationTrace t;
  t.algorithm = "alg2";
  long n_max = config.max_iters;
  if (config.planner_mode == PlannerMode::eps_target) {
    t.planned_N = plan_alg1_N(detail::phi_gap(problem, x0), diam, lambda, p, config.eps);
    n_max = std::min(n_max, t.planned_N);
  } else {
    t.planned_N = n_max;
  }
  StationarityCertificate cert = check_eps_stationary_U(kNaN, config.eps, diam, lambda, p);
  bool hit = false;
  Vec x = x0;
  Vec best_x = x0;
  double best_val = std::numeric_limits<double>::infinity();
  StepTimer timer(config.timing);
  for (long k = 1; k <= n_max; ++k) {
    const Vec g = problem.f.grad(x);
    const ModelImprovement up = powered_improvement(*problem.set, problem.h, g, x, lambda, p);
    TraceRow row;
    row.k = k;
    row.phi = detail::phi_unchecked(problem, x);
    row.cert = up.delta;
    t.iterations = k;
    if (up.delta < best_val) {
      best_val = up.delta;
      best_x = x;
    }
    if (up.delta <= cert.threshold && !hit) {
      hit = true;
      cert = check_eps_stationary_U(up.delta, config.eps, diam, lambda, p, k);
    }
    if (hit && config.early_stop) {
      row.wall_ns = timer.lap();
      t.rows.push_back(row);
      break;
    }
    row.decrease = up.delta;
    x = up.minimizer;
    row.wall_ns = timer.lap();
    t.rows.push_back(row);
  }
  detail::finish_trace(t, cert, hit, problem, x);
  t.x_best = best_x;
  return t;
}

}  // namespace ncopt

#endif  // NCOPT_SOLVERS_DET_HPP
