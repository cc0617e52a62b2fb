#ifndef NCOPT_SOLVERS_STOCH_HPP
#define NCOPT_SOLVERS_STOCH_HPP

// Stochastic first-order oracles, the mini-batch powered-prox method and the
// randomized-smoothing conditional-gradient method for concave h.

#include "ncopt/solvers_det.hpp"

#include <cstring>
#include <vector>

namespace ncopt {

/// Unbiased noisy gradient source with E ||G(x) - grad f(x)||_q^q <= sigma^q.
struct StochasticOracle {
  std::function<Vec(const Vec&, Rng&)> sample_grad;
  double sigma = 0.0;
  double q = 2.0;
  std::function<Vec(const Vec&)> true_grad;  // may be empty outside tests
};

enum class NoiseModel { gaussian, uniform };

inline NoiseModel parse_noise_model(const std::string& s) {
  if (s == "gaussian") return NoiseModel::gaussian;
  if (s == "uniform") return NoiseModel::uniform;
  throw PreconditionError("unknown noise model '" + s + "'");
}

/// E|Z|^q for a standard normal Z.
inline double gaussian_abs_moment(double q) {
  return std::pow(2.0, 0.5 * q) * std::tgamma(0.5 * (q + 1.0)) / std::sqrt(M_PI);
}

/// Per-coordinate scale giving E ||noise||_q^q = sigma^q exactly:
///  gaussian: standard deviation s with n s^q E|Z|^q = sigma^q,
///  uniform:  half-width a of U[-a, a] with n a^q / (q + 1) = sigma^q.
inline double noise_scale(NoiseModel model, double sigma, double q, Eigen::Index dim) {
  const double n = static_cast<double>(dim);
  if (model == NoiseModel::gaussian) return sigma / std::pow(n * gaussian_abs_moment(q), 1.0 / q);
  return sigma * std::pow((q + 1.0) / n, 1.0 / q);
}

/// grad f(x) plus i.i.d. zero-mean coordinate noise.
inline StochasticOracle make_noisy_oracle(const SmoothOracle& f, NoiseModel model, double sigma, double q,
                                          Eigen::Index dim) {
  if (sigma < 0.0) throw PreconditionError("noise level sigma must be nonnegative");
  const double scale = noise_scale(model, sigma, q, dim);
  StochasticOracle o;
  o.sigma = sigma;
  o.q = q;
  o.true_grad = f.grad;
  o.sample_grad = [grad = f.grad, model, scale, sigma](const Vec& x, Rng& rng) -> Vec {
    Vec g = grad(x);
    if (sigma == 0.0) return g;
    if (model == NoiseModel::gaussian) {
      std::normal_distribution<double> nd(0.0, scale);
      for (Eigen::Index i = 0; i < g.size(); ++i) g[i] += nd(rng);
    } else {
      std::uniform_real_distribution<double> ud(-scale, scale);
      for (Eigen::Index i = 0; i < g.size(); ++i) g[i] += ud(rng);
    }
    return g;
  };
  return o;
}

// ---------------------------------------------------------------------------
// Mini-batch powered-prox method
// ---------------------------------------------------------------------------

struct Alg3Plan {
  long n_bar = 1;       // total oracle calls
  long m = 1;           // batch size
  long iterations = 1;  // floor(n_bar / m), at least 1
  bool calls_condition_ok = true;     // n_bar >= sigma^p (q-1)^{p/q} / (lambda p gap^{p/q})
  bool variance_condition_ok = true;  // n_bar >= (lambda p)^{q/p} sigma^q / gap
};

inline Alg3Plan plan_alg3(double eps, double sigma, double lambda, double p, double diam_p, double phi_gap) {
  if (!(eps > 0.0)) throw PreconditionError("epsilon must be positive");
  if (!(p >= 2.0)) throw PreconditionError("mini-batch planner requires p >= 2");
  if (!(lambda > 0.0)) throw PreconditionError("lambda must be positive");
  if (sigma < 0.0) throw PreconditionError("sigma must be nonnegative");
  const double q = conjugate_exponent(p);
  const double gap = std::max(phi_gap, 0.0);
  Alg3Plan plan;
  const double factor = std::pow(1.0 + std::pow(q - 1.0, -1.0 / p + 1.0 / q), p);
  const double nb = std::pow(4.0 * sigma, p) * std::pow(lambda, q - 1.0) * std::pow(diam_p, p * q) * gap * factor /
                    (p * std::pow(eps, p * q));
  plan.n_bar = std::max(1L, static_cast<long>(std::ceil(nb)));
  const double nbar = static_cast<double>(plan.n_bar);
  double ratio = 0.0;
  if (sigma > 0.0 && gap > 0.0)
    ratio = sigma * std::pow((q - 1.0) * nbar, 1.0 / q) / (std::pow(lambda * p, 1.0 / p) * std::pow(gap, 1.0 / q));
  plan.m = static_cast<long>(std::ceil(std::min(std::max(1.0, ratio), nbar)));
  plan.iterations = std::max(1L, plan.n_bar / plan.m);
  if (gap > 0.0) {
    plan.calls_condition_ok =
        nbar >= std::pow(sigma, p) * std::pow(q - 1.0, p / q) / (lambda * p * std::pow(gap, p / q));
    plan.variance_condition_ok = nbar >= std::pow(lambda * p, q / p) * std::pow(sigma, q) / gap;
  }
  return plan;
}

struct StochasticRunConfig {
  long iterations = 1;
  std::vector<long> batch;  // one entry per step, or a single entry reused
  std::uint64_t seed = 0;
  double eps = kNaN;        // optional: certificate threshold source
  bool exact_certificate = true;
  bool timing = false;

  [[nodiscard]] long batch_at(long k) const {
    if (batch.empty()) return 1;
    if (batch.size() == 1) return batch[0];
    return batch[static_cast<std::size_t>(k - 1)];
  }
};

namespace detail {

inline void validate_stochastic(const StochasticRunConfig& cfg) {
  if (cfg.iterations < 1) throw PreconditionError("iteration count must be at least 1");
  if (cfg.batch.size() > 1 && static_cast<long>(cfg.batch.size()) != cfg.iterations)
    throw PreconditionError("batch schedule length must match the iteration count");
  for (long m : cfg.batch)
    if (m < 1) throw PreconditionError("batch sizes must be at least 1");
}

/// Sample mean accumulated as a running average so that identical samples
/// reproduce the sample exactly.
template <class Draw>
Vec batch_mean(long m, Draw&& draw) {
  Vec mean = draw();
  for (long i = 1; i < m; ++i) mean += (draw() - mean) / static_cast<double>(i + 1);
  return mean;
}

inline std::uint64_t step_salt(const char* tag) { return fnv1a(tag, std::strlen(tag)); }

}  // namespace detail

/// Mini-batch method: G_k averages m_k oracle samples at x^k and
/// x^{k+1} = argmin_S G_k^T (y - x^k) + lambda/2 ||y - x^k||_p^p + h(y).
/// Rows record the sampled improvement in `cert`, the exact powered
/// improvement (true gradient) in `cert_exact`, and a digest of G_k.
inline IterationTrace run_alg3(const ProblemInstance& problem, const StochasticOracle& oracle, const Vec& x0,
                               const StochasticRunConfig& cfg) {
  detail::require_start(problem, x0);
  detail::validate_stochastic(cfg);
  if (!(problem.params.p >= 2.0)) throw PreconditionError("mini-batch method requires p >= 2");
  const double lambda = problem.params.lambda;
  const double p = problem.params.p;
  const double diam = problem.set->diam_p(p);
  IterationTrace t;
  t.algorithm = "alg3";
  t.planned_N = cfg.iterations;
  const std::uint64_t salt = detail::step_salt("alg3");
  Vec x = x0;
  Vec best_x = x0;
  double best_val = std::numeric_limits<double>::infinity();
  StepTimer timer(cfg.timing);
  for (long k = 1; k <= cfg.iterations; ++k) {
    Rng rng = child_rng(cfg.seed, static_cast<std::uint64_t>(k), salt);
    const Vec g = detail::batch_mean(cfg.batch_at(k), [&] { return oracle.sample_grad(x, rng); });
    const ModelImprovement up = powered_improvement(*problem.set, problem.h, g, x, lambda, p);
    TraceRow row;
    row.k = k;
    row.phi = detail::phi_unchecked(problem, x);
    row.cert = up.delta;
    if (cfg.exact_certificate && oracle.true_grad)
      row.cert_exact = powered_improvement(*problem.set, problem.h, oracle.true_grad(x), x, lambda, p).delta;
    row.rng_digest = digest(g);
    if (up.delta < best_val) {
      best_val = up.delta;
      best_x = x;
    }
    x = up.minimizer;
    row.wall_ns = timer.lap();
    t.rows.push_back(row);
  }
  t.iterations = cfg.iterations;
  StationarityCertificate cert;
  cert.kind = CertificateKind::powered;
  if (std::isfinite(cfg.eps)) cert = check_eps_stationary_U(kNaN, cfg.eps, diam, lambda, p);
  detail::finish_trace(t, cert, false, problem, x);
  t.x_best = best_x;
  return t;
}

// ---------------------------------------------------------------------------
// Randomized smoothing
// ---------------------------------------------------------------------------

struct SmoothedEstimate {
  double value = 0.0;
  Vec grad;
  double value_se = 0.0;  // standard error of `value`
};

/// Monte Carlo estimates of h_r(x) = E h(x + r xi) and its gradient
/// E grad h(x + r xi), xi uniform on the unit Euclidean ball.
inline SmoothedEstimate estimate_h_r(const NonsmoothTerm& h, const Vec& x, double r, long n_samples, Rng& rng) {
  if (!(r > 0.0)) throw PreconditionError("smoothing radius must be positive");
  if (n_samples < 1) throw PreconditionError("need at least one sample");
  SmoothedEstimate out;
  out.grad = Vec::Zero(x.size());
  double mean = 0.0;
  double m2 = 0.0;
  for (long i = 0; i < n_samples; ++i) {
    const Vec y = x + uniform_ball_sample(x.size(), r, rng);
    const double v = h(y);
    const double delta = v - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (v - mean);
    out.grad += (h.subgrad(y) - out.grad) / static_cast<double>(i + 1);
  }
  out.value = mean;
  out.value_se = n_samples > 1 ? std::sqrt(m2 / static_cast<double>(n_samples - 1) / static_cast<double>(n_samples)) : 0.0;
  return out;
}

struct SmoothingConfig {
  double r = 0.1;
  double M = 0.0;           // bound on ||grad h||_2 over S + r B
  std::vector<long> batch;  // per-step batch sizes, or a single entry reused
  std::function<Vec(const Vec&)> exact_smoothed_grad;  // optional, for diagnostics
};

struct Alg4Plan {
  long iterations = 1;
  long m = 1;
};

/// N = ceil(4 gap (diam_p^p lambda)^{q-1} / eps^q), m = ceil(diam_2^2 M^2 N^2 / gap^2).
inline Alg4Plan plan_alg4(double eps, double phi_gap, double diam_p, double diam_2, double M, double lambda,
                          double p) {
  const double q = conjugate_exponent(p);
  const double scale = std::pow(diam_p, p) * lambda;
  if (!(eps > 0.0) || eps > scale) throw PreconditionError("smoothing schedule requires 0 < eps <= diam_p(S)^p * lambda");
  if (M < 0.0) throw PreconditionError("subgradient bound M must be nonnegative");
  const double gap = std::max(phi_gap, 0.0);
  Alg4Plan plan;
  plan.iterations = std::max(1L, static_cast<long>(std::ceil(4.0 * gap * std::pow(scale, q - 1.0) / std::pow(eps, q))));
  if (gap > 0.0) {
    const double n = static_cast<double>(plan.iterations);
    plan.m = std::max(1L, static_cast<long>(std::ceil(diam_2 * diam_2 * M * M * n * n / (gap * gap))));
  }
  return plan;
}

/// Smoothed conditional gradient for concave h: G_k averages grad h at
/// x^k + r xi, y^k minimizes the linear model (grad f + G_k)^T y over S, the
/// step minimizes a (grad f + G_k)^T d + a^p lambda/2 ||d||_p^p on [0, 1].
/// `cert` is the sampled linear improvement; `cert_exact` uses
/// `exact_smoothed_grad` when provided.
inline IterationTrace run_alg4(const ProblemInstance& problem, const SmoothingConfig& smoothing, const Vec& x0,
                               const StochasticRunConfig& cfg) {
  detail::require_start(problem, x0);
  if (!(smoothing.r > 0.0)) throw PreconditionError("smoothing radius must be positive");
  if (smoothing.M < 0.0) throw PreconditionError("subgradient bound M must be nonnegative");
  StochasticRunConfig run = cfg;
  if (!smoothing.batch.empty()) run.batch = smoothing.batch;
  detail::validate_stochastic(run);
  const double lambda = problem.params.lambda;
  const double p = problem.params.p;
  const NonsmoothTerm none = NonsmoothTerm::zero();
  IterationTrace t;
  t.algorithm = "alg4";
  t.planned_N = run.iterations;
  const std::uint64_t salt = detail::step_salt("alg4");
  Vec x = x0;
  Vec best_x = x0;
  double best_val = std::numeric_limits<double>::infinity();
  StepTimer timer(run.timing);
  for (long k = 1; k <= run.iterations; ++k) {
    Rng rng = child_rng(run.seed, static_cast<std::uint64_t>(k), salt);
    const Vec gh = detail::batch_mean(run.batch_at(k), [&] {
      return problem.h.subgrad(x + uniform_ball_sample(x.size(), smoothing.r, rng));
    });
    const Vec g = problem.f.grad(x) + gh;
    const Vec y = problem.set->solve_linear(g, none);
    const Vec d = y - x;
    TraceRow row;
    row.k = k;
    row.phi = detail::phi_unchecked(problem, x);
    row.cert = -g.dot(d);
    if (smoothing.exact_smoothed_grad) {
      const Vec ge = problem.f.grad(x) + smoothing.exact_smoothed_grad(x);
      row.cert_exact = -ge.dot(problem.set->solve_linear(ge, none) - x);
    }
    row.rng_digest = digest(gh);
    if (row.cert < best_val) {
      best_val = row.cert;
      best_x = x;
    }
    row.alpha = line_search_alpha(g.dot(d), pnorm_pow(d, p), 0.0, 0.0, lambda, p);
    x = (1.0 - row.alpha) * x + row.alpha * y;
    row.wall_ns = timer.lap();
    t.rows.push_back(row);
  }
  t.iterations = run.iterations;
  StationarityCertificate cert;
  if (std::isfinite(run.eps)) cert = check_eps_stationary_L(kNaN, run.eps);
  detail::finish_trace(t, cert, false, problem, x);
  t.x_best = best_x;
  return t;
}

}  // namespace ncopt

#endif  // NCOPT_SOLVERS_STOCH_HPP
