#ifndef NCOPT_HARNESS_HPP
#define NCOPT_HARNESS_HPP

// Experiment plumbing behind the command-line tool: property suites, planner
// tables, JSON run configs and the two benchmark tables.

#include "ncopt/applications.hpp"
#include "ncopt/multiblock.hpp"
#include "ncopt/solvers_det.hpp"
#include "ncopt/solvers_stoch.hpp"
#include "ncopt/trace.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

namespace ncopt::harness {

/// Malformed or inconsistent run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::filesystem::path output_dir(const std::string& configured) {
  if (const char* env = std::getenv("NCOPT_OUT_DIR"); env != nullptr && *env != '\0') return env;
  return configured.empty() ? std::filesystem::path(".") : std::filesystem::path(configured);
}

// ---------------------------------------------------------------------------
// Property suites
// ---------------------------------------------------------------------------

struct VerifyResult {
  std::string suite;
  long checks = 0;
  long violations = 0;
  double metric = 0.0;  // suite-specific worst case, see metric_name
  std::string metric_name;
  nlohmann::json counterexample;  // first violation, null when none
  std::vector<std::string> lines;

  [[nodiscard]] bool passed() const { return violations == 0 && checks > 0; }
};

namespace detail {

inline nlohmann::json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline void record(VerifyResult& r, bool ok, const std::function<nlohmann::json()>& dump) {
  ++r.checks;
  if (ok) return;
  if (r.violations == 0) r.counterexample = dump();
  ++r.violations;
}

inline double signed_power(double v, double e) { return std::copysign(std::pow(std::abs(v), e), v); }

}  // namespace detail

/// (s(a-c) - s(b-c))(a-b) >= (1/2)^{p-2} |a-b|^p with s(t) = sign(t)|t|^{p-1}.
inline VerifyResult verify_power_monotonicity(std::uint64_t seed, long trials = 100000) {
  VerifyResult r;
  r.suite = "power_monotonicity";
  r.metric_name = "p2_equality_error";
  Rng rng = child_rng(seed, 0, fnv1a("power_monotonicity", 6));
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int p : {2, 3, 4}) {
    long bad = 0;
    for (long t = 0; t < trials; ++t) {
      const double a = u(rng), b = u(rng), c = u(rng);
      const double lhs = (detail::signed_power(a - c, p - 1) - detail::signed_power(b - c, p - 1)) * (a - b);
      const double rhs = std::pow(0.5, p - 2) * std::pow(std::abs(a - b), p);
      const double slack = 1e-12 * std::max(1.0, std::abs(rhs));
      if (p == 2) r.metric = std::max(r.metric, std::abs(lhs - rhs) / std::max(1.0, rhs));
      const bool ok = lhs >= rhs - slack && (p != 2 || std::abs(lhs - rhs) <= slack);
      if (!ok) ++bad;
      detail::record(r, ok, [&] { return nlohmann::json{{"p", p}, {"a", a}, {"b", b}, {"c", c}, {"lhs", lhs}, {"rhs", rhs}}; });
    }
    r.lines.push_back("p=" + std::to_string(p) + " trials=" + std::to_string(trials) + " violations=" + std::to_string(bad));
  }
  return r;
}

/// Powered-prox stability on the unit ball, p = 2:
///   (1/2)^p ||x1 - x2||_p^p <= (1/(lambda p))^q ||g1 - g2||_q^q.
inline VerifyResult verify_prox_stability(std::uint64_t seed, long trials = 1000, int dim = 4) {
  VerifyResult r;
  r.suite = "prox_stability";
  r.metric_name = "max_lhs_over_rhs";
  Rng rng = child_rng(seed, 0, fnv1a("prox_stability", 6));
  std::uniform_real_distribution<double> lam_dist(0.1, 10.0), rho_dist(0.0, 1.0);
  const L2BallSet ball(dim);
  const double p = 2.0, q = 2.0;
  for (long t = 0; t < trials; ++t) {
    const Vec g1 = 3.0 * gaussian_vector(dim, rng);
    const Vec g2 = 3.0 * gaussian_vector(dim, rng);
    const Vec z = ball.sample(rng);
    const double lambda = lam_dist(rng);
    const NonsmoothTerm h = NonsmoothTerm::l1(rho_dist(rng));
    const Vec x1 = ball.solve_powered_prox(g1, z, lambda, p, h);
    const Vec x2 = ball.solve_powered_prox(g2, z, lambda, p, h);
    const double lhs = std::pow(0.5, p) * pnorm_pow(x1 - x2, p);
    const double rhs = std::pow(1.0 / (lambda * p), q) * pnorm_pow(g1 - g2, q);
    if (rhs > 0.0) r.metric = std::max(r.metric, lhs / rhs);
    detail::record(r, lhs <= rhs + 1e-8, [&] {
      return nlohmann::json{{"g1", detail::vec_json(g1)}, {"g2", detail::vec_json(g2)}, {"z", detail::vec_json(z)},
                            {"lambda", lambda}, {"lhs", lhs}, {"rhs", rhs}};
    });
  }
  r.lines.push_back("trials=" + std::to_string(trials) + " max lhs/rhs=" + std::to_string(r.metric));
  return r;
}

/// Smoothing sandwich h(x) <= h_r(x) <= h(x) + M r for h = ||.||_1, checked on
/// Monte Carlo estimates with a 5 standard-error band.
inline VerifyResult verify_smoothing_sandwich(std::uint64_t seed, int points = 20, long samples = 20000, double r_smooth = 0.25) {
  VerifyResult r;
  r.suite = "smoothing_sandwich";
  r.metric_name = "max_band_excess";
  r.metric = -std::numeric_limits<double>::infinity();
  const NonsmoothTerm h = NonsmoothTerm::l1(1.0);
  for (int dim : {1, 3, 10}) {
    Rng rng = child_rng(seed, static_cast<std::uint64_t>(dim), fnv1a("smoothing_sandwich", 6));
    const double m_bound = h.subgrad_bound(dim);
    long bad = 0;
    for (int t = 0; t < points; ++t) {
      const Vec x = 0.5 * gaussian_vector(dim, rng);
      const SmoothedEstimate e = estimate_h_r(h, x, r_smooth, samples, rng);
      const double band = 5.0 * e.value_se;
      const double lo = h(x) - e.value;
      const double hi = e.value - (h(x) + m_bound * r_smooth);
      r.metric = std::max({r.metric, lo - band, hi - band});
      const bool ok = lo <= band && hi <= band;
      if (!ok) ++bad;
      detail::record(r, ok, [&] {
        return nlohmann::json{{"x", detail::vec_json(x)}, {"h", h(x)}, {"estimate", e.value}, {"se", e.value_se},
                              {"upper", h(x) + m_bound * r_smooth}};
      });
    }
    r.lines.push_back("dim=" + std::to_string(dim) + " points=" + std::to_string(points) +
                      " violations=" + std::to_string(bad));
  }
  return r;
}

/// Certified eps-stationarity bounds the gradient mapping: ||P(x, gamma)||^2 <= eps / gamma.
inline VerifyResult verify_stationarity_equivalence(std::uint64_t seed, int instances = 200) {
  VerifyResult r;
  r.suite = "stationarity_equivalence";
  r.metric_name = "max_ratio";
  for (int t = 0; t < instances; ++t) {
    const ProblemInstance pr = make_quadratic_instance(3, 0.2, seed * 1000 + static_cast<std::uint64_t>(t), true, 4.0);
    Rng rng = child_rng(seed, static_cast<std::uint64_t>(t), fnv1a("stationarity_equivalence", 5));
    Vec x = pr.set->sample(rng);
    for (int k = 0; k < 30; ++k) x = delta_U(pr, x).minimizer;
    const double dl = delta_L(pr, x).delta;
    for (double eps : {1e-3, 1e-2, 1e-1}) {
      if (dl > eps) continue;
      for (double gamma : {0.1, 0.5, 1.0}) {
        const double res = prox_residual(pr, x, gamma).norm_sq;
        r.metric = std::max(r.metric, res * gamma / eps);
        detail::record(r, res <= eps / gamma + 1e-8, [&] {
          return nlohmann::json{{"x", detail::vec_json(x)}, {"eps", eps}, {"gamma", gamma}, {"residual_sq", res}};
        });
      }
    }
  }
  r.lines.push_back("checks=" + std::to_string(r.checks) + " max gamma*||P||^2/eps=" + std::to_string(r.metric));
  return r;
}

/// Closed-form subproblem solvers against the projected-subgradient reference.
inline VerifyResult verify_oracle_equiv(std::uint64_t seed, int instances = 100) {
  VerifyResult r;
  r.suite = "oracle_equiv";
  r.metric_name = "max_objective_gap";
  double gap_lin = 0.0, gap_prox = 0.0, gap_zvd = 0.0;
  for (int t = 0; t < instances; ++t) {
    Rng rng = child_rng(seed, static_cast<std::uint64_t>(t), fnv1a("oracle_equiv", 12));
    std::uniform_int_distribution<int> dim_dist(1, 5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = dim_dist(rng);
    const L2BallSet ball(n);
    const Vec b = 2.0 * gaussian_vector(n, rng);
    const double rho = u(rng);
    const NonsmoothTerm h = NonsmoothTerm::l1(rho);
    // Linear model: -b^T y + rho ||y||_1.
    {
      const Vec y = ball_l1_linear_argmin(b, rho);
      const Vec ref = reference_subgradient_solve(ball, -b, Vec::Zero(n), 0.0, 2.0, h, 20000);
      const double gap = powered_prox_objective(-b, Vec::Zero(n), 0.0, 2.0, h, y) -
                         powered_prox_objective(-b, Vec::Zero(n), 0.0, 2.0, h, ref);
      gap_lin = std::max(gap_lin, gap);
      detail::record(r, gap <= 1e-6, [&] { return nlohmann::json{{"solver", "linear"}, {"b", detail::vec_json(b)}, {"rho", rho}, {"gap", gap}}; });
    }
    // Prox model: -b^T y + rho ||y||_1 + lambda/2 ||y||^2.
    {
      const double lambda = 0.1 + 5.0 * u(rng);
      const Vec y = ball_l1_prox_argmin(b, rho, lambda);
      const Vec ref = reference_subgradient_solve(ball, -b, Vec::Zero(n), lambda, 2.0, h, 20000);
      const double gap = powered_prox_objective(-b, Vec::Zero(n), lambda, 2.0, h, y) -
                         powered_prox_objective(-b, Vec::Zero(n), lambda, 2.0, h, ref);
      gap_prox = std::max(gap_prox, gap);
      detail::record(r, gap <= 1e-6, [&] {
        return nlohmann::json{{"solver", "prox"}, {"b", detail::vec_json(b)}, {"rho", rho}, {"lambda", lambda}, {"gap", gap}};
      });
    }
    // Penalized discriminant subproblem.
    {
      const int m = n + dim_dist(rng) - 1;
      const ZvdInstance z = make_zvd_instance(n, m, 0.5 * u(rng), seed * 7919 + static_cast<std::uint64_t>(t));
      const Vec g = gaussian_vector(n, rng);
      const NonsmoothTerm hz = NonsmoothTerm::weighted_l1_map(z.penalty_weights(), z.penalty_map());
      const Vec y = zvd_subproblem(z, g);
      const Vec ref = reference_subgradient_solve(ball, g, Vec::Zero(n), 0.0, 2.0, hz, 20000);
      const double gap = (g.dot(y) + hz(y)) - (g.dot(ref) + hz(ref));
      gap_zvd = std::max(gap_zvd, gap);
      detail::record(r, gap <= 1e-6, [&] { return nlohmann::json{{"solver", "zvd"}, {"seed", z.seed}, {"gap", gap}}; });
    }
  }
  r.metric = std::max({gap_lin, gap_prox, gap_zvd});
  r.lines.push_back("linear max gap=" + std::to_string(gap_lin));
  r.lines.push_back("prox   max gap=" + std::to_string(gap_prox));
  r.lines.push_back("zvd    max gap=" + std::to_string(gap_zvd));
  return r;
}

/// Twice the sampled descent constant must certify a fresh sample on every
/// shipped smooth model.
inline VerifyResult verify_descent_constant(std::uint64_t seed, int pairs = 3000) {
  VerifyResult r;
  r.suite = "descent_constant";
  r.metric_name = "max_violations";
  auto check = [&](const std::string& name, const SmoothOracle& f, const FeasibleSetOracle& set) {
    const double lam = 2.0 * estimate_lambda(f, set, 2.0, pairs, seed);
    const int bad = count_descent_violations(f, set, 2.0, lam, pairs, seed + 1);
    r.metric = std::max(r.metric, static_cast<double>(bad));
    detail::record(r, bad == 0, [&] { return nlohmann::json{{"model", name}, {"lambda", lam}, {"violations", bad}}; });
    std::ostringstream os;
    os << std::left << std::setw(14) << name << " lambda=" << lam << " violations=" << bad;
    r.lines.push_back(os.str());
  };
  const ProblemInstance quad = make_quadratic_instance(6, 0.1, seed, false);
  check("quadratic", quad.f, *quad.set);
  const ProblemInstance slice = make_tensor_slice_instance(4, 5, 0.1, seed);
  check("tensor_slice", slice.f, *slice.set);
  const BlockProblem bp = make_sparse_pca_instance(4, 5, 0.1, seed).block_problem(1.0);
  check("sparse_pca", bp.joint_f(), *bp.joint_set());
  const ProblemInstance zvd = make_zvd_instance(6, 12, 0.1, seed).problem();
  check("zvd", zvd.f, *zvd.set);
  // The block tensor model with the analytic constant tau d (d - 1).
  const SparsePcaInstance pca = make_sparse_pca_instance(4, 5, 0.1, seed);
  const TauEstimate tau = estimate_tau_lipschitz(*pca.tensor, 5, seed);
  const BlockProblem bp2 = pca.block_problem(tau.lipschitz);
  const int bad = count_descent_violations(bp2.joint_f(), *bp2.joint_set(), 2.0, tau.lipschitz, pairs, seed + 2);
  detail::record(r, bad == 0, [&] { return nlohmann::json{{"model", "sparse_pca_tau"}, {"lambda", tau.lipschitz}, {"violations", bad}}; });
  r.lines.push_back("sparse_pca tau d(d-1)=" + std::to_string(tau.lipschitz) + " violations=" + std::to_string(bad));
  return r;
}

struct BoundRow {
  std::string instance;
  std::string algorithm;
  double eps = 0.0;
  long k_hit = -1;
  long planned_N = 0;
  [[nodiscard]] bool ok() const { return k_hit >= 1 && k_hit <= planned_N; }
};

/// Single-block instances for the iteration-bound protocol: half convex
/// quadratics with an L1 term, half tensor slices, lambda = 2 x estimate.
inline std::vector<std::pair<std::string, ProblemInstance>> bound_instances(std::uint64_t seed, int count) {
  std::vector<std::pair<std::string, ProblemInstance>> out;
  for (int i = 0; i < count; ++i) {
    const std::uint64_t s = seed * 100 + static_cast<std::uint64_t>(i);
    if (i % 2 == 0)
      out.emplace_back("quadratic#" + std::to_string(s), make_quadratic_instance(5, 0.2, s, true));
    else
      out.emplace_back("tensor_slice#" + std::to_string(s), make_tensor_slice_instance(4, 5, 0.2, s));
  }
  return out;
}

inline std::vector<BoundRow> run_single_block_bounds(std::uint64_t seed, int count, const std::vector<double>& eps_list) {
  std::vector<BoundRow> rows;
  for (const auto& [name, pr] : bound_instances(seed, count)) {
    Rng rng = child_rng(seed, rows.size(), fnv1a("bounds", 6));
    const Vec x0 = pr.set->sample(rng);
    for (double eps : eps_list) {
      SolveConfig cfg;
      cfg.eps = eps;
      cfg.max_iters = std::numeric_limits<long>::max();
      const IterationTrace t1 = run_alg1(pr, x0, cfg);
      rows.push_back({name, "alg1", eps, t1.hit_index(), t1.planned_N});
      const IterationTrace t2 = run_alg2(pr, x0, cfg);
      rows.push_back({name, "alg2", eps, t2.hit_index(), t2.planned_N});
    }
  }
  return rows;
}

/// Coupled nonconvex quadratic with per-block unit balls and L1 terms; lambda
/// is twice the estimate on the joint set.
inline BlockProblem make_block_quadratic(int blocks, int n, double rho, std::uint64_t seed) {
  const ProblemInstance base = make_quadratic_instance(blocks * n, rho, seed, false);
  std::vector<std::shared_ptr<const FeasibleSetOracle>> sets;
  std::vector<NonsmoothTerm> hs;
  for (int i = 0; i < blocks; ++i) {
    sets.push_back(std::make_shared<L2BallSet>(n, 1.0));
    hs.push_back(NonsmoothTerm::l1(rho));
  }
  BlockProblem bp(std::move(sets), std::move(hs), base.f, SmoothnessParams(2.0, 1.0));
  bp.set_params(SmoothnessParams(2.0, 2.0 * estimate_lambda(base.f, *bp.joint_set(), 2.0, 2000, seed)));
  // On the product of unit balls ||x||^2 <= blocks.
  bp.phi_star_lower = base.phi_star_lower * blocks;
  return bp;
}

inline std::vector<BoundRow> run_multiblock_bounds(std::uint64_t seed, int count, const std::vector<double>& eps_list,
                                                   int blocks = 3, int n = 5) {
  std::vector<BoundRow> rows;
  for (int i = 0; i < count; ++i) {
    const std::uint64_t s = seed * 100 + static_cast<std::uint64_t>(i);
    const BlockProblem bp = make_block_quadratic(blocks, n, 0.2, s);
    Rng rng = child_rng(seed, static_cast<std::uint64_t>(i), fnv1a("mbounds", 7));
    const Vec x0 = bp.joint_set()->sample(rng);
    const std::string name = "block_quadratic#" + std::to_string(s);
    for (double eps : eps_list) {
      SolveConfig cfg;
      cfg.eps = eps;
      cfg.max_iters = std::numeric_limits<long>::max();
      for (UpdateRule rule : {UpdateRule::jacobian, UpdateRule::mbi}) {
        const IterationTrace t5 = run_alg5(bp, x0, rule, cfg);
        rows.push_back({name, std::string("alg5/") + to_string(rule), eps, t5.hit_index(), t5.planned_N});
        const IterationTrace t6 = run_alg6(bp, x0, rule, cfg);
        rows.push_back({name, std::string("alg6/") + to_string(rule), eps, t6.hit_index(), t6.planned_N});
      }
    }
  }
  return rows;
}

inline VerifyResult verify_bounds(std::uint64_t seed, int instances = 20) {
  VerifyResult r;
  r.suite = "bounds";
  r.metric_name = "max_hit_over_N";
  auto add = [&](const std::vector<BoundRow>& rows) {
    for (const BoundRow& b : rows) {
      r.metric = std::max(r.metric, static_cast<double>(b.k_hit) / static_cast<double>(b.planned_N));
      detail::record(r, b.ok(), [&] {
        return nlohmann::json{{"instance", b.instance}, {"algorithm", b.algorithm}, {"eps", b.eps},
                              {"k_hit", b.k_hit}, {"N", b.planned_N}};
      });
      std::ostringstream os;
      os << std::left << std::setw(22) << b.instance << std::setw(14) << b.algorithm << " eps=" << std::setw(6) << b.eps
         << " k_hit=" << std::setw(6) << b.k_hit << " N=" << b.planned_N;
      r.lines.push_back(os.str());
    }
  };
  add(run_single_block_bounds(seed, instances, {1e-1, 1e-2}));
  add(run_multiblock_bounds(seed, 4, {1e-1, 1e-2}));
  return r;
}

inline const std::vector<std::string>& verify_suites() {
  static const std::vector<std::string> names{"power_monotonicity", "prox_stability", "smoothing_sandwich", "stationarity_equivalence", "oracle_equiv", "descent_constant",
                                              "bounds"};
  return names;
}

inline VerifyResult run_verify(const std::string& suite, std::uint64_t seed) {
  if (suite == "power_monotonicity") return verify_power_monotonicity(seed);
  if (suite == "prox_stability") return verify_prox_stability(seed);
  if (suite == "smoothing_sandwich") return verify_smoothing_sandwich(seed);
  if (suite == "stationarity_equivalence") return verify_stationarity_equivalence(seed);
  if (suite == "oracle_equiv") return verify_oracle_equiv(seed);
  if (suite == "descent_constant") return verify_descent_constant(seed);
  if (suite == "bounds") return verify_bounds(seed);
  throw ConfigError("unknown suite '" + suite + "'");
}

// ---------------------------------------------------------------------------
// Planner tables
// ---------------------------------------------------------------------------

struct PlanParams {
  std::string formula = "alg1";  // alg1 | concave | multiblock | alg3 | alg4
  double gap = 1.0;
  double diam = 2.0;        // diam_p(S), or the largest block diameter
  double diam_under = 2.0;  // smallest block diameter (multiblock guard)
  double diam2 = 2.0;       // Euclidean diameter (smoothing schedule)
  double lambda = 1.0;
  double p = 2.0;
  double sigma = 1.0;
  double M = 1.0;
};

struct PlanRow {
  double eps = 0.0;
  long N = 0;
  long m = 0;      // batch size, stochastic formulas only
  long n_bar = 0;  // total oracle calls, mini-batch formula only
  bool guard_ok = true;
  std::string note;
};

inline PlanRow plan_row(const PlanParams& pp, double eps) {
  PlanRow row;
  row.eps = eps;
  try {
    if (pp.formula == "alg1") {
      row.N = plan_alg1_N(pp.gap, pp.diam, pp.lambda, pp.p, eps);
    } else if (pp.formula == "concave") {
      row.N = plan_concave_N(pp.gap, eps);
    } else if (pp.formula == "multiblock") {
      row.N = plan_multiblock_N(pp.gap, pp.diam, pp.diam_under, pp.lambda, pp.p, eps);
    } else if (pp.formula == "alg3") {
      const Alg3Plan a = plan_alg3(eps, pp.sigma, pp.lambda, pp.p, pp.diam, pp.gap);
      row.N = a.iterations;
      row.m = a.m;
      row.n_bar = a.n_bar;
      if (!a.calls_condition_ok) row.note += "calls-condition ";
      if (!a.variance_condition_ok) row.note += "variance-condition ";
      row.guard_ok = a.calls_condition_ok && a.variance_condition_ok;
    } else if (pp.formula == "alg4") {
      const Alg4Plan a = plan_alg4(eps, pp.gap, pp.diam, pp.diam2, pp.M, pp.lambda, pp.p);
      row.N = a.iterations;
      row.m = a.m;
    } else {
      throw ConfigError("unknown formula '" + pp.formula + "'");
    }
  } catch (const PreconditionError& e) {
    row.guard_ok = false;
    row.note = e.what();
  }
  return row;
}

inline void write_plan_table(std::ostream& os, const PlanParams& pp, const std::vector<double>& eps_list) {
  os << "# schema_version=" << kTraceSchemaVersion << '\n';
  os << "formula,eps,N,m,N_bar,guard_ok,note\n";
  for (double eps : eps_list) {
    const PlanRow r = plan_row(pp, eps);
    os << pp.formula << ',' << eps << ',' << r.N << ',' << r.m << ',' << r.n_bar << ','
       << (r.guard_ok ? 1 : 0) << ',' << r.note << '\n';
  }
}

// ---------------------------------------------------------------------------
// Run configs
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& known_algorithms() {
  static const std::vector<std::string> a{"alg1", "alg1_concave", "alg2", "alg3", "alg4", "alg5", "alg6", "bcd_baseline"};
  return a;
}

struct RunConfig {
  nlohmann::json problem;
  std::string algorithm;
  UpdateRule rule = UpdateRule::jacobian;
  double eps = 1e-3;
  double p = 2.0;
  std::optional<double> lambda;  // empty: automatic
  std::optional<long> N;         // empty: planned
  long max_iters = 100000;
  bool early_stop = true;
  bool timing = false;
  std::vector<std::uint64_t> seeds{1};
  std::string start = "random";  // random | center
  // Stochastic options.
  NoiseModel noise = NoiseModel::gaussian;
  double sigma = 0.0;
  std::optional<long> batch;  // empty: planned
  double smoothing_r = 0.05;
  std::string out_dir = "out";
  std::string prefix = "run";
  nlohmann::json raw;
};

namespace detail {

template <class T>
T field(const nlohmann::json& j, const char* key, const T& fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("field '" + where + key + "' has the wrong type");
  }
}

/// Number or the given keyword (returns nullopt for the keyword).
template <class T>
std::optional<T> number_or(const nlohmann::json& j, const char* key, const char* keyword, std::optional<T> fallback) {
  if (!j.contains(key)) return fallback;
  const nlohmann::json& v = j.at(key);
  if (v.is_string() && v.get<std::string>() == keyword) return std::nullopt;
  if (!v.is_number()) throw ConfigError(std::string("field '") + key + "' must be a number or \"" + keyword + "\"");
  return v.get<T>();
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  c.raw = j;
  if (!j.contains("problem") || !j.at("problem").is_object()) throw ConfigError("field 'problem' is required");
  c.problem = j.at("problem");
  if (!j.contains("algorithm")) throw ConfigError("field 'algorithm' is required");
  c.algorithm = detail::field<std::string>(j, "algorithm", "", "");
  const auto& algs = known_algorithms();
  if (std::find(algs.begin(), algs.end(), c.algorithm) == algs.end())
    throw ConfigError("field 'algorithm': unknown value '" + c.algorithm + "'");
  if (j.contains("rule")) {
    if (c.algorithm != "alg5" && c.algorithm != "alg6")
      throw ConfigError("field 'rule' applies only to alg5 and alg6");
    try {
      c.rule = parse_update_rule(detail::field<std::string>(j, "rule", "", ""));
    } catch (const PreconditionError&) {
      throw ConfigError("field 'rule' must be \"jacobian\" or \"mbi\"");
    }
  }
  c.eps = detail::field<double>(j, "eps", c.eps, "");
  if (!(c.eps > 0.0)) throw ConfigError("field 'eps' must be positive");
  c.p = detail::field<double>(j, "p", c.p, "");
  if (!(c.p > 1.0)) throw ConfigError("field 'p' must exceed 1");
  c.lambda = detail::number_or<double>(j, "lambda", "auto", std::nullopt);
  if (c.lambda && !(*c.lambda > 0.0)) throw ConfigError("field 'lambda' must be positive");
  c.N = detail::number_or<long>(j, "N", "plan", std::nullopt);
  if (c.N && *c.N < 1) throw ConfigError("field 'N' must be at least 1");
  c.max_iters = detail::field<long>(j, "max_iters", c.max_iters, "");
  if (c.max_iters < 1) throw ConfigError("field 'max_iters' must be at least 1");
  c.early_stop = detail::field<bool>(j, "early_stop", c.early_stop, "");
  c.timing = detail::field<bool>(j, "timing", c.timing, "");
  c.seeds = detail::field<std::vector<std::uint64_t>>(j, "seeds", c.seeds, "");
  if (c.seeds.empty()) throw ConfigError("field 'seeds' must not be empty");
  c.start = detail::field<std::string>(j, "start", c.start, "");
  if (c.start != "random" && c.start != "center") throw ConfigError("field 'start' must be \"random\" or \"center\"");
  if (j.contains("noise")) {
    const nlohmann::json& n = j.at("noise");
    try {
      c.noise = parse_noise_model(detail::field<std::string>(n, "model", "gaussian", "noise."));
    } catch (const PreconditionError& e) {
      throw ConfigError(std::string("field 'noise.model': ") + e.what());
    }
    c.sigma = detail::field<double>(n, "sigma", 0.0, "noise.");
    if (c.sigma < 0.0) throw ConfigError("field 'noise.sigma' must be nonnegative");
  }
  c.batch = detail::number_or<long>(j, "batch", "plan", std::nullopt);
  if (c.batch && *c.batch < 1) throw ConfigError("field 'batch' must be at least 1");
  if (j.contains("smoothing")) {
    c.smoothing_r = detail::field<double>(j.at("smoothing"), "r", c.smoothing_r, "smoothing.");
    if (!(c.smoothing_r > 0.0)) throw ConfigError("field 'smoothing.r' must be positive");
  }
  if (j.contains("output")) {
    c.out_dir = detail::field<std::string>(j.at("output"), "dir", c.out_dir, "output.");
    c.prefix = detail::field<std::string>(j.at("output"), "prefix", c.prefix, "output.");
  }
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_run_config(j);
}

/// A resolved problem: either a single composite instance or a block problem
/// (the tensor model), plus what the runner needs to pick starts.
struct BuiltProblem {
  std::string name;
  std::optional<ProblemInstance> single;
  std::optional<BlockProblem> blocks;
  std::optional<SparsePcaInstance> pca;
  std::optional<SqrtPenaltyInstance> sqrt_penalty;
  double lambda = 0.0;
};

inline BuiltProblem build_problem(const RunConfig& c) {
  const nlohmann::json& pj = c.problem;
  BuiltProblem b;
  const std::uint64_t seed = detail::field<std::uint64_t>(pj, "seed", 1, "problem.");
  auto dim_field = [&](const char* key, int fallback) {
    const int v = detail::field<int>(pj, key, fallback, "problem.");
    if (v < 1) throw ConfigError(std::string("field 'problem.") + key + "' must be positive");
    return v;
  };
  auto set_single_params = [&](ProblemInstance pr) {
    // Builtins come with p = 2; other exponents re-estimate lambda.
    const double lam = c.lambda ? *c.lambda : 2.0 * estimate_lambda(pr.f, *pr.set, c.p, 2000, seed);
    if (c.lambda || c.p != 2.0) pr.params = SmoothnessParams(c.p, lam);
    return pr;
  };
  if (pj.contains("file")) {
    b.name = "sparse_pca";
    const std::string path = detail::field<std::string>(pj, "file", "", "problem.");
    try {
      b.pca = load_sparse_pca_instance(path, detail::field<double>(pj, "rho", 0.85, "problem."));
    } catch (const std::runtime_error& e) {
      throw ConfigError(std::string("field 'problem.file': ") + e.what());
    }
  } else {
    b.name = detail::field<std::string>(pj, "name", "", "problem.");
    if (b.name == "quadratic") {
      b.single = set_single_params(make_quadratic_instance(dim_field("n", 5), detail::field<double>(pj, "rho", 0.1, "problem."),
                                                           seed, detail::field<bool>(pj, "convex", true, "problem.")));
    } else if (b.name == "tensor_slice") {
      b.single = set_single_params(make_tensor_slice_instance(dim_field("d", 4), dim_field("n", 5),
                                                              detail::field<double>(pj, "rho", 0.1, "problem."), seed));
    } else if (b.name == "zvd") {
      const int n = dim_field("n", 20);
      ProblemInstance pr = make_zvd_instance(n, dim_field("m", 2 * n), detail::field<double>(pj, "gamma", 0.1, "problem."), seed).problem();
      if (c.lambda || c.p != 2.0) pr.params = SmoothnessParams(c.p, c.lambda ? *c.lambda : kLambdaMin);
      b.single = pr;
    } else if (b.name == "sqrt_penalty") {
      b.sqrt_penalty = make_sqrt_penalty_instance(dim_field("n", 5), detail::field<double>(pj, "gamma", 0.5, "problem."), seed,
                                                  detail::field<double>(pj, "lo", 0.2, "problem."));
      b.single = set_single_params(b.sqrt_penalty->problem);
    } else if (b.name == "sparse_pca") {
      b.pca = make_sparse_pca_instance(dim_field("d", 4), dim_field("n", 8), detail::field<double>(pj, "rho", 0.85, "problem."), seed);
    } else {
      throw ConfigError("field 'problem.name': unknown builtin '" + b.name + "'");
    }
  }
  if (b.pca) {
    double lam = 0.0;
    if (c.lambda) {
      lam = *c.lambda;
    } else if (c.p == 2.0) {
      lam = std::max(estimate_tau_lipschitz(*b.pca->tensor, 5, seed).lipschitz, kLambdaMin);
    } else {
      lam = 2.0 * estimate_lambda(negative_multilinear_form(b.pca->tensor), *b.pca->block_problem(1.0).joint_set(), c.p, 2000, seed);
    }
    BlockProblem bp = b.pca->block_problem(lam);
    bp.set_params(SmoothnessParams(c.p, lam));
    b.blocks = bp;
    b.lambda = lam;
  } else {
    b.lambda = b.single->params.lambda;
  }
  return b;
}

/// Cross-checks the algorithm against the problem before anything runs.
inline void validate_compatibility(const RunConfig& c, const BuiltProblem& b) {
  const std::string& a = c.algorithm;
  if (a == "bcd_baseline" && !b.pca) throw ConfigError("bcd_baseline requires the sparse_pca problem");
  if (b.pca && a != "alg5" && a != "alg6" && a != "bcd_baseline")
    throw ConfigError("sparse_pca is a block problem; use alg5, alg6 or bcd_baseline");
  if (a == "alg1_concave" && !b.single->f.concave) throw ConfigError("concave_flag required for alg1_concave");
  if (a == "alg3" && c.p < 2.0) throw ConfigError("alg3 requires p >= 2");
  if (a == "alg4" && !b.single->h.concave()) throw ConfigError("alg4 requires a concave nonsmooth term");
}

struct SeedOutcome {
  std::uint64_t seed = 0;
  IterationTrace trace;
  nlohmann::json extra;  // method-specific summary fields
  bool certified = false;
};

struct RunOutcome {
  std::vector<SeedOutcome> seeds;
  std::vector<std::filesystem::path> files;
  [[nodiscard]] bool all_certified() const {
    return std::all_of(seeds.begin(), seeds.end(), [](const SeedOutcome& s) { return s.certified; });
  }
};

namespace detail {

inline Vec start_point(const RunConfig& c, const BuiltProblem& b, std::uint64_t seed) {
  if (b.pca) return sparse_pca_start(*b.pca, seed);
  const FeasibleSetOracle& set = *b.single->set;
  if (c.start == "center") return set.center();
  Rng rng = child_rng(seed, 0, fnv1a("start", 5));
  return set.sample(rng);
}

inline SolveConfig solve_config(const RunConfig& c) {
  SolveConfig s;
  s.eps = c.eps;
  s.early_stop = c.early_stop;
  s.timing = c.timing;
  if (c.N) {
    s.planner_mode = PlannerMode::explicit_N;
    s.max_iters = *c.N;
  } else {
    s.planner_mode = PlannerMode::eps_target;
    s.max_iters = c.max_iters;
  }
  return s;
}

}  // namespace detail

inline SeedOutcome run_one_seed(const RunConfig& c, const BuiltProblem& b, std::uint64_t seed) {
  SeedOutcome out;
  out.seed = seed;
  const Vec x0 = detail::start_point(c, b, seed);
  const std::string& a = c.algorithm;
  if (a == "bcd_baseline") {
    const BcdResult r = run_bcd_baseline(*b.pca, x0, c.N ? *c.N : c.max_iters);
    out.trace = r.trace;
    out.extra = {{"value", r.value}, {"support", r.support}, {"hit_cap", r.hit_cap}};
    out.certified = true;  // no certificate; completion is success
    return out;
  }
  if (a == "alg5" || a == "alg6") {
    const BlockProblem bp = b.blocks ? *b.blocks : [&] {
      BlockProblem one({b.single->set}, {b.single->h}, b.single->f, b.single->params);
      one.phi_star_lower = b.single->phi_star_lower;
      return one;
    }();
    const SolveConfig s = detail::solve_config(c);
    out.trace = a == "alg5" ? run_alg5(bp, x0, c.rule, s) : run_alg6(bp, x0, c.rule, s);
    out.extra["rule"] = to_string(c.rule);
    if (b.pca) {
      out.extra["value"] = b.pca->value(out.trace.x_final);
      out.extra["support"] = support_size(out.trace.x_final);
    }
  } else if (a == "alg1" || a == "alg1_concave" || a == "alg2") {
    const SolveConfig s = detail::solve_config(c);
    const ProblemInstance& pr = *b.single;
    out.trace = a == "alg1" ? run_alg1(pr, x0, s) : a == "alg2" ? run_alg2(pr, x0, s) : run_alg1_concave(pr, x0, s);
  } else if (a == "alg3") {
    const ProblemInstance& pr = *b.single;
    const double gap = detail::field<double>(c.raw, "gap", ncopt::detail::phi_gap(pr, x0), "");
    const Alg3Plan plan = plan_alg3(c.eps, c.sigma, pr.params.lambda, pr.params.p, pr.set->diam_p(pr.params.p), gap);
    StochasticRunConfig s;
    s.iterations = c.N ? *c.N : plan.iterations;
    s.batch = {c.batch ? *c.batch : plan.m};
    s.seed = seed;
    s.eps = c.eps;
    s.timing = c.timing;
    const StochasticOracle o = make_noisy_oracle(pr.f, c.noise, c.sigma, pr.params.q, pr.dim());
    out.trace = run_alg3(pr, o, x0, s);
    out.extra = {{"n_bar", plan.n_bar}, {"batch", s.batch.front()}, {"calls_condition_ok", plan.calls_condition_ok},
                 {"variance_condition_ok", plan.variance_condition_ok}};
  } else if (a == "alg4") {
    const ProblemInstance& pr = *b.single;
    SmoothingConfig sm;
    sm.r = c.smoothing_r;
    sm.M = b.sqrt_penalty ? b.sqrt_penalty->gradient_bound(sm.r) : pr.h.subgrad_bound(pr.dim());
    const double gap = ncopt::detail::phi_gap(pr, x0);
    const Alg4Plan plan = plan_alg4(c.eps, gap, pr.set->diam_p(pr.params.p), pr.set->diam_p(2.0), sm.M,
                                    pr.params.lambda, pr.params.p);
    StochasticRunConfig s;
    s.iterations = c.N ? *c.N : plan.iterations;
    s.batch = {c.batch ? *c.batch : plan.m};
    s.seed = seed;
    s.eps = c.eps;
    s.timing = c.timing;
    out.trace = run_alg4(pr, sm, x0, s);
    out.extra = {{"batch", s.batch.front()}, {"r", sm.r}, {"M", sm.M}};
  }
  out.certified = out.trace.certificate.passed;
  return out;
}

/// Runs every seed and writes <prefix>_seed<k>.csv / .json (plus a
/// replication CSV for stochastic methods) under the output directory.
inline RunOutcome execute_run(const RunConfig& c) {
  const BuiltProblem b = build_problem(c);
  validate_compatibility(c, b);
  const std::filesystem::path dir = output_dir(c.out_dir);
  std::filesystem::create_directories(dir);
  RunOutcome outcome;
  for (std::uint64_t seed : c.seeds) {
    SeedOutcome s = run_one_seed(c, b, seed);
    const std::string stem = c.prefix + "_seed" + std::to_string(seed);
    const std::filesystem::path csv = dir / (stem + ".csv");
    {
      std::ofstream os(csv);
      if (!os) throw std::runtime_error("cannot write '" + csv.string() + "'");
      write_trace_csv(os, s.trace);
    }
    nlohmann::json summary = trace_summary_json(s.trace);
    summary["seed"] = seed;
    summary["lambda"] = b.lambda;
    summary["problem"] = b.name;
    summary["config"] = c.raw;
    for (auto it = s.extra.begin(); it != s.extra.end(); ++it) summary[it.key()] = it.value();
    const std::filesystem::path js = dir / (stem + ".json");
    {
      std::ofstream os(js);
      if (!os) throw std::runtime_error("cannot write '" + js.string() + "'");
      os << summary.dump(2) << '\n';
    }
    outcome.files.push_back(csv);
    outcome.files.push_back(js);
    outcome.seeds.push_back(std::move(s));
  }
  if (c.algorithm == "alg3" || c.algorithm == "alg4") {
    const std::filesystem::path rep = dir / (c.prefix + "_replications.csv");
    std::ofstream os(rep);
    os << "# schema_version=" << kTraceSchemaVersion << '\n' << "seed,k_tilde,cert,cert_exact\n";
    for (const SeedOutcome& s : outcome.seeds) {
      const TraceRow& r = s.trace.rows[static_cast<std::size_t>(s.trace.best_index)];
      os << s.seed << ',' << r.k << ',' << ncopt::detail::format_double(r.cert) << ','
         << ncopt::detail::format_double(r.cert_exact) << '\n';
    }
    outcome.files.push_back(rep);
  }
  return outcome;
}

// ---------------------------------------------------------------------------
// Benchmark tables
// ---------------------------------------------------------------------------

struct Table1Options {
  int d = 4;
  int n = 8;
  int instances = 10;
  std::uint64_t seed = 1;
  double lambda = 20.0;
  double rho = 0.85;
  long max_iters = 2000;
  double eps = 1e-3;
  bool timing = false;
};

struct Table1Row {
  int instance = 0;
  std::uint64_t seed = 0;
  std::string method;
  double value = 0.0;  // A(x_1, ..., x_d)
  long support = 0;
  long iterations = 0;
  bool certified = false;
  bool hit_cap = false;
  double wall_ms = 0.0;
};

inline double elapsed_ms(std::chrono::steady_clock::time_point t0, bool timing) {
  if (!timing) return 0.0;
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

/// Instance i uses seed + i for both the tensor and the shared start.
inline std::vector<Table1Row> run_table1(const Table1Options& o) {
  std::vector<Table1Row> rows;
  for (int i = 0; i < o.instances; ++i) {
    const std::uint64_t s = o.seed + static_cast<std::uint64_t>(i);
    const SparsePcaInstance inst = make_sparse_pca_instance(o.d, o.n, o.rho, s);
    const BlockProblem bp = inst.block_problem(o.lambda);
    const Vec x0 = sparse_pca_start(inst, s);
    SolveConfig cfg;
    cfg.eps = o.eps;
    cfg.max_iters = o.max_iters;
    cfg.planner_mode = PlannerMode::explicit_N;

    auto t0 = std::chrono::steady_clock::now();
    const BcdResult bcd = run_bcd_baseline(inst, x0, o.max_iters);
    rows.push_back({i + 1, s, "bcd", bcd.value, bcd.support, bcd.iterations, false, bcd.hit_cap, elapsed_ms(t0, o.timing)});

    t0 = std::chrono::steady_clock::now();
    const IterationTrace t6 = run_alg6(bp, x0, UpdateRule::jacobian, cfg);
    rows.push_back({i + 1, s, "alg6", inst.value(t6.x_final), support_size(t6.x_final), t6.iterations,
                    t6.certificate.passed, !t6.certificate.passed, elapsed_ms(t0, o.timing)});

    t0 = std::chrono::steady_clock::now();
    const IterationTrace t5 = run_alg5(bp, x0, UpdateRule::jacobian, cfg);
    rows.push_back({i + 1, s, "alg5", inst.value(t5.x_final), support_size(t5.x_final), t5.iterations,
                    t5.certificate.passed, !t5.certificate.passed, elapsed_ms(t0, o.timing)});
  }
  return rows;
}

inline void write_table1_csv(std::ostream& os, const std::vector<Table1Row>& rows) {
  os << "# schema_version=" << kTraceSchemaVersion << '\n';
  os << "instance,seed,method,val,support,iter,certified,hit_cap,wall_ms\n";
  for (const Table1Row& r : rows) {
    os << r.instance << ',' << r.seed << ',' << r.method << ',' << ncopt::detail::format_double(r.value) << ','
       << r.support << ',' << r.iterations << ',' << (r.certified ? 1 : 0) << ',' << (r.hit_cap ? 1 : 0) << ','
       << ncopt::detail::format_double(r.wall_ms) << '\n';
  }
}

/// Aggregate counts printed under the table.
inline nlohmann::json table1_summary(const std::vector<Table1Row>& rows) {
  nlohmann::json j;
  for (const char* m : {"bcd", "alg6", "alg5"}) {
    long count = 0, nonzero = 0, negative = 0, capped = 0, certified = 0;
    for (const Table1Row& r : rows) {
      if (r.method != m) continue;
      ++count;
      nonzero += std::abs(r.value) > 1e-10 ? 1 : 0;
      negative += r.value < 0.0 ? 1 : 0;
      capped += r.hit_cap ? 1 : 0;
      certified += r.certified ? 1 : 0;
    }
    j[m] = {{"instances", count}, {"nonzero", nonzero}, {"negative", negative}, {"hit_cap", capped}, {"certified", certified}};
  }
  return j;
}

struct Table2Options {
  int n = 20;
  int m = 40;
  int instances = 10;
  std::uint64_t seed = 1;
  double gamma = 0.1;
  double eps = 1e-4;
  long max_iters = 100000;
  bool timing = false;
};

struct Table2Row {
  int instance = 0;
  std::uint64_t seed = 0;
  double objective = 0.0;
  long iterations = 0;
  long planned_N = 0;
  bool certified = false;
  bool monotone = false;
  double wall_ms = 0.0;
};

/// Unit-step conditional gradient on penalized discriminant instances,
/// started from a seeded random point of the ball.
inline std::vector<Table2Row> run_table2(const Table2Options& o) {
  std::vector<Table2Row> rows;
  for (int i = 0; i < o.instances; ++i) {
    const std::uint64_t s = o.seed + static_cast<std::uint64_t>(i);
    const ZvdInstance z = make_zvd_instance(o.n, o.m, o.gamma, s);
    const ProblemInstance pr = z.problem();
    Rng rng = child_rng(s, 0, fnv1a("start", 5));
    const Vec x0 = pr.set->sample(rng);
    SolveConfig cfg;
    cfg.eps = o.eps;
    cfg.max_iters = o.max_iters;
    const auto t0 = std::chrono::steady_clock::now();
    const IterationTrace t = run_alg1_concave(pr, x0, cfg);
    bool monotone = true;
    for (std::size_t k = 0; k + 1 < t.rows.size(); ++k)
      if (t.rows[k + 1].phi > t.rows[k].phi + 1e-8) monotone = false;
    rows.push_back({i + 1, s, t.final_phi, t.iterations, t.planned_N, t.certificate.passed, monotone, elapsed_ms(t0, o.timing)});
  }
  return rows;
}

inline void write_table2_csv(std::ostream& os, const std::vector<Table2Row>& rows) {
  os << "# schema_version=" << kTraceSchemaVersion << '\n';
  os << "instance,seed,obj_val,iter,planned_N,certified,monotone,wall_ms\n";
  for (const Table2Row& r : rows) {
    os << r.instance << ',' << r.seed << ',' << ncopt::detail::format_double(r.objective) << ',' << r.iterations << ','
       << r.planned_N << ',' << (r.certified ? 1 : 0) << ',' << (r.monotone ? 1 : 0) << ','
       << ncopt::detail::format_double(r.wall_ms) << '\n';
  }
}

}  // namespace ncopt::harness

#endif  // NCOPT_HARNESS_HPP
