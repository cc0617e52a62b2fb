// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Reference values come from the brute-force oracles in
// tests/support and from formulas re-derived here, not from the planners.

#include "ncopt/applications.hpp"
#include "ncopt/harness.hpp"
#include "ncopt/multiblock.hpp"
#include "ncopt/solvers_det.hpp"
#include "ncopt/solvers_stoch.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

using namespace ncopt;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Descent records shared by every run of the powered methods.
struct DescentLedger {
  long steps = 0;
  long violations = 0;
  double worst = -std::numeric_limits<double>::infinity();  // max of phi_{k+1} - phi_k + decrease
  std::string worst_run;

  void add(const IterationTrace& t, const std::string& run, bool use_decrease_column) {
    for (std::size_t k = 0; k + 1 < t.rows.size(); ++k) {
      const double dec = use_decrease_column ? t.rows[k].decrease : t.rows[k].cert;
      const double excess = t.rows[k + 1].phi - t.rows[k].phi + dec;
      ++steps;
      if (excess > worst) {
        worst = excess;
        worst_run = run;
      }
      if (excess > 1e-8) ++violations;
    }
  }
};

DescentLedger g_descent;

/// ceil(2 gap (diam^p lambda)^{q-1} / eps^q), at least 1.
long bound_N(double gap, double diam, double lambda, double p, double eps) {
  const double q = p / (p - 1.0);
  return std::max(1L, static_cast<long>(std::ceil(2.0 * gap * std::pow(std::pow(diam, p) * lambda, q - 1.0) / std::pow(eps, q))));
}

/// Independent stationarity measure on the unit ball with h = rho ||.||_1:
/// min_y g^T (y - x) + rho ||y||_1 - rho ||x||_1 by projected subgradient.
double stationarity_gap(const Vec& g, const Vec& x, double rho, std::mt19937_64& rng) {
  auto fn = [&](const Vec& y) { return g.dot(y - x) + rho * y.lpNorm<1>() - rho * x.lpNorm<1>(); };
  auto sub = [&](const Vec& y) { return Vec(g + rho * oracle::sign_vec(y)); };
  return oracle::ball_minimize(fn, sub, static_cast<int>(x.size()), 20000, rng).value;
}

// ---------------------------------------------------------------------------

Outcome c1_oracle_equivalence() {
  std::mt19937_64 rng(101);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> dim_dist(1, 5);
  auto gauss = [&](int n) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = nd(rng);
    return v;
  };
  double worst[3] = {-1e300, -1e300, -1e300};
  int fails = 0;
  for (int t = 0; t < 100; ++t) {
    const int n = dim_dist(rng);
    const Vec b = 2.0 * gauss(n);
    const double rho = u(rng);
    const double lambda = 0.1 + 5.0 * u(rng);
    auto lin = [&](const Vec& y) { return -b.dot(y) + rho * y.lpNorm<1>(); };
    auto lin_sub = [&](const Vec& y) { return Vec(-b + rho * oracle::sign_vec(y)); };
    auto prox = [&](const Vec& y) { return lin(y) + 0.5 * lambda * y.squaredNorm(); };
    auto prox_sub = [&](const Vec& y) { return Vec(lin_sub(y) + lambda * y); };
    const double g0 = lin(ball_l1_linear_argmin(b, rho)) - oracle::ball_minimize(lin, lin_sub, n, 20000, rng).value;
    const double g1 = prox(ball_l1_prox_argmin(b, rho, lambda)) - oracle::ball_minimize(prox, prox_sub, n, 20000, rng).value;

    const int m = (t % 2 == 0) ? n : 2 * n;  // square orthogonal and rectangular maps
    const ZvdInstance z = make_zvd_instance(n, m, 0.5 * u(rng), 1000 + static_cast<std::uint64_t>(t));
    const Vec g = gauss(n);
    const Mat w = z.penalty_map();
    const Vec wt = z.penalty_weights();
    auto zobj = [&](const Vec& y) { return g.dot(y) + wt.dot((w * y).cwiseAbs()); };
    auto zsub = [&](const Vec& y) { return Vec(g + w.transpose() * wt.cwiseProduct(oracle::sign_vec(w * y))); };
    const double g2 = zobj(zvd_subproblem(z, g)) - oracle::ball_minimize(zobj, zsub, n, 20000, rng).value;

    const double gaps[3] = {g0, g1, g2};
    for (int k = 0; k < 3; ++k) {
      worst[k] = std::max(worst[k], gaps[k]);
      if (gaps[k] > 1e-6) ++fails;
    }
  }
  return {fails == 0, "max gap linear/prox/zvd = " + fmt("%.2e", worst[0]) + " / " + fmt("%.2e", worst[1]) + " / " +
                          fmt("%.2e", worst[2]) + " over 3x100 instances, " + std::to_string(fails) + " above 1e-6"};
}

Outcome c2_power_monotonicity() {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  long violations = 0;
  double eq_err = 0.0;
  for (int p : {2, 3, 4}) {
    for (int t = 0; t < 100000; ++t) {
      const double a = u(rng), b = u(rng), c = u(rng);
      auto s = [&](double v) { return oracle::sgn(v) * std::pow(std::abs(v), p - 1); };
      const double lhs = (s(a - c) - s(b - c)) * (a - b);
      const double rhs = std::pow(0.5, p - 2) * std::pow(std::abs(a - b), p);
      if (lhs < rhs - 1e-12 * std::max(1.0, rhs)) ++violations;
      if (p == 2) eq_err = std::max(eq_err, std::abs(lhs - rhs) / std::max(1.0, rhs));
    }
  }
  return {violations == 0 && eq_err <= 1e-12,
          std::to_string(violations) + " violations in 3x1e5 triples, p=2 equality error " + fmt("%.1e", eq_err)};
}

Outcome c3_prox_stability() {
  Rng rng(303);
  std::uniform_real_distribution<double> lam(0.05, 20.0), rho(0.0, 1.5);
  std::uniform_int_distribution<int> dim_dist(1, 6);
  long violations = 0;
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int n = dim_dist(rng);
    const L2BallSet ball(n);
    const Vec g1 = 4.0 * gaussian_vector(n, rng);
    const Vec g2 = (t % 3 == 0) ? Vec(g1 + 0.01 * gaussian_vector(n, rng)) : Vec(4.0 * gaussian_vector(n, rng));
    const Vec z = ball.sample(rng);
    const double l = lam(rng);
    const NonsmoothTerm h = NonsmoothTerm::l1(rho(rng));
    const Vec x1 = ball.solve_powered_prox(g1, z, l, 2.0, h);
    const Vec x2 = ball.solve_powered_prox(g2, z, l, 2.0, h);
    const double lhs = 0.25 * (x1 - x2).squaredNorm();
    const double rhs = (g1 - g2).squaredNorm() / (4.0 * l * l);
    worst = std::max(worst, lhs - rhs);
    if (lhs > rhs + 1e-8) ++violations;
  }
  return {violations == 0, std::to_string(violations) + " violations in 1000 instances, max lhs - rhs " + fmt("%.2e", worst)};
}

Outcome c4_single_block_bounds() {
  long runs = 0, fails = 0, stationarity_fails = 0;
  double worst_ratio = 0.0, worst_stat = std::numeric_limits<double>::infinity();
  std::mt19937_64 orng(404);
  for (int i = 0; i < 20; ++i) {
    const std::uint64_t seed = 4000 + static_cast<std::uint64_t>(i);
    const bool quad = i < 10;
    const double rho = 0.2;
    const ProblemInstance pr = quad ? make_quadratic_instance(5, rho, seed, true) : make_tensor_slice_instance(4, 5, rho, seed);
    // lambda = 2 x sampled estimate (done by the builders); re-derive for the record.
    const double lam_check = 2.0 * estimate_lambda(pr.f, *pr.set, 2.0, 2000, seed);
    if (std::abs(lam_check - pr.params.lambda) > 1e-12 * lam_check) ++fails;
    Rng rng = child_rng(seed, 0, 4);
    const Vec x0 = pr.set->sample(rng);
    const double gap = pr.f(x0) + pr.h(x0) - pr.phi_star_lower;
    for (double eps : {1e-1, 1e-2}) {
      const long N = bound_N(gap, 2.0, pr.params.lambda, 2.0, eps);
      SolveConfig cfg;
      cfg.eps = eps;
      cfg.max_iters = std::numeric_limits<long>::max();
      for (int alg = 1; alg <= 2; ++alg) {
        const IterationTrace t = alg == 1 ? run_alg1(pr, x0, cfg) : run_alg2(pr, x0, cfg);
        ++runs;
        const long k = t.hit_index();
        if (k < 1 || k > N || t.planned_N != N) ++fails;
        worst_ratio = std::max(worst_ratio, static_cast<double>(k) / static_cast<double>(N));
        if (alg == 2) g_descent.add(t, "alg2 " + std::string(quad ? "quadratic" : "slice") + " #" + std::to_string(seed), false);
        // The certified point must be eps-stationary under an independent solver.
        const double psi = stationarity_gap(pr.f.grad(t.x_best), t.x_best, rho, orng);
        worst_stat = std::min(worst_stat, psi + eps);
        if (psi < -eps - 1e-6) ++stationarity_fails;
      }
    }
  }
  return {fails == 0 && stationarity_fails == 0,
          std::to_string(runs) + " runs, " + std::to_string(fails) + " with k_hit > N, max k_hit/N " + fmt("%.3g", worst_ratio) +
              ", " + std::to_string(stationarity_fails) + " not eps-stationary by oracle (min psi+eps " + fmt("%.2e", worst_stat) + ")"};
}

Outcome c5_multiblock_bounds() {
  long runs = 0, fails = 0;
  double worst_ratio = 0.0;
  for (int i = 0; i < 20; ++i) {
    const std::uint64_t seed = 5000 + static_cast<std::uint64_t>(i);
    const BlockProblem bp = harness::make_block_quadratic(3, 5, 0.2, seed);
    Rng rng = child_rng(seed, 0, 5);
    const Vec x0 = bp.joint_set()->sample(rng);
    const double gap = bp.phi(x0) - bp.phi_star_lower;
    const double lambda = bp.params().lambda;
    for (double eps : {1e-1, 1e-2}) {
      // Every block is a unit ball: diam_over = diam_under = 2.
      const long N = bound_N(gap, 2.0, lambda, 2.0, eps);
      SolveConfig cfg;
      cfg.eps = eps;
      cfg.max_iters = std::numeric_limits<long>::max();
      for (UpdateRule rule : {UpdateRule::jacobian, UpdateRule::mbi}) {
        for (int alg = 5; alg <= 6; ++alg) {
          const IterationTrace t = alg == 5 ? run_alg5(bp, x0, rule, cfg) : run_alg6(bp, x0, rule, cfg);
          ++runs;
          const long k = t.hit_index();
          if (k < 1 || k > N || t.planned_N != N) ++fails;
          worst_ratio = std::max(worst_ratio, static_cast<double>(k) / static_cast<double>(N));
          // Independent per-block check at the certified point.
          if (alg == 5 && k >= 1) {
            const Vec g = bp.joint_f().grad(t.x_best);
            for (std::size_t b = 0; b < bp.blocks(); ++b) {
              const Vec gb = g.segment(bp.offset(b), bp.block_dim(b));
              const Vec xb = bp.block(t.x_best, b);
              const Vec yb = ball_l1_linear_argmin(-gb, 0.2);
              const double dl = -gb.dot(yb - xb) + 0.2 * xb.lpNorm<1>() - 0.2 * yb.lpNorm<1>();
              if (dl > eps + 1e-12) ++fails;
            }
          }
          if (alg == 6) g_descent.add(t, std::string("alg6/") + to_string(rule) + " #" + std::to_string(seed), true);
        }
      }
    }
  }
  return {fails == 0, std::to_string(runs) + " runs (d=3, n=5, both rules), " + std::to_string(fails) +
                          " failures, max k_hit/N " + fmt("%.3g", worst_ratio)};
}

Outcome c6_descent() {
  return {g_descent.violations == 0 && g_descent.steps > 0,
          std::to_string(g_descent.steps) + " steps of alg2/alg6 runs, " + std::to_string(g_descent.violations) +
              " above 1e-8, worst excess " + fmt("%.2e", g_descent.worst) + " (" + g_descent.worst_run + ")"};
}

Outcome c7_stochastic() {
  const ProblemInstance pr = make_quadratic_instance(5, 0.1, 7, true);
  const double sigma = 0.5, lambda = pr.params.lambda, p = 2.0, q = 2.0;
  const long N = 100, m = 4;
  const StochasticOracle o = make_noisy_oracle(pr.f, NoiseModel::gaussian, sigma, q, pr.dim());
  const Vec x0 = Vec::Zero(pr.dim());

  // Calibration: E ||G - grad f||_2^2 must equal sigma^2.
  Rng crng(77);
  double moment = 0.0;
  const int cal = 200000;
  for (int i = 0; i < cal; ++i) moment += (o.sample_grad(x0, crng) - pr.f.grad(x0)).squaredNorm();
  moment /= cal;
  const bool calibrated = std::abs(moment - sigma * sigma) <= 0.02 * sigma * sigma;

  // Phi* from the independent projected-subgradient oracle (convex problem).
  std::mt19937_64 orng(7);
  auto phi_fn = [&](const Vec& y) { return pr.f(y) + pr.h(y); };
  auto phi_sub = [&](const Vec& y) { return Vec(pr.f.grad(y) + 0.1 * oracle::sign_vec(y)); };
  const double phi_star = oracle::ball_minimize(phi_fn, phi_sub, static_cast<int>(pr.dim()), 100000, orng, 5).value;
  const double gap = phi_fn(x0) - phi_star;

  double sum = 0.0, sum_sq = 0.0, exact = 0.0;
  const int reps = 100;
  for (int r = 0; r < reps; ++r) {
    StochasticRunConfig cfg;
    cfg.iterations = N;
    cfg.batch = {m};
    cfg.seed = 7000 + static_cast<std::uint64_t>(r);
    const IterationTrace t = run_alg3(pr, o, x0, cfg);
    const TraceRow& best = t.rows[static_cast<std::size_t>(t.best_index)];
    sum += best.cert;
    sum_sq += best.cert * best.cert;
    exact += best.cert_exact;
  }
  const double mean = sum / reps;
  const double se = std::sqrt(std::max(0.0, sum_sq / reps - mean * mean) / (reps - 1));
  const double noise_term = 2.0 * std::pow(sigma, q) / std::pow(lambda * p, q / p) * static_cast<double>(N) /
                            std::pow(static_cast<double>(m), q - 1.0);
  const double bound = (noise_term + gap) / static_cast<double>(N) + 3.0 * se;
  return {calibrated && mean <= bound,
          "mean sampled dU at k~ " + fmt("%.3e", mean) + " <= bound " + fmt("%.3e", bound) + " (se " + fmt("%.1e", se) +
              ", mean exact dU " + fmt("%.3e", exact / reps) + "), noise moment " + fmt("%.4f", moment) + " vs " +
              fmt("%.4f", sigma * sigma)};
}

Outcome c8_smoothing_sandwich() {
  Rng rng(808);
  const NonsmoothTerm h = NonsmoothTerm::l1(1.0);
  const double r = 0.5;
  long checks = 0, violations = 0;
  double worst = -1e300;
  for (int dim : {1, 3, 10}) {
    const double m_bound = std::sqrt(static_cast<double>(dim));  // ||sign(x)||_2
    for (int t = 0; t < 20; ++t) {
      const Vec x = 0.3 * gaussian_vector(dim, rng);
      const double hx = x.lpNorm<1>();
      const SmoothedEstimate e = estimate_h_r(h, x, r, 20000, rng);
      const double band = 5.0 * e.value_se;
      ++checks;
      worst = std::max({worst, hx - e.value - band, e.value - hx - m_bound * r - band});
      if (e.value < hx - band || e.value > hx + m_bound * r + band) ++violations;
    }
  }
  return {violations == 0, std::to_string(checks) + " points over dims {1,3,10}, " + std::to_string(violations) +
                               " outside the band, worst excess " + fmt("%.2e", worst)};
}

Outcome c9_table1() {
  harness::Table1Options o;  // d = 4, n = 8, seeds 1..10, lambda = 20, rho = 0.85, cap 2000
  const auto rows = harness::run_table1(o);
  int a5_nonzero = 0, a6_term = 0, bcd_bad = 0;
  for (const auto& r : rows) {
    if (r.method == "alg5" && std::abs(r.value) > 1e-10) ++a5_nonzero;
    if (r.method == "alg6" && r.iterations < 2000 && r.certified) ++a6_term;
    if (r.method == "bcd" && (r.iterations >= 2000 || r.value < 0.0)) ++bcd_bad;
  }
  // The powered runs also feed the descent criterion.
  for (int i = 0; i < o.instances; ++i) {
    const std::uint64_t s = o.seed + static_cast<std::uint64_t>(i);
    const SparsePcaInstance inst = make_sparse_pca_instance(o.d, o.n, o.rho, s);
    SolveConfig cfg;
    cfg.eps = o.eps;
    cfg.max_iters = o.max_iters;
    cfg.planner_mode = PlannerMode::explicit_N;
    g_descent.add(run_alg6(inst.block_problem(o.lambda), sparse_pca_start(inst, s), UpdateRule::jacobian, cfg),
                  "alg6 sparse PCA seed " + std::to_string(s), true);
  }
  return {a5_nonzero >= 7 && a6_term >= 8 && bcd_bad >= 1,
          "alg5 nonzero " + std::to_string(a5_nonzero) + "/10 (need 7), alg6 terminated " + std::to_string(a6_term) +
              "/10 (need 8), bcd capped or negative " + std::to_string(bcd_bad) + "/10 (need 1)"};
}

Outcome c10_table2() {
  int good = 0;
  long worst_iter = 0;
  for (int i = 0; i < 10; ++i) {
    const std::uint64_t s = 1 + static_cast<std::uint64_t>(i);
    const ZvdInstance z = make_zvd_instance(20, 40, 0.1, s);
    const ProblemInstance pr = z.problem();
    Rng rng = child_rng(s, 0, 10);
    SolveConfig cfg;
    cfg.eps = 1e-4;
    cfg.max_iters = 600;
    cfg.planner_mode = PlannerMode::explicit_N;
    const IterationTrace t = run_alg1_concave(pr, pr.set->sample(rng), cfg);
    bool mono = true;
    for (std::size_t k = 0; k + 1 < t.rows.size(); ++k)
      if (t.rows[k + 1].phi > t.rows[k].phi + 1e-8) mono = false;
    // Recompute the linear certificate at the returned point with the closed-form solver.
    const Vec x = t.x_best;
    const Vec g = pr.f.grad(x);
    const Vec y = zvd_subproblem(z, g);
    const double dl = -g.dot(y - x) + pr.h(x) - pr.h(y);
    worst_iter = std::max(worst_iter, t.iterations);
    if (mono && t.certificate.passed && dl <= 1e-4 + 1e-9 && t.iterations <= 600) ++good;
  }
  return {good == 10, std::to_string(good) + "/10 instances monotone with dL <= 1e-4 within 600 iterations (max " +
                          std::to_string(worst_iter) + ")"};
}

Outcome c11_gradients() {
  Rng rng(1111);
  const double h = 1e-6;
  auto rel_error = [&](const SmoothOracle& f, const Vec& x) {
    const Vec g = f.grad(x);
    Vec fd(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Vec a = x, b = x;
      a[i] += h;
      b[i] -= h;
      fd[i] = (f(a) - f(b)) / (2.0 * h);
    }
    return (fd - g).norm() / std::max(1.0, g.norm());
  };
  std::map<std::string, double> worst;
  auto sweep = [&](const std::string& name, const SmoothOracle& f, const FeasibleSetOracle& set) {
    double w = 0.0;
    for (int t = 0; t < 50; ++t) w = std::max(w, rel_error(f, set.sample(rng)));
    worst[name] = w;
  };
  const ProblemInstance qc = make_quadratic_instance(6, 0.1, 1, true);
  const ProblemInstance qn = make_quadratic_instance(6, 0.1, 2, false);
  const ProblemInstance sl = make_tensor_slice_instance(4, 5, 0.1, 3);
  const BlockProblem bp = make_sparse_pca_instance(4, 5, 0.1, 4).block_problem(20.0);
  const ProblemInstance zv = make_zvd_instance(10, 20, 0.1, 5).problem();
  const SqrtPenaltyInstance sq = make_sqrt_penalty_instance(5, 0.3, 6);
  sweep("quadratic", qc.f, *qc.set);
  sweep("quadratic_nonconvex", qn.f, *qn.set);
  sweep("tensor_slice", sl.f, *sl.set);
  sweep("tensor_form", bp.joint_f(), *bp.joint_set());
  sweep("zvd", zv.f, *zv.set);
  sweep("least_squares", sq.problem.f, *sq.problem.set);
  bool ok = true;
  std::ostringstream os;
  for (const auto& [name, w] : worst) {
    ok = ok && w <= 1e-5;
    os << name << ' ' << fmt("%.1e", w) << ' ';
  }
  return {ok, "max relative error at 50 points: " + os.str()};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
  };
  // Criterion 6 summarizes descent records from 4, 5 and 9, so it runs last.
  const std::vector<Criterion> criteria{
      {1, "closed-form subproblems match the subgradient oracle", 30, c1_oracle_equivalence},
      {2, "power monotonicity inequality", 5, c2_power_monotonicity},
      {3, "powered-prox stability bound", 60, c3_prox_stability},
      {4, "single-block iteration bounds", 300, c4_single_block_bounds},
      {5, "multi-block iteration bounds", 600, c5_multiblock_bounds},
      {7, "mini-batch expectation bound", 300, c7_stochastic},
      {8, "smoothing sandwich", 30, c8_smoothing_sandwich},
      {9, "sparse tensor PCA qualitative table", 600, c9_table1},
      {10, "discriminant problem qualitative table", 300, c10_table2},
      {11, "gradient checks", 60, c11_gradients},
      {6, "monotone descent of powered methods", 1e9, c6_descent},
  };
  std::map<int, std::string> lines;
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool ok = o.ok;
    std::string timing = fmt("%.1f s", secs);
    if (c.limit_s < 1e8) {
      timing += fmt(", limit %.0f s", c.limit_s);
      if (secs > c.limit_s) ok = false;
    }
    if (!ok) ++failed;
    char head[160];
    std::snprintf(head, sizeof head, "[%s] %2d %s: ", ok ? "PASS" : "FAIL", c.id, c.name);
    lines[c.id] = head + o.detail + " (" + timing + ")";
    std::fprintf(stderr, "finished criterion %d\n", c.id);
  }
  for (const auto& [id, line] : lines) std::printf("%s\n", line.c_str());
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
