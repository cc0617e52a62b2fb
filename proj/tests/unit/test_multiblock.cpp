#include "ncopt/applications.hpp"
#include "ncopt/multiblock.hpp"
#include "ncopt/solvers_det.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace ncopt;

namespace {

using SetPtr = std::shared_ptr<const FeasibleSetOracle>;

/// f(x) = -b^T x on a product of balls with the given radii.
BlockProblem separable_linear(const std::vector<Vec>& b, const std::vector<double>& radii) {
  std::vector<SetPtr> sets;
  std::vector<NonsmoothTerm> hs;
  for (std::size_t i = 0; i < b.size(); ++i) {
    sets.push_back(std::make_shared<L2BallSet>(b[i].size(), radii[i]));
    hs.push_back(NonsmoothTerm::zero());
  }
  const Vec all = join_blocks(b);
  SmoothOracle f{[all](const Vec& x) { return -all.dot(x); }, [all](const Vec&) { return Vec(-all); }, true};
  BlockProblem bp(sets, hs, f, SmoothnessParams(2.0, 1.0));
  bp.phi_star_lower = -all.norm() * 2.0;
  return bp;
}

/// Nonconvex coupled quadratic 1/2 x^T Q x + c^T x with rho ||x_i||_1 per block.
BlockProblem coupled_quadratic(int d, int n, double rho, std::uint64_t seed) {
  const ProblemInstance base = make_quadratic_instance(d * n, rho, seed, false);
  std::vector<SetPtr> sets;
  std::vector<NonsmoothTerm> hs;
  for (int i = 0; i < d; ++i) {
    sets.push_back(std::make_shared<L2BallSet>(n, 1.0));
    hs.push_back(NonsmoothTerm::l1(rho));
  }
  BlockProblem bp(sets, hs, base.f, SmoothnessParams(2.0, 1.0));
  const double lam = estimate_lambda(base.f, *bp.joint_set(), 2.0, 2000, seed);
  bp.set_params(SmoothnessParams(2.0, 2.0 * lam));
  // |f| over the product of d unit balls is bounded by ||Q|| d / 2 + ||c|| sqrt(d).
  bp.phi_star_lower = base.phi_star_lower * d;
  return bp;
}

}  // namespace

TEST(BlockDelta, SeparableLinearClosedForm) {
  Vec b1(2), b2(3);
  b1 << 1.0, 2.0;
  b2 << -1.0, 0.5, 0.0;
  const BlockProblem bp = separable_linear({b1, b2}, {1.0, 1.0});
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const Vec x = bp.joint_set()->sample(rng);
    EXPECT_NEAR(block_delta_L(bp, x, 0).delta, b1.norm() - b1.dot(bp.block(x, 0)), 1e-12);
    EXPECT_NEAR(block_delta_L(bp, x, 1).delta, b2.norm() - b2.dot(bp.block(x, 1)), 1e-12);
    for (std::size_t i = 0; i < 2; ++i) {
      EXPECT_GE(block_delta_L(bp, x, i).delta, -1e-10);
      EXPECT_LE(block_delta_U(bp, x, i).delta, block_delta_L(bp, x, i).delta + 1e-12);
    }
  }
  Vec opt(5);
  opt << b1.normalized(), b2.normalized();
  EXPECT_NEAR(block_delta_L(bp, opt, 0).delta, 0.0, 1e-12);
}

TEST(BlockDelta, MatchesSingleBlockOnSeparableQuadratic) {
  // f(x) = sum_i 1/2 ||x_i - c_i||^2 splits into independent single-block problems.
  Vec c(4);
  c << 0.3, -0.2, 0.9, 0.4;
  SmoothOracle f{[c](const Vec& x) { return 0.5 * (x - c).squaredNorm(); }, [c](const Vec& x) { return Vec(x - c); }};
  BlockProblem bp({std::make_shared<L2BallSet>(2), std::make_shared<L2BallSet>(2)},
                  {NonsmoothTerm::l1(0.1), NonsmoothTerm::l1(0.1)}, f, SmoothnessParams(2.0, 1.5));
  Rng rng(2);
  for (int t = 0; t < 10; ++t) {
    const Vec x = bp.joint_set()->sample(rng);
    for (std::size_t i = 0; i < 2; ++i) {
      const Vec ci = c.segment(2 * i, 2);
      ProblemInstance single{
          SmoothOracle{[ci](const Vec& y) { return 0.5 * (y - ci).squaredNorm(); }, [ci](const Vec& y) { return Vec(y - ci); }},
          NonsmoothTerm::l1(0.1), std::make_shared<L2BallSet>(2), SmoothnessParams(2.0, 1.5)};
      EXPECT_NEAR(block_delta_U(bp, x, i).delta, delta_U(single, bp.block(x, i)).delta, 1e-12);
    }
  }
}

TEST(BlockProblem, BlockGradientMatchesJointSlice) {
  const SparsePcaInstance inst = make_sparse_pca_instance(3, 4, 0.5, 3);
  const BlockProblem bp = inst.block_problem(10.0);
  Rng rng(3);
  for (int t = 0; t < 10; ++t) {
    const Vec x = bp.joint_set()->sample(rng);
    const Vec g = bp.joint_f().grad(x);
    for (std::size_t i = 0; i < bp.blocks(); ++i)
      EXPECT_LE((bp.block_grad(x, i) - g.segment(bp.offset(i), bp.block_dim(i))).norm(), 1e-10);
  }
  EXPECT_EQ(bp.dim(), 12);
  EXPECT_LE(bp.diam_under(2.0), bp.diam_over(2.0));
}

TEST(CheckBlockStationary, Thresholds) {
  Vec b(2);
  b << 1.0, 0.0;
  const BlockProblem bp = separable_linear({b, b}, {0.5, 1.0});
  const std::vector<double> thr = block_thresholds(bp, 0.2, CertificateKind::powered);
  EXPECT_NEAR(thr[0], 0.02, 1e-15);
  EXPECT_NEAR(thr[1], 0.005, 1e-15);

  EXPECT_TRUE(check_block_stationary(bp, {0.0, 0.0}, 0.1, CertificateKind::linear).passed);
  const BlockCertificate c = check_block_stationary(bp, {0.05, 0.2}, 0.1, CertificateKind::linear);
  EXPECT_FALSE(c.passed);
  EXPECT_EQ(c.offending_block, 1);

  try {
    (void)block_thresholds(bp, 3.0, CertificateKind::powered);
    FAIL() << "guard did not fire";
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("block 0"), std::string::npos);
  }
}

TEST(PlanMultiblock, UsesOverDiameterAndUnderGuard) {
  EXPECT_EQ(plan_multiblock_N(1.0, 2.0, 1.0, 1.0, 2.0, 0.1), 800);
  EXPECT_THROW(plan_multiblock_N(1.0, 2.0, 1.0, 1.0, 2.0, 1.5), PreconditionError);
}

TEST(UpdateRules, Parse) {
  EXPECT_EQ(parse_update_rule("jacobian"), UpdateRule::jacobian);
  EXPECT_EQ(parse_update_rule("mbi"), UpdateRule::mbi);
  EXPECT_THROW(parse_update_rule("gauss"), PreconditionError);
}

TEST(UpdateRules, ArgmaxScaleInvariance) {
  Rng rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> v(5), w(5);
    const double s = 0.01 + 10.0 * u(rng);
    for (int i = 0; i < 5; ++i) {
      v[i] = u(rng);
      w[i] = s * v[i];
    }
    EXPECT_EQ(detail::argmax_first(v), detail::argmax_first(w));
  }
  EXPECT_EQ(detail::argmax_first({1.0, 3.0, 3.0}), 1u);
}

TEST(RunBlock, SingleBlockIsBitIdenticalToJointSolvers) {
  const ProblemInstance pr = make_quadratic_instance(4, 0.3, 5, false);
  BlockProblem bp({pr.set}, {pr.h}, pr.f, pr.params);
  bp.phi_star_lower = pr.phi_star_lower;
  SolveConfig cfg;
  cfg.eps = 1e-4;
  cfg.max_iters = 400;
  for (UpdateRule rule : {UpdateRule::jacobian, UpdateRule::mbi}) {
    std::ostringstream a1, a5, a2, a6;
    IterationTrace t1 = run_alg1(pr, Vec::Zero(4), cfg);
    IterationTrace t5 = run_alg5(bp, Vec::Zero(4), rule, cfg);
    for (auto& r : t5.rows) r.block = -1;
    write_trace_csv(a1, t1);
    t5.algorithm = t1.algorithm;
    write_trace_csv(a5, t5);
    EXPECT_EQ(a1.str(), a5.str());
    EXPECT_EQ(t1.hit_index(), t5.hit_index());

    IterationTrace t2 = run_alg2(pr, Vec::Zero(4), cfg);
    IterationTrace t6 = run_alg6(bp, Vec::Zero(4), rule, cfg);
    for (auto& r : t6.rows) r.block = -1;
    write_trace_csv(a2, t2);
    t6.algorithm = t2.algorithm;
    write_trace_csv(a6, t6);
    EXPECT_EQ(a2.str(), a6.str());
    EXPECT_EQ(t2.planned_N, t6.planned_N);
  }
}

TEST(RunBlock, SeparableDescentBothRules) {
  Vec b1(2), b2(2), b3(2);
  b1 << 1.0, 2.0;
  b2 << -1.0, 0.5;
  b3 << 0.2, 0.2;
  const BlockProblem bp = separable_linear({b1, b2, b3}, {1.0, 2.0, 1.0});
  SolveConfig cfg;
  cfg.eps = 1e-6;
  cfg.max_iters = 200;
  for (UpdateRule rule : {UpdateRule::jacobian, UpdateRule::mbi}) {
    for (auto run : {run_alg5, run_alg6}) {
      const IterationTrace t = run(bp, Vec::Zero(6), rule, cfg);
      for (std::size_t k = 0; k + 1 < t.rows.size(); ++k) EXPECT_LE(t.rows[k + 1].phi, t.rows[k].phi + 1e-12);
      EXPECT_TRUE(t.certificate.passed);
    }
  }
}

TEST(RunBlock, PoweredDescentGuaranteed) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const BlockProblem bp = coupled_quadratic(3, 3, 0.2, seed);
    Rng rng(seed);
    const Vec x0 = bp.joint_set()->sample(rng);
    SolveConfig cfg;
    cfg.eps = 1e-4;
    cfg.max_iters = 300;
    cfg.early_stop = false;
    cfg.planner_mode = PlannerMode::explicit_N;
    const std::size_t d = bp.blocks();
    for (UpdateRule rule : {UpdateRule::jacobian, UpdateRule::mbi}) {
      const IterationTrace t = run_alg6(bp, x0, rule, cfg);
      for (std::size_t k = 0; k + 1 < t.rows.size(); ++k)
        EXPECT_LE(t.rows[k + 1].phi, t.rows[k].phi - t.rows[k].decrease + static_cast<double>(d) * 1e-8);
      for (const auto& r : t.rows) EXPECT_EQ(r.block, rule == UpdateRule::jacobian ? -1 : r.block);
      EXPECT_TRUE(bp.contains(t.x_final));
    }
  }
}

TEST(RunBlock, BoundValidation) {
  for (std::uint64_t seed = 11; seed <= 14; ++seed) {
    const BlockProblem bp = coupled_quadratic(3, 5, 0.2, seed);
    Rng rng(seed);
    const Vec x0 = bp.joint_set()->sample(rng);
    for (double eps : {1e-1, 1e-2}) {
      SolveConfig cfg;
      cfg.eps = eps;
      cfg.max_iters = 10000000;
      for (UpdateRule rule : {UpdateRule::jacobian, UpdateRule::mbi}) {
        const IterationTrace t5 = run_alg5(bp, x0, rule, cfg);
        EXPECT_TRUE(t5.certificate.passed);
        EXPECT_LE(t5.hit_index(), t5.planned_N);
        const IterationTrace t6 = run_alg6(bp, x0, rule, cfg);
        EXPECT_TRUE(t6.certificate.passed);
        EXPECT_LE(t6.hit_index(), t6.planned_N);
      }
    }
  }
}

TEST(RunBlock, RejectsInfeasibleStart) {
  Vec b(2);
  b << 1.0, 0.0;
  const BlockProblem bp = separable_linear({b, b}, {1.0, 1.0});
  EXPECT_THROW(run_alg5(bp, Vec::Constant(4, 2.0), UpdateRule::mbi, SolveConfig{}), DomainError);
}
