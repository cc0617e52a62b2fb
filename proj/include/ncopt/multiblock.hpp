#ifndef NCOPT_MULTIBLOCK_HPP
#define NCOPT_MULTIBLOCK_HPP

// Block-structured problems min f(x_1, ..., x_d) + sum_i h_i(x_i), x_i in S_i,
// and the block conditional-gradient and block powered-prox methods under the
// Jacobian rule (all blocks move) and the maximum-block-improvement rule (only
// the block with the largest model improvement moves).

#include "ncopt/solvers_det.hpp"

#include <vector>

namespace ncopt {

enum class UpdateRule { jacobian, mbi };

inline const char* to_string(UpdateRule r) { return r == UpdateRule::jacobian ? "jacobian" : "mbi"; }

inline UpdateRule parse_update_rule(const std::string& s) {
  if (s == "jacobian") return UpdateRule::jacobian;
  if (s == "mbi") return UpdateRule::mbi;
  throw PreconditionError("unknown update rule '" + s + "'");
}

class BlockProblem {
 public:
  using BlockGradFn = std::function<Vec(const Vec&, std::size_t)>;

  BlockProblem(std::vector<std::shared_ptr<const FeasibleSetOracle>> sets, std::vector<NonsmoothTerm> h,
               SmoothOracle f, SmoothnessParams params, BlockGradFn block_grad = {})
      : sets_(std::move(sets)), h_(std::move(h)), f_(std::move(f)), params_(params), block_grad_(std::move(block_grad)) {
    if (sets_.empty()) throw PreconditionError("block problem needs at least one block");
    if (sets_.size() != h_.size()) throw PreconditionError("one nonsmooth term per block is required");
    joint_ = std::make_shared<ProductSet>(sets_);
  }

  [[nodiscard]] std::size_t blocks() const { return sets_.size(); }
  [[nodiscard]] Eigen::Index dim() const { return joint_->dim(); }
  [[nodiscard]] Eigen::Index offset(std::size_t i) const { return joint_->offset(i); }
  [[nodiscard]] Eigen::Index block_dim(std::size_t i) const { return sets_[i]->dim(); }
  [[nodiscard]] const FeasibleSetOracle& block_set(std::size_t i) const { return *sets_[i]; }
  [[nodiscard]] const NonsmoothTerm& block_h(std::size_t i) const { return h_[i]; }
  [[nodiscard]] const SmoothOracle& joint_f() const { return f_; }
  [[nodiscard]] const SmoothnessParams& params() const { return params_; }
  [[nodiscard]] std::shared_ptr<const ProductSet> joint_set() const { return joint_; }
  void set_params(SmoothnessParams p) { params_ = p; }

  double phi_star_lower = -std::numeric_limits<double>::infinity();

  [[nodiscard]] auto block(const Vec& x, std::size_t i) const { return x.segment(offset(i), block_dim(i)); }

  /// grad_i f(x); slices the joint gradient unless a block gradient was supplied.
  [[nodiscard]] Vec block_grad(const Vec& x, std::size_t i) const {
    if (block_grad_) return block_grad_(x, i);
    return f_.grad(x).segment(offset(i), block_dim(i));
  }

  [[nodiscard]] double h_sum(const Vec& x) const {
    double s = h_[0](block(x, 0));
    for (std::size_t i = 1; i < blocks(); ++i) s += h_[i](block(x, i));
    return s;
  }

  [[nodiscard]] double phi(const Vec& x) const { return f_(x) + h_sum(x); }

  /// max_i diam_p(S_i).
  [[nodiscard]] double diam_over(double p) const {
    double d = 0.0;
    for (const auto& s : sets_) d = std::max(d, s->diam_p(p));
    return d;
  }

  /// min_i diam_p(S_i).
  [[nodiscard]] double diam_under(double p) const {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& s : sets_) d = std::min(d, s->diam_p(p));
    return d;
  }

  [[nodiscard]] bool contains(const Vec& x, double tol = 1e-9) const { return joint_->contains(x, tol); }

 private:
  std::vector<std::shared_ptr<const FeasibleSetOracle>> sets_;
  std::vector<NonsmoothTerm> h_;
  SmoothOracle f_;
  SmoothnessParams params_;
  BlockGradFn block_grad_;
  std::shared_ptr<ProductSet> joint_;
};

inline ModelImprovement block_delta_L(const BlockProblem& bp, const Vec& x, std::size_t i) {
  if (!bp.contains(x)) throw DomainError("block_delta_L: point is not feasible");
  return linear_improvement(bp.block_set(i), bp.block_h(i), bp.block_grad(x, i), bp.block(x, i));
}

inline ModelImprovement block_delta_U(const BlockProblem& bp, const Vec& x, std::size_t i) {
  if (!bp.contains(x)) throw DomainError("block_delta_U: point is not feasible");
  return powered_improvement(bp.block_set(i), bp.block_h(i), bp.block_grad(x, i), bp.block(x, i), bp.params().lambda,
                             bp.params().p);
}

struct BlockCertificate {
  CertificateKind kind = CertificateKind::linear;
  std::vector<double> values;
  std::vector<double> thresholds;
  double epsilon = kNaN;
  long offending_block = -1;  // first block above its threshold
  bool passed = false;
};

/// Per-block thresholds: eps for the linear kind, 1/2 (eps / (diam_p(S_i) lambda^{1/p}))^q
/// for the powered kind.
inline std::vector<double> block_thresholds(const BlockProblem& bp, double eps, CertificateKind kind) {
  if (!(eps > 0.0)) throw PreconditionError("epsilon must be positive");
  std::vector<double> thr(bp.blocks(), eps);
  if (kind == CertificateKind::linear) return thr;
  const double p = bp.params().p;
  const double lambda = bp.params().lambda;
  for (std::size_t i = 0; i < bp.blocks(); ++i) {
    const double diam = bp.block_set(i).diam_p(p);
    if (eps > std::pow(diam, p) * lambda)
      throw PreconditionError("powered certificate requires eps <= diam_p(S_i)^p * lambda; violated by block " +
                              std::to_string(i));
    thr[i] = powered_threshold(eps, diam, lambda, p);
  }
  return thr;
}

inline BlockCertificate check_block_stationary(const BlockProblem& bp, const std::vector<double>& deltas, double eps,
                                               CertificateKind kind) {
  if (deltas.size() != bp.blocks()) throw PreconditionError("one improvement per block is required");
  BlockCertificate c;
  c.kind = kind;
  c.values = deltas;
  c.epsilon = eps;
  c.thresholds = block_thresholds(bp, eps, kind);
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] <= c.thresholds[i])) {
      c.offending_block = static_cast<long>(i);
      break;
    }
  }
  c.passed = c.offending_block < 0;
  return c;
}

/// ceil(2 (diam_over^p lambda)^{q-1} gap / eps^q); requires 0 < eps < diam_under^p lambda.
inline long plan_multiblock_N(double phi_gap, double diam_over, double diam_under, double lambda, double p,
                              double eps) {
  const double q = conjugate_exponent(p);
  if (!(eps > 0.0) || !(eps < std::pow(diam_under, p) * lambda))
    throw PreconditionError("iteration bound requires 0 < eps < min_i diam_p(S_i)^p * lambda");
  const double n = 2.0 * std::max(phi_gap, 0.0) * std::pow(std::pow(diam_over, p) * lambda, q - 1.0) / std::pow(eps, q);
  return std::max(1L, static_cast<long>(std::ceil(n)));
}

namespace detail {

/// First index attaining the maximum.
inline std::size_t argmax_first(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline IterationTrace run_block_method(const BlockProblem& bp, const Vec& x0, UpdateRule rule, const SolveConfig& cfg,
                                       bool powered) {
  if (x0.size() != bp.dim() || !bp.contains(x0)) throw DomainError("starting point is not feasible");
  if (cfg.max_iters < 1) throw PreconditionError("max_iters must be at least 1");
  const double lambda = bp.params().lambda;
  const double p = bp.params().p;
  const std::size_t d = bp.blocks();
  const CertificateKind kind = powered ? CertificateKind::powered : CertificateKind::linear;
  const std::vector<double> thr = block_thresholds(bp, cfg.eps, kind);
  const double thr_min = *std::min_element(thr.begin(), thr.end());
  IterationTrace t;
  t.algorithm = powered ? "alg6" : "alg5";
  long n_max = cfg.max_iters;
  if (cfg.planner_mode == PlannerMode::eps_target) {
    if (!std::isfinite(bp.phi_star_lower))
      throw PreconditionError("planner needs a finite lower bound on the optimal value");
    t.planned_N = plan_multiblock_N(bp.phi(x0) - bp.phi_star_lower, bp.diam_over(p), bp.diam_under(p), lambda, p,
                                    cfg.eps);
    n_max = std::min(n_max, t.planned_N);
  } else {
    t.planned_N = n_max;
  }
  StationarityCertificate cert{kind, kNaN, cfg.eps, thr_min, -1, false};
  bool hit = false;
  Vec x = x0;
  Vec best_x = x0;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<double> delta(d);
  std::vector<Vec> target(d);
  std::vector<double> h_now(d);
  StepTimer timer(cfg.timing);
  for (long k = 1; k <= n_max; ++k) {
    const Vec g = bp.joint_f().grad(x);
    bool all_clear = true;
    double score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < d; ++i) {
      const Vec gi = g.segment(bp.offset(i), bp.block_dim(i));
      const Vec xi = bp.block(x, i);
      const ModelImprovement m = powered ? powered_improvement(bp.block_set(i), bp.block_h(i), gi, xi, lambda, p)
                                         : linear_improvement(bp.block_set(i), bp.block_h(i), gi, xi);
      delta[i] = m.delta;
      target[i] = m.minimizer;
      if (!(m.delta <= thr[i])) all_clear = false;
      // Improvements rescaled to the smallest threshold so that the row value
      // clears thr_min exactly when every block clears its own threshold.
      score = std::max(score, m.delta * (thr_min / thr[i]));
    }
    TraceRow row;
    row.k = k;
    row.phi = bp.joint_f()(x) + bp.h_sum(x);
    row.cert = score;
    t.iterations = k;
    if (score < best_val) {
      best_val = score;
      best_x = x;
    }
    if (all_clear && !hit) {
      hit = true;
      cert = StationarityCertificate{kind, score, cfg.eps, thr_min, k, true};
    }
    if (hit && cfg.early_stop) {
      row.wall_ns = timer.lap();
      t.rows.push_back(row);
      break;
    }
    auto move = [&](std::size_t i) {
      auto xi = x.segment(bp.offset(i), bp.block_dim(i));
      if (powered) {
        xi = target[i];
      } else {
        const Vec gi = g.segment(bp.offset(i), bp.block_dim(i));
        const Vec di = target[i] - xi;
        const double hx = bp.block_h(i)(xi);
        const double alpha = line_search_alpha(gi.dot(di), pnorm_pow(di, p), hx, bp.block_h(i)(target[i]), lambda, p);
        if (rule == UpdateRule::mbi || d == 1) row.alpha = alpha;
        xi = (1.0 - alpha) * xi + alpha * target[i];
      }
    };
    if (rule == UpdateRule::jacobian) {
      double sum = 0.0;
      for (double v : delta) sum += v;
      if (powered) row.decrease = sum;
      for (std::size_t i = 0; i < d; ++i) move(i);
      row.block = -1;
    } else {
      const std::size_t i0 = argmax_first(delta);
      if (powered) row.decrease = delta[i0];
      move(i0);
      row.block = static_cast<int>(i0);
    }
    row.wall_ns = timer.lap();
    t.rows.push_back(row);
  }
  t.best_index = select_best_row(t.rows);
  t.certificate = cert;
  if (!hit && t.best_index >= 0) {
    const TraceRow& b = t.rows[static_cast<std::size_t>(t.best_index)];
    t.certificate.value = b.cert;
    t.certificate.iterate_index = b.k;
    t.certificate.passed = false;
  }
  t.x_final = x;
  t.final_phi = bp.phi(x);
  t.x_best = best_x;
  return t;
}

}  // namespace detail

/// Block conditional gradient: per-block linear models, per-block line search.
inline IterationTrace run_alg5(const BlockProblem& bp, const Vec& x0, UpdateRule rule, const SolveConfig& config) {
  return detail::run_block_method(bp, x0, rule, config, false);
}

/// Block powered-prox method.
inline IterationTrace run_alg6(const BlockProblem& bp, const Vec& x0, UpdateRule rule, const SolveConfig& config) {
  return detail::run_block_method(bp, x0, rule, config, true);
}

}  // namespace ncopt

#endif  // NCOPT_MULTIBLOCK_HPP
