#ifndef NCOPT_APPLICATIONS_HPP
#define NCOPT_APPLICATIONS_HPP

// Benchmark problems: sparse rank-one tensor PCA as a block problem, the
// penalized zero-variance discriminant problem with concave f, and small
// quadratic instances used for validation runs.

#include "ncopt/multiblock.hpp"
#include "ncopt/solvers_stoch.hpp"
#include "ncopt/tensor.hpp"

#include <json.hpp>

namespace ncopt {

/// Count of entries with |v_i| > 1e-10.
inline long support_size(const Vec& v, double threshold = 1e-10) {
  long s = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (std::abs(v[i]) > threshold) ++s;
  return s;
}

// ---------------------------------------------------------------------------
// Sparse tensor PCA:  min -A(x_1, ..., x_d) + rho sum_i ||x_i||_1,  ||x_i||_2 <= 1
// ---------------------------------------------------------------------------

inline std::vector<Vec> split_blocks(const DenseTensor& t, const Vec& x) {
  std::vector<Vec> b(t.order());
  Eigen::Index off = 0;
  for (std::size_t m = 0; m < t.order(); ++m) {
    b[m] = x.segment(off, t.dim(m));
    off += t.dim(m);
  }
  return b;
}

inline Vec join_blocks(const std::vector<Vec>& blocks) {
  Eigen::Index n = 0;
  for (const Vec& b : blocks) n += b.size();
  Vec x(n);
  Eigen::Index off = 0;
  for (const Vec& b : blocks) {
    x.segment(off, b.size()) = b;
    off += b.size();
  }
  return x;
}

/// f(x) = -A(x_1, ..., x_d) on the concatenated blocks.
inline SmoothOracle negative_multilinear_form(std::shared_ptr<const DenseTensor> t) {
  SmoothOracle f;
  f.eval = [t](const Vec& x) { return -tensor_contract_full(*t, split_blocks(*t, x)); };
  f.grad = [t](const Vec& x) {
    const std::vector<Vec> b = split_blocks(*t, x);
    std::vector<Vec> g(b.size());
    for (std::size_t m = 0; m < b.size(); ++m) g[m] = -tensor_partial_gradient(*t, b, m);
    return join_blocks(g);
  };
  return f;
}

struct SparsePcaInstance {
  std::shared_ptr<const DenseTensor> tensor;
  double rho = 0.0;
  std::uint64_t seed = 0;

  /// Block view with unit Euclidean balls and h_i = rho ||.||_1.
  [[nodiscard]] BlockProblem block_problem(double lambda) const {
    std::vector<std::shared_ptr<const FeasibleSetOracle>> sets;
    std::vector<NonsmoothTerm> hs;
    for (std::size_t m = 0; m < tensor->order(); ++m) {
      sets.push_back(std::make_shared<L2BallSet>(tensor->dim(m), 1.0));
      hs.push_back(NonsmoothTerm::l1(rho));
    }
    auto t = tensor;
    BlockProblem bp(std::move(sets), std::move(hs), negative_multilinear_form(t), SmoothnessParams(2.0, lambda),
                    [t](const Vec& x, std::size_t i) { return Vec(-tensor_partial_gradient(*t, split_blocks(*t, x), i)); });
    // |A(x)| <= ||A||_F on unit blocks and h >= 0.
    bp.phi_star_lower = -tensor->frobenius_norm();
    return bp;
  }

  /// A(x_1, ..., x_d).
  [[nodiscard]] double value(const Vec& x) const { return tensor_contract_full(*tensor, split_blocks(*tensor, x)); }

  [[nodiscard]] long total_support(const Vec& x) const { return support_size(x); }
};

inline SparsePcaInstance make_sparse_pca_instance(int d, int n, double rho, std::uint64_t seed) {
  if (d < 2 || n < 1) throw PreconditionError("sparse PCA needs order >= 2 and dimension >= 1");
  if (rho < 0.0) throw PreconditionError("rho must be nonnegative");
  std::vector<Eigen::Index> dims(static_cast<std::size_t>(d), n);
  return {std::make_shared<const DenseTensor>(DenseTensor::gaussian(dims, seed)), rho, seed};
}

inline nlohmann::json tensor_sidecar_json(const SparsePcaInstance& inst) {
  return {{"format", "ncopt-tensor"},
          {"version", 1},
          {"byte_order", "little"},
          {"order", inst.tensor->order()},
          {"dims", inst.tensor->dims()},
          {"seed", inst.seed},
          {"rho", inst.rho}};
}

/// Writes `path` (binary) and `path + ".json"` (metadata).
inline void save_sparse_pca_instance(const std::string& path, const SparsePcaInstance& inst) {
  write_tensor_binary(path, *inst.tensor, inst.seed);
  std::ofstream js(path + ".json");
  if (!js) throw std::runtime_error("cannot write sidecar for '" + path + "'");
  js << tensor_sidecar_json(inst).dump(2) << '\n';
}

inline SparsePcaInstance load_sparse_pca_instance(const std::string& path, double rho) {
  LoadedTensor lt = read_tensor_binary(path);
  return {std::make_shared<const DenseTensor>(std::move(lt.tensor)), rho, lt.seed};
}

/// Unit-norm random start shared across methods for one instance.
inline Vec sparse_pca_start(const SparsePcaInstance& inst, std::uint64_t seed) {
  Rng rng = child_rng(seed, 0, 0x5354415254ULL);
  std::vector<Vec> b(inst.tensor->order());
  for (std::size_t m = 0; m < b.size(); ++m) b[m] = gaussian_vector(inst.tensor->dim(m), rng).normalized();
  return join_blocks(b);
}

struct BcdResult {
  IterationTrace trace;
  double value = 0.0;  // A(x_1, ..., x_d)
  long support = 0;
  long iterations = 0;
  bool hit_cap = false;
};

/// Jacobian block updates on the sphere-constrained problem: each block takes
/// argmax_{||y|| = 1} b_i^T y - rho ||y||_1 with b_i = A(x^{-i}) from the
/// previous iterate; a zero solution keeps the previous block. Stops once no
/// block moves more than `tol` (max-norm) or after `max_iters` steps.
inline BcdResult run_bcd_baseline(const SparsePcaInstance& inst, const Vec& x0, long max_iters, double tol = 1e-6) {
  const DenseTensor& t = *inst.tensor;
  std::vector<Vec> x = split_blocks(t, x0);
  for (const Vec& b : x)
    if (std::abs(b.norm() - 1.0) > 1e-9) throw DomainError("baseline start must have unit-norm blocks");
  BcdResult out;
  out.trace.algorithm = "bcd_baseline";
  out.trace.planned_N = max_iters;
  auto objective = [&](const std::vector<Vec>& b) {
    double h = 0.0;
    for (const Vec& v : b) h += inst.rho * v.lpNorm<1>();
    return -tensor_contract_full(t, b) + h;
  };
  long k = 1;
  for (; k <= max_iters; ++k) {
    std::vector<Vec> next(x.size());
    double change = 0.0;
    for (std::size_t m = 0; m < x.size(); ++m) {
      const Vec y = ball_l1_linear_argmin(tensor_partial_gradient(t, x, m), inst.rho);
      next[m] = y.norm() == 0.0 ? x[m] : y;
      change = std::max(change, (next[m] - x[m]).cwiseAbs().maxCoeff());
    }
    TraceRow row;
    row.k = k;
    row.phi = objective(x);
    row.cert = change;
    out.trace.rows.push_back(row);
    x.swap(next);
    if (change <= tol) break;
  }
  out.iterations = std::min(k, max_iters);
  out.hit_cap = k > max_iters;
  out.trace.iterations = out.iterations;
  const Vec xf = join_blocks(x);
  out.trace.x_final = xf;
  out.trace.final_phi = objective(x);
  out.value = tensor_contract_full(t, x);
  out.support = support_size(xf);
  return out;
}

// ---------------------------------------------------------------------------
// Penalized zero-variance discriminant problem:
//   min_{||x||_2 <= 1} -1/2 x^T N^T B N x + gamma sum_i sigma_i |(D N x)_i|
// ---------------------------------------------------------------------------

struct ZvdInstance {
  Mat B;      // m x m, positive semidefinite
  Mat N;      // m x n, orthonormal columns
  Mat D;      // m x m, orthogonal
  Vec sigma;  // m, nonnegative
  double gamma = 0.0;
  std::uint64_t seed = 0;

  [[nodiscard]] Eigen::Index n() const { return N.cols(); }
  [[nodiscard]] Eigen::Index m() const { return N.rows(); }
  [[nodiscard]] Mat reduced_matrix() const { return N.transpose() * B * N; }
  [[nodiscard]] Mat penalty_map() const { return D * N; }
  [[nodiscard]] Vec penalty_weights() const { return gamma * sigma; }

  [[nodiscard]] ProblemInstance problem() const {
    const Mat k = reduced_matrix();
    SmoothOracle f;
    f.eval = [k](const Vec& x) { return -0.5 * x.dot(k * x); };
    f.grad = [k](const Vec& x) { return Vec(-(k * x)); };
    f.concave = true;
    // Concave f satisfies the descent inequality for every lambda > 0.
    ProblemInstance pr{f, NonsmoothTerm::weighted_l1_map(penalty_weights(), penalty_map()),
                       std::make_shared<L2BallSet>(n(), 1.0), SmoothnessParams(2.0, kLambdaMin)};
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (k + k.transpose()), Eigen::EigenvaluesOnly);
    pr.phi_star_lower = -0.5 * std::max(0.0, es.eigenvalues().maxCoeff());
    return pr;
  }
};

inline Mat random_orthonormal_columns(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Mat g(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) g.col(j) = gaussian_vector(rows, rng);
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ() * Mat::Identity(rows, cols);
  // Fix column signs so the factor is a deterministic function of g.
  const Mat r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < cols; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

/// B = C^T C with C_ij ~ N(0, 1/m); N and D from QR factorizations of Gaussian
/// matrices; sigma_i = |N(0, 1)|.
inline ZvdInstance make_zvd_instance(int n, int m, double gamma, std::uint64_t seed) {
  if (n < 1 || m < n) throw PreconditionError("zero-variance instance needs 1 <= n <= m");
  if (gamma < 0.0) throw PreconditionError("gamma must be nonnegative");
  Rng rng = child_rng(seed, 0, 0x5a5644ULL);
  ZvdInstance z;
  Mat c(m, m);
  for (Eigen::Index j = 0; j < m; ++j) c.col(j) = gaussian_vector(m, rng) / std::sqrt(static_cast<double>(m));
  z.B = c.transpose() * c;
  z.N = random_orthonormal_columns(m, n, rng);
  z.D = random_orthonormal_columns(m, m, rng);
  z.sigma = gaussian_vector(m, rng).cwiseAbs();
  z.gamma = gamma;
  z.seed = seed;
  return z;
}

/// argmin_{||x||_2 <= 1} g^T x + gamma sum_i sigma_i |(D N x)_i|.
inline Vec zvd_subproblem(const ZvdInstance& z, const Vec& grad) {
  return solve_mapped_l1_linear_ball(grad, z.penalty_weights(), z.penalty_map(), 1.0).x;
}

// ---------------------------------------------------------------------------
// Quadratic validation instances on the unit ball
// ---------------------------------------------------------------------------

inline double spectral_norm_sym(const Mat& q) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (q + q.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline SmoothOracle quadratic_oracle(const Mat& q, const Vec& c) {
  return {[q, c](const Vec& x) { return 0.5 * x.dot(q * x) + c.dot(x); },
          [q, c](const Vec& x) { return Vec(q * x + c); }, false};
}

/// lambda <= 0 selects 2 x the sampled estimate.
inline double resolve_lambda(const ProblemInstance& pr, double lambda, std::uint64_t seed, int pairs = 2000) {
  if (lambda > 0.0) return lambda;
  return 2.0 * estimate_lambda(pr.f, *pr.set, pr.params.p, pairs, seed);
}

/// f(x) = 1/2 x^T Q x + c^T x, h = rho ||x||_1 on the unit ball. Convex
/// instances use Q = G^T G / n, otherwise Q is a symmetric Gaussian matrix.
inline ProblemInstance make_quadratic_instance(int n, double rho, std::uint64_t seed, bool convex = true,
                                               double lambda = 0.0) {
  if (n < 1) throw PreconditionError("dimension must be positive");
  Rng rng = child_rng(seed, 0, 0x51554144ULL);
  Mat g(n, n);
  for (int j = 0; j < n; ++j) g.col(j) = gaussian_vector(n, rng);
  const Mat q = convex ? Mat(g.transpose() * g / static_cast<double>(n)) : Mat(0.5 * (g + g.transpose()));
  const Vec c = gaussian_vector(n, rng);
  ProblemInstance pr{quadratic_oracle(q, c), NonsmoothTerm::l1(rho), std::make_shared<L2BallSet>(n, 1.0),
                     SmoothnessParams(2.0, 1.0)};
  pr.params = SmoothnessParams(2.0, resolve_lambda(pr, lambda, seed));
  pr.phi_star_lower = -0.5 * spectral_norm_sym(q) - c.norm();
  return pr;
}

/// f(x) = -A(x, x, w_3, ..., w_d): the tensor objective with the last d - 2
/// blocks frozen at random unit vectors and the first two tied together.
inline ProblemInstance make_tensor_slice_instance(int d, int n, double rho, std::uint64_t seed, double lambda = 0.0) {
  if (d < 2) throw PreconditionError("slice needs order >= 2");
  const SparsePcaInstance inst = make_sparse_pca_instance(d, n, rho, seed);
  Rng rng = child_rng(seed, 1, 0x534c494345ULL);
  std::vector<Vec> w(static_cast<std::size_t>(d));
  for (int m = 2; m < d; ++m) w[m] = gaussian_vector(n, rng).normalized();
  w[0] = Vec::Zero(n);
  w[1] = Vec::Zero(n);
  const Mat m01 = tensor_pair_matrix(*inst.tensor, w, 0, 1);
  const Mat sym = m01 + m01.transpose();
  SmoothOracle f{[m01](const Vec& x) { return -x.dot(m01 * x); }, [sym](const Vec& x) { return Vec(-(sym * x)); },
                 false};
  ProblemInstance pr{f, NonsmoothTerm::l1(rho), std::make_shared<L2BallSet>(n, 1.0), SmoothnessParams(2.0, 1.0)};
  pr.params = SmoothnessParams(2.0, resolve_lambda(pr, lambda, seed));
  pr.phi_star_lower = -0.5 * spectral_norm_sym(sym);
  return pr;
}

/// Least squares plus a concave square-root penalty on a box bounded away
/// from 0:  f(x) = 1/2 ||A x - b||^2 / n,  h(x) = gamma sum_i sqrt(x_i),
/// x in [lo, 1]^n. The smoothing radius must stay below lo.
struct SqrtPenaltyInstance {
  ProblemInstance problem;
  double lo = 0.2;
  double gamma = 0.0;

  /// Bound on ||grad h||_2 over the r-enlargement of the box.
  [[nodiscard]] double gradient_bound(double r) const {
    if (!(r < lo)) throw PreconditionError("smoothing radius must stay below the box's lower bound");
    return gamma * std::sqrt(static_cast<double>(problem.dim())) / (2.0 * std::sqrt(lo - r));
  }
};

inline SqrtPenaltyInstance make_sqrt_penalty_instance(int n, double gamma, std::uint64_t seed, double lo = 0.2) {
  if (n < 1) throw PreconditionError("dimension must be positive");
  if (!(lo > 0.0 && lo < 1.0)) throw PreconditionError("box lower bound must lie in (0, 1)");
  Rng rng = child_rng(seed, 0, 0x535152ULL);
  Mat a(n, n);
  for (int j = 0; j < n; ++j) a.col(j) = gaussian_vector(n, rng);
  const Vec b = gaussian_vector(n, rng);
  const double scale = 1.0 / static_cast<double>(n);
  const Mat q = scale * a.transpose() * a;
  const Vec c = -scale * a.transpose() * b;
  const double c0 = 0.5 * scale * b.squaredNorm();
  SmoothOracle f{[q, c, c0](const Vec& x) { return 0.5 * x.dot(q * x) + c.dot(x) + c0; },
                 [q, c](const Vec& x) { return Vec(q * x + c); }, false};
  NonsmoothTerm h = NonsmoothTerm::custom(
      [gamma](const Vec& x) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < x.size(); ++i) s += std::sqrt(std::max(x[i], 0.0));
        return gamma * s;
      },
      [gamma](const Vec& x) {
        Vec g(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) g[i] = gamma / (2.0 * std::sqrt(std::max(x[i], 1e-300)));
        return g;
      },
      gamma * std::sqrt(static_cast<double>(n)) / (2.0 * std::sqrt(lo)), true);
  auto box = std::make_shared<BoxSet>(BoxSet::uniform(n, lo, 1.0));
  ProblemInstance pr{f, h, box, SmoothnessParams(2.0, std::max(spectral_norm_sym(q), kLambdaMin))};
  // f >= 0 and h >= gamma n sqrt(lo).
  pr.phi_star_lower = gamma * n * std::sqrt(lo);
  return {pr, lo, gamma};
}

}  // namespace ncopt

#endif  // NCOPT_APPLICATIONS_HPP
