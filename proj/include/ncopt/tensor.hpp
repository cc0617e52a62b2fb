#ifndef NCOPT_TENSOR_HPP
#define NCOPT_TENSOR_HPP

// Dense order-d tensors in row-major mode order (last index fastest), with
// the multilinear form A(x_1, ..., x_d) and its mode gradients.

#include "ncopt/common.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>
#include <vector>

namespace ncopt {

class DenseTensor {
 public:
  DenseTensor() = default;
  DenseTensor(std::vector<Eigen::Index> dims, std::vector<double> entries)
      : dims_(std::move(dims)), data_(std::move(entries)) {
    if (dims_.empty()) throw PreconditionError("tensor order must be at least 1");
    for (Eigen::Index n : dims_)
      if (n < 1) throw PreconditionError("tensor dimensions must be positive");
    if (static_cast<Eigen::Index>(data_.size()) != element_count(dims_))
      throw PreconditionError("entry count does not match the tensor dimensions");
  }

  static Eigen::Index element_count(const std::vector<Eigen::Index>& dims) {
    return std::accumulate(dims.begin(), dims.end(), Eigen::Index{1}, std::multiplies<>());
  }

  /// i.i.d. standard Gaussian entries drawn in storage order.
  static DenseTensor gaussian(std::vector<Eigen::Index> dims, std::uint64_t seed) {
    Rng rng = child_rng(seed, 0, 0x54454e534f52ULL);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> e(static_cast<std::size_t>(element_count(dims)));
    for (double& v : e) v = nd(rng);
    return DenseTensor(std::move(dims), std::move(e));
  }

  [[nodiscard]] std::size_t order() const { return dims_.size(); }
  [[nodiscard]] const std::vector<Eigen::Index>& dims() const { return dims_; }
  [[nodiscard]] Eigen::Index dim(std::size_t mode) const { return dims_[mode]; }
  [[nodiscard]] const std::vector<double>& entries() const { return data_; }
  [[nodiscard]] Eigen::Index size() const { return static_cast<Eigen::Index>(data_.size()); }

  [[nodiscard]] double frobenius_norm() const {
    return Eigen::Map<const Vec>(data_.data(), size()).norm();
  }

 private:
  std::vector<Eigen::Index> dims_;
  std::vector<double> data_;
};

namespace detail {

inline void check_blocks(const DenseTensor& t, const std::vector<Vec>& blocks, long skip = -1) {
  if (blocks.size() != t.order()) throw PreconditionError("one vector per tensor mode is required");
  for (std::size_t m = 0; m < t.order(); ++m)
    if (static_cast<long>(m) != skip && blocks[m].size() != t.dim(m))
      throw PreconditionError("block " + std::to_string(m) + " does not match its tensor dimension");
}

/// Contracts all modes except `keep` with the given vectors; returns a vector
/// of length dims[keep].
inline Vec contract_all_but(const DenseTensor& t, const std::vector<Vec>& blocks, std::size_t keep) {
  const std::size_t d = t.order();
  // Trailing modes: the data viewed as (rows x n_last), contracted from the right.
  Vec cur = Eigen::Map<const Vec>(t.entries().data(), t.size());
  Eigen::Index rows = t.size();
  for (std::size_t m = d; m-- > keep + 1;) {
    const Eigen::Index n = t.dim(m);
    rows /= n;
    // Row-major (rows x n) equals column-major (n x rows).
    Eigen::Map<const Mat> view(cur.data(), n, rows);
    Vec next = view.transpose() * blocks[m];
    cur.swap(next);
  }
  // Leading modes: the remaining data is (n_0 x rest) in row-major order.
  for (std::size_t m = 0; m < keep; ++m) {
    const Eigen::Index n = t.dim(m);
    const Eigen::Index rest = cur.size() / n;
    Eigen::Map<const Mat> view(cur.data(), rest, n);
    Vec next = view * blocks[m];
    cur.swap(next);
  }
  return cur;
}

}  // namespace detail

/// sum over all index tuples of A[i_1..i_d] x_1[i_1] ... x_d[i_d].
inline double tensor_contract_full(const DenseTensor& t, const std::vector<Vec>& blocks) {
  detail::check_blocks(t, blocks);
  return detail::contract_all_but(t, blocks, 0).dot(blocks[0]);
}

/// Gradient of the multilinear form with respect to block i.
inline Vec tensor_partial_gradient(const DenseTensor& t, const std::vector<Vec>& blocks, std::size_t i) {
  if (i >= t.order()) throw PreconditionError("mode index out of range");
  detail::check_blocks(t, blocks, static_cast<long>(i));
  return detail::contract_all_but(t, blocks, i);
}

/// Matrix A(x^{-ij}) obtained by contracting every mode except i < j.
inline Mat tensor_pair_matrix(const DenseTensor& t, const std::vector<Vec>& blocks, std::size_t i, std::size_t j) {
  Mat m(t.dim(i), t.dim(j));
  std::vector<Vec> b = blocks;
  for (Eigen::Index c = 0; c < t.dim(j); ++c) {
    b[j] = Vec::Unit(t.dim(j), c);
    m.col(c) = detail::contract_all_but(t, b, i);
  }
  return m;
}

struct TauEstimate {
  double tau = 0.0;       // max over unit fillings of ||A(x^{-ij})||_2
  double lipschitz = 0.0; // tau d (d - 1)
};

/// Estimates tau by alternating block power iterations (each block set to its
/// normalized mode gradient) from `n_trials` random unit starts, followed by an
/// exact spectral norm of every pair matrix at the final filling.
inline TauEstimate estimate_tau_lipschitz(const DenseTensor& t, int n_trials, std::uint64_t seed = 0,
                                          int max_sweeps = 20000) {
  if (n_trials < 1) throw PreconditionError("need at least one trial");
  const std::size_t d = t.order();
  if (d < 2) throw PreconditionError("tau needs a tensor of order at least 2");
  TauEstimate out;
  if (t.frobenius_norm() == 0.0) return out;
  for (int trial = 0; trial < n_trials; ++trial) {
    Rng rng = child_rng(seed, static_cast<std::uint64_t>(trial), 0x544155ULL);
    std::vector<Vec> x(d);
    for (std::size_t m = 0; m < d; ++m) x[m] = gaussian_vector(t.dim(m), rng).normalized();
    double value = tensor_contract_full(t, x);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
      for (std::size_t m = 0; m < d; ++m) {
        const Vec g = tensor_partial_gradient(t, x, m);
        const double ng = g.norm();
        if (ng > 0.0) x[m] = g / ng;
      }
      const double next = std::abs(tensor_contract_full(t, x));
      const bool done = next - value <= 1e-15 * std::max(1.0, next);
      value = next;
      if (done && sweep > 2) break;
    }
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i + 1; j < d; ++j) {
        Eigen::JacobiSVD<Mat> svd(tensor_pair_matrix(t, x, i, j));
        out.tau = std::max(out.tau, svd.singularValues()(0));
      }
    }
  }
  out.lipschitz = out.tau * static_cast<double>(d) * static_cast<double>(d - 1);
  return out;
}

// ---------------------------------------------------------------------------
// Binary container: u64 order, u64 dims[order], u64 seed, f64 entries, all
// little-endian.
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
}

template <class T>
void write_le(std::ostream& os, T v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_le(std::istream& is) {
  T v;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw std::runtime_error("tensor file is truncated");
  return to_little(v);
}

}  // namespace detail

inline void write_tensor_binary(const std::string& path, const DenseTensor& t, std::uint64_t seed) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  detail::write_le<std::uint64_t>(os, t.order());
  for (Eigen::Index n : t.dims()) detail::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(n));
  detail::write_le<std::uint64_t>(os, seed);
  for (double v : t.entries()) detail::write_le<double>(os, v);
  if (!os) throw std::runtime_error("failed writing '" + path + "'");
}

struct LoadedTensor {
  DenseTensor tensor;
  std::uint64_t seed = 0;
};

inline LoadedTensor read_tensor_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  const auto order = detail::read_le<std::uint64_t>(is);
  if (order < 1 || order > 32) throw std::runtime_error("tensor file has an invalid order");
  std::vector<Eigen::Index> dims(order);
  for (auto& n : dims) {
    const auto v = detail::read_le<std::uint64_t>(is);
    if (v < 1 || v > (1u << 24)) throw std::runtime_error("tensor file has an invalid dimension");
    n = static_cast<Eigen::Index>(v);
  }
  LoadedTensor out;
  out.seed = detail::read_le<std::uint64_t>(is);
  std::vector<double> e(static_cast<std::size_t>(DenseTensor::element_count(dims)));
  for (double& v : e) v = detail::read_le<double>(is);
  out.tensor = DenseTensor(std::move(dims), std::move(e));
  return out;
}

}  // namespace ncopt

#endif  // NCOPT_TENSOR_HPP
