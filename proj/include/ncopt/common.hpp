#ifndef NCOPT_COMMON_HPP
#define NCOPT_COMMON_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace ncopt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Raised when an operation's documented precondition does not hold.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a point handed to an oracle is outside its domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Conjugate exponent q with 1/p + 1/q = 1.
inline double conjugate_exponent(double p) {
  if (!(p > 1.0)) throw PreconditionError("exponent p must exceed 1");
  return p / (p - 1.0);
}

/// ||v||_p^p, the p-th power of the p-norm.
inline double pnorm_pow(const Vec& v, double p) {
  if (p == 2.0) return v.squaredNorm();
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::pow(std::abs(v[i]), p);
  return s;
}

inline double pnorm(const Vec& v, double p) {
  if (p == 2.0) return v.norm();
  return std::pow(pnorm_pow(v, p), 1.0 / p);
}

inline double sign(double v) { return (v > 0.0) - (v < 0.0); }

/// Deterministic child stream for (seed, index). Streams for distinct indices
/// are decorrelated through seed_seq mixing.
inline Rng child_rng(std::uint64_t seed, std::uint64_t index, std::uint64_t salt = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(salt >> 32)};
  return Rng(seq);
}

inline Vec gaussian_vector(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

/// 64-bit FNV-1a digest over a byte range; used to fingerprint RNG and
/// iterate states in traces.
inline std::uint64_t fnv1a(const void* data, std::size_t len,
                           std::uint64_t h = 1469598103934665603ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t digest(const Vec& v) {
  return fnv1a(v.data(), static_cast<std::size_t>(v.size()) * sizeof(double));
}

}  // namespace ncopt

#endif  // NCOPT_COMMON_HPP
