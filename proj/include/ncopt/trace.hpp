#ifndef NCOPT_TRACE_HPP
#define NCOPT_TRACE_HPP

#include "ncopt/stationarity.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace ncopt {

inline constexpr int kTraceSchemaVersion = 1;

struct TraceRow {
  long k = 0;
  double phi = kNaN;         // Phi(x^k)
  double cert = kNaN;        // improvement measured at x^k (dL, dU or a sampled surrogate)
  double cert_exact = kNaN;  // exact improvement when `cert` is a sampled surrogate
  double alpha = kNaN;       // step size, NaN for prox-type updates
  int block = -1;            // updated block, -1 for joint steps
  double decrease = kNaN;    // decrease of Phi guaranteed by the step's model (not written to CSV)
  std::int64_t wall_ns = 0;
  std::uint64_t rng_digest = 0;
};

struct IterationTrace {
  std::string algorithm;
  std::vector<TraceRow> rows;
  StationarityCertificate certificate;
  long best_index = -1;  // first k attaining the minimum recorded certificate
  long planned_N = 0;
  long iterations = 0;
  double final_phi = kNaN;
  Vec x_final;
  Vec x_best;

  /// First k whose certificate passed, or -1.
  [[nodiscard]] long hit_index() const { return certificate.passed ? certificate.iterate_index : -1; }
};

/// Steady-clock stopwatch; returns 0 when timing is disabled so that traces are
/// reproducible byte for byte.
class StepTimer {
 public:
  explicit StepTimer(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
  std::int64_t lap() {
    if (!enabled_) return 0;
    const auto now = std::chrono::steady_clock::now();
    const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(now - start_).count();
    start_ = now;
    return ns;
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

/// Selects k~ as the first row attaining the minimum certificate value.
inline long select_best_row(const std::vector<TraceRow>& rows) {
  long best = -1;
  double best_val = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].cert < best_val) {
      best_val = rows[i].cert;
      best = static_cast<long>(i);
    }
  }
  return best;
}

namespace detail {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_trace_csv(std::ostream& os, const IterationTrace& trace) {
  os << "# schema_version=" << kTraceSchemaVersion << '\n';
  os << "k,phi,cert,cert_exact,alpha,block,wall_ns,rng_digest\n";
  for (const TraceRow& r : trace.rows) {
    os << r.k << ',' << detail::format_double(r.phi) << ',' << detail::format_double(r.cert) << ','
       << detail::format_double(r.cert_exact) << ',' << detail::format_double(r.alpha) << ',' << r.block << ','
       << r.wall_ns << ',' << r.rng_digest << '\n';
  }
}

inline nlohmann::json certificate_json(const StationarityCertificate& c) {
  auto num = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
  return {{"kind", to_string(c.kind)}, {"value", num(c.value)},           {"epsilon", num(c.epsilon)},
          {"threshold", num(c.threshold)}, {"iterate_index", c.iterate_index}, {"passed", c.passed}};
}

inline nlohmann::json trace_summary_json(const IterationTrace& t) {
  nlohmann::json j;
  j["schema_version"] = kTraceSchemaVersion;
  j["algorithm"] = t.algorithm;
  j["certificate"] = certificate_json(t.certificate);
  j["passed"] = t.certificate.passed;
  j["best_index"] = t.best_index;
  j["planned_N"] = t.planned_N;
  j["iterations"] = t.iterations;
  j["final_phi"] = std::isnan(t.final_phi) ? nlohmann::json(nullptr) : nlohmann::json(t.final_phi);
  return j;
}

}  // namespace ncopt

#endif  // NCOPT_TRACE_HPP
