/**
 * metrics.hpp
 *
 * Simulation performance measures and their Monte Carlo standard errors.
 */

#ifndef MAIC_METRICS_HPP
#define MAIC_METRICS_HPP

#include <cmath>
#include <span>
#include <string>

#include "maic/error.hpp"
#include "maic/methods.hpp"

namespace maic {

/// One usable replicate: the A-vs-B estimate and whether its interval
/// covered the true value.
struct EstimateRecord {
  double delta = 0.0;
  bool covered = false;
};

struct MethodMetrics {
  Method method = Method::MAIC;
  double bias = 0.0;
  double bias_mcse = 0.0;
  double ese = 0.0;
  double ese_mcse = 0.0;
  double mse = 0.0;
  double mse_mcse = 0.0;
  double coverage = 0.0;
  double coverage_mcse = 0.0;
  int n_used = 0;
  int n_discarded = 0;
};

/// Performance of one method over N usable replicates:
///   bias     = mean(d) - truth               mcse = ese / sqrt(N)
///   ese      = SD(d), denominator N - 1      mcse = ese / sqrt(2(N - 1))
///   mse      = mean((d - truth)^2)           mcse = sqrt(sum(e_i^2 - mse)^2 / (N(N - 1)))
///   coverage = share of intervals covering   mcse = sqrt(cov (1 - cov) / N)
inline MethodMetrics compute_metrics(Method method, std::span<const EstimateRecord> records,
                                     double true_delta, int n_discarded = 0) {
  const auto N = records.size();
  if (N < 2) throw ValidationError("performance measures need at least 2 usable replicates");
  const double dn = static_cast<double>(N);

  double sum = 0.0, sum_sq_err = 0.0;
  std::size_t hits = 0;
  for (const auto& r : records) {
    sum += r.delta;
    const double e = r.delta - true_delta;
    sum_sq_err += e * e;
    hits += r.covered ? 1 : 0;
  }
  const double mean = sum / dn;
  double ss = 0.0;
  for (const auto& r : records) ss += (r.delta - mean) * (r.delta - mean);

  MethodMetrics m;
  m.method = method;
  m.bias = mean - true_delta;
  m.ese = std::sqrt(ss / (dn - 1.0));
  m.mse = sum_sq_err / dn;
  m.coverage = static_cast<double>(hits) / dn;
  m.bias_mcse = m.ese / std::sqrt(dn);
  m.ese_mcse = m.ese / std::sqrt(2.0 * (dn - 1.0));
  double dev = 0.0;
  for (const auto& r : records) {
    const double e = r.delta - true_delta;
    dev += (e * e - m.mse) * (e * e - m.mse);
  }
  m.mse_mcse = std::sqrt(dev / (dn * (dn - 1.0)));
  m.coverage_mcse = std::sqrt(m.coverage * (1.0 - m.coverage) / dn);
  m.n_used = static_cast<int>(N);
  m.n_discarded = n_discarded;
  return m;
}

}  // namespace maic

#endif  // MAIC_METRICS_HPP
