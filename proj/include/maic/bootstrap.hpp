/**
 * bootstrap.hpp
 *
 * Ordinary nonparametric bootstrap of the A-vs-C marginal effect. Only the
 * index-trial IPD is resampled (pooled, unstratified); every resample re-runs
 * the whole weighting pipeline. Resample b draws its indices from the
 * counter-based stream derive_key(seed, {b}), and replicate estimates land in
 * slot b, so results do not depend on the worker count.
 */

#ifndef MAIC_BOOTSTRAP_HPP
#define MAIC_BOOTSTRAP_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "maic/error.hpp"
#include "maic/methods.hpp"
#include "maic/parallel.hpp"
#include "maic/rng.hpp"

namespace maic {

struct BootstrapResult {
  double point = 0.0;               ///< mean of the replicate estimates
  double se = 0.0;                  ///< SD of the replicates, denominator (m - 1)
  std::vector<double> replicates;   ///< successful replicates in resample order
  int n_failed = 0;
  int requested = 0;
};

struct BootstrapSettings {
  int resamples = 2000;
  std::uint64_t seed = 0;
  unsigned threads = 1;             ///< 0 = all hardware threads
  double max_failure_rate = 0.05;
};

/// Subject indices for resample `b`: n uniform draws with replacement.
inline IndexVector resample_indices(std::uint64_t seed, std::uint64_t b, std::size_t n) {
  CounterRng rng(derive_key(seed, {b}));
  IndexVector idx(n);
  for (auto& i : idx) i = static_cast<std::size_t>(rng.below(n));
  return idx;
}

/// Mean and (m - 1)-denominator SD, summed in slot order.
inline BootstrapResult summarize_replicates(std::vector<double> replicates, int requested) {
  BootstrapResult r;
  r.requested = requested;
  r.n_failed = requested - static_cast<int>(replicates.size());
  r.replicates = std::move(replicates);
  const auto m = r.replicates.size();
  if (m == 0) return r;
  double sum = 0.0;
  for (double v : r.replicates) sum += v;
  r.point = sum / static_cast<double>(m);
  if (m > 1) {
    double ss = 0.0;
    for (double v : r.replicates) ss += (v - r.point) * (v - r.point);
    r.se = std::sqrt(ss / static_cast<double>(m - 1));
  }
  return r;
}

/// Outcome of bootstrapping one method; `failure` is set when the share of
/// failed resamples exceeds the ceiling or fewer than two replicates remain.
struct MethodBootstrap {
  BootstrapResult result;
  std::optional<std::string> failure;
};

/// Bootstrap several methods over one shared set of resamples.
inline std::array<MethodBootstrap, 4> bootstrap_methods(const AnalysisData& data,
                                                        std::span<const Method> methods,
                                                        const BootstrapSettings& bs,
                                                        const MethodSettings& ms = {}) {
  if (bs.resamples < 2) throw ValidationError("bootstrap needs at least 2 resamples");
  const auto n = static_cast<std::size_t>(data.n());
  const auto B = static_cast<std::size_t>(bs.resamples);
  std::vector<std::array<MethodPoint, 4>> slots(B);
  parallel_for(B, bs.threads, [&](std::size_t b) {
    const auto idx = resample_indices(bs.seed, b, n);
    slots[b] = estimate_methods(data.rows(idx), methods, ms);
  });

  std::array<MethodBootstrap, 4> out;
  for (Method m : methods) {
    const auto mi = static_cast<std::size_t>(m);
    std::vector<double> reps;
    reps.reserve(B);
    std::string last_failure;
    for (const auto& s : slots) {
      if (s[mi].delta_10) {
        reps.push_back(*s[mi].delta_10);
      } else {
        last_failure = s[mi].failure;
      }
    }
    auto& mb = out[mi];
    mb.result = summarize_replicates(std::move(reps), bs.resamples);
    const double rate = static_cast<double>(mb.result.n_failed) / static_cast<double>(B);
    if (rate > bs.max_failure_rate || mb.result.replicates.size() < 2) {
      mb.failure = std::to_string(mb.result.n_failed) + " of " + std::to_string(B) +
                   " resamples failed (last: " + last_failure + ")";
    }
  }
  return out;
}

/// Bootstrap a single method. Throws TooManyFailures past the failure ceiling.
inline BootstrapResult bootstrap_effect(const IndexPatientData& ipd, const AggregateSummary& summary,
                                        Method method, const BootstrapSettings& bs,
                                        const MethodSettings& ms = {}) {
  const auto data = AnalysisData::from(ipd, summary);
  const Method one[] = {method};
  auto res = bootstrap_methods(data, one, bs, ms)[static_cast<std::size_t>(method)];
  if (res.failure) throw TooManyFailures(*res.failure);
  return std::move(res.result);
}

}  // namespace maic

#endif  // MAIC_BOOTSTRAP_HPP
