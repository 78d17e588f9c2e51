/**
 * methods.hpp
 *
 * The four estimators of the marginal A-vs-C effect in the competitor
 * population, as complete pipelines over one dataset:
 *
 *   MAIC      centre -> trial odds weights -> weighted regression
 *   2SMAIC    ... -> propensity model -> combined weights -> regression
 *   T-MAIC    MAIC with weights capped at a percentile
 *   T-2SMAIC  2SMAIC with combined weights capped at a percentile
 */

#ifndef MAIC_METHODS_HPP
#define MAIC_METHODS_HPP

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "maic/data_model.hpp"
#include "maic/estimation.hpp"
#include "maic/maic_weights.hpp"
#include "maic/propensity.hpp"

namespace maic {

enum class Method { MAIC = 0, TwoStageMAIC = 1, TruncatedMAIC = 2, TruncatedTwoStageMAIC = 3 };

inline constexpr std::array<Method, 4> kAllMethods = {
    Method::MAIC, Method::TwoStageMAIC, Method::TruncatedMAIC, Method::TruncatedTwoStageMAIC};

constexpr std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::MAIC: return "MAIC";
    case Method::TwoStageMAIC: return "2SMAIC";
    case Method::TruncatedMAIC: return "T-MAIC";
    case Method::TruncatedTwoStageMAIC: return "T-2SMAIC";
  }
  return "?";
}

inline std::optional<Method> parse_method(std::string_view s) {
  for (Method m : kAllMethods) {
    if (s == to_string(m)) return m;
  }
  return std::nullopt;
}

constexpr bool is_two_stage(Method m) noexcept {
  return m == Method::TwoStageMAIC || m == Method::TruncatedTwoStageMAIC;
}

constexpr bool is_truncated(Method m) noexcept {
  return m == Method::TruncatedMAIC || m == Method::TruncatedTwoStageMAIC;
}

struct MethodSettings {
  OptimizerSettings trial;
  LogisticSettings propensity;
  double truncation_percentile = 95.0;
};

/// Index-trial data in the form every estimator consumes. Centring is
/// row-wise, so resampling rows of z* equals centring a resampled dataset.
struct AnalysisData {
  Matrix z_star;
  Matrix x;
  Eigen::VectorXi t;
  Vector y;

  static AnalysisData from(const IndexPatientData& ipd, const AggregateSummary& summary) {
    return {center_covariates(ipd, summary), ipd.covariates(), ipd.treatment(), ipd.outcome()};
  }

  Eigen::Index n() const noexcept { return y.size(); }

  AnalysisData rows(std::span<const std::size_t> idx) const {
    const auto m = static_cast<Eigen::Index>(idx.size());
    AnalysisData out{Matrix(m, z_star.cols()), Matrix(m, x.cols()), Eigen::VectorXi(m), Vector(m)};
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto r = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)]);
      out.z_star.row(i) = z_star.row(r);
      out.x.row(i) = x.row(r);
      out.t[i] = t[r];
      out.y[i] = y[r];
    }
    return out;
  }

  bool both_arms_present() const {
    const auto treated = t.sum();
    return treated > 0 && treated < t.size();
  }
};

/// Everything the pipeline produces for one method on one dataset.
struct MethodFit {
  Method method;
  TrialWeightFit trial;
  std::optional<PropensityFit> propensity;
  WeightVector final_weights;
  double delta_10;
};

inline MethodFit fit_method(const AnalysisData& data, Method method, const MethodSettings& s = {}) {
  if (!data.both_arms_present()) throw ValidationError("empty arm");
  auto trial = fit_trial_weights(data.z_star, s.trial);
  std::optional<PropensityFit> ps;
  WeightVector w = trial.weights;
  if (is_two_stage(method)) {
    ps = fit_propensity(data.x, data.t, s.propensity);
    w = combine_weights(trial.weights, *ps, data.t);
  }
  if (is_truncated(method)) w = truncate_weights(w, s.truncation_percentile);
  const double delta = weighted_outcome_regression(data.t, data.y, w.values());
  return {method, std::move(trial), std::move(ps), std::move(w), delta};
}

/// Result slot for one method: the A-vs-C estimate, or the failure reason.
struct MethodPoint {
  std::optional<double> delta_10;
  std::string failure;
};

/// Run several methods on one dataset, fitting each shared model once.
/// Failures are captured per method rather than thrown.
inline std::array<MethodPoint, 4> estimate_methods(const AnalysisData& data,
                                                   std::span<const Method> methods,
                                                   const MethodSettings& s = {}) {
  std::array<MethodPoint, 4> out;
  auto fail_all = [&](const std::string& why) {
    for (Method m : methods) out[static_cast<std::size_t>(m)].failure = why;
    return out;
  };
  if (!data.both_arms_present()) return fail_all("empty arm");

  std::optional<TrialWeightFit> trial;
  try {
    trial = fit_trial_weights(data.z_star, s.trial);
  } catch (const Error& e) {
    return fail_all(e.what());
  }

  bool need_ps = false;
  for (Method m : methods) need_ps = need_ps || is_two_stage(m);
  std::optional<WeightVector> combined;
  std::string ps_failure;
  if (need_ps) {
    try {
      const auto ps = fit_propensity(data.x, data.t, s.propensity);
      combined = combine_weights(trial->weights, ps, data.t);
    } catch (const Error& e) {
      ps_failure = e.what();
    }
  }

  for (Method m : methods) {
    auto& slot = out[static_cast<std::size_t>(m)];
    if (is_two_stage(m) && !combined) {
      slot.failure = ps_failure;
      continue;
    }
    const WeightVector& base = is_two_stage(m) ? *combined : trial->weights;
    if (is_truncated(m)) {
      const auto capped = truncate_weights(base, s.truncation_percentile);
      slot.delta_10 = weighted_outcome_regression(data.t, data.y, capped.values());
    } else {
      slot.delta_10 = weighted_outcome_regression(data.t, data.y, base.values());
    }
  }
  return out;
}

}  // namespace maic

#endif  // MAIC_METHODS_HPP
