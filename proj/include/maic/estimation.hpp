/**
 * estimation.hpp
 *
 * From weights to effects: weighted arm means, link-scale contrasts, the
 * weighted outcome-on-treatment regression and the anchored indirect
 * comparison against the competitor's published effect.
 */

#ifndef MAIC_ESTIMATION_HPP
#define MAIC_ESTIMATION_HPP

#include <cmath>
#include <string_view>

#include "maic/data_model.hpp"
#include "maic/error.hpp"
#include "maic/normal.hpp"

namespace maic {

enum class EffectScale { MeanDifference, LogOddsRatio };

constexpr std::string_view to_string(EffectScale s) noexcept {
  return s == EffectScale::MeanDifference ? "mean_difference" : "log_odds_ratio";
}

struct EffectEstimate {
  double point = 0.0;
  double variance = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  EffectScale scale = EffectScale::MeanDifference;
  double level = 0.95;
};

/// Normal Wald interval point +/- z_{(1+level)/2} sqrt(variance).
inline EffectEstimate wald_estimate(double point, double variance, double level = 0.95,
                                    EffectScale scale = EffectScale::MeanDifference) {
  if (!(variance >= 0.0)) throw ValidationError("variance must be non-negative");
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("confidence level must lie in (0, 1)");
  const double half = standard_normal_quantile(0.5 * (1.0 + level)) * std::sqrt(variance);
  return {point, variance, point - half, point + half, scale, level};
}

/// sum y_i w_i / sum w_i.
inline double weighted_marginal_mean(const Vector& outcomes, const Vector& weights) {
  if (outcomes.size() == 0) throw ValidationError("empty arm");
  if (outcomes.size() != weights.size()) throw ValidationError("outcome and weight lengths differ");
  return outcomes.dot(weights) / weights.sum();
}

inline double logit(double mu) { return std::log(mu / (1.0 - mu)); }

/// g(mu1) - g(mu0) under the identity or logit link.
inline double marginal_effect(double mu1, double mu0, EffectScale scale) {
  if (scale == EffectScale::MeanDifference) return mu1 - mu0;
  if (!(mu1 > 0.0 && mu1 < 1.0 && mu0 > 0.0 && mu0 < 1.0)) {
    throw ValidationError("logit link needs marginal means strictly inside (0, 1)");
  }
  return logit(mu1) - logit(mu0);
}

/// Per-arm weighted means (mu1, mu0).
struct ArmMeans {
  double treated = 0.0;
  double control = 0.0;
};

inline ArmMeans weighted_arm_means(const Eigen::VectorXi& treatment, const Vector& outcome,
                                   const Vector& weights) {
  if (treatment.size() != outcome.size() || outcome.size() != weights.size()) {
    throw ValidationError("treatment, outcome and weight lengths differ");
  }
  if (outcome.size() == 0) throw ValidationError("empty arm");
  // accumulate deviations from a reference outcome so that a constant
  // outcome yields exactly that constant in both arms
  const double ref = outcome[0];
  double sw[2] = {0.0, 0.0};
  double swy[2] = {0.0, 0.0};
  for (Eigen::Index i = 0; i < outcome.size(); ++i) {
    const int a = treatment[i];
    sw[a] += weights[i];
    swy[a] += weights[i] * (outcome[i] - ref);
  }
  if (sw[0] == 0.0 || sw[1] == 0.0) throw ValidationError("empty arm");
  return {ref + swy[1] / sw[1], ref + swy[0] / sw[0]};
}

/// Treatment coefficient of the weighted least-squares fit of y on (1, t).
///
/// Solved through the 2x2 weighted normal equations
///   [S   S1] [b0]   [Sy ]
///   [S1  S1] [bt] = [Sy1]
/// with S = sum w, S1 = sum_{t=1} w, Sy = sum w y, Sy1 = sum_{t=1} w y, whose
/// solution is bt = Sy1/S1 - (Sy - Sy1)/(S - S1), the difference of weighted
/// arm means.
inline double weighted_outcome_regression(const Eigen::VectorXi& treatment, const Vector& outcome,
                                          const Vector& weights) {
  const auto m = weighted_arm_means(treatment, outcome, weights);
  return m.treated - m.control;
}

inline double weighted_outcome_regression(const IndexPatientData& ipd, const WeightVector& weights) {
  return weighted_outcome_regression(ipd.treatment(), ipd.outcome(), weights.values());
}

/// Delta_12 = Delta_10 - Delta_20 with summed variances and a normal interval.
inline EffectEstimate anchored_comparison(const EffectEstimate& delta_10, double delta_20_est,
                                          double delta_20_var, double level = 0.95) {
  if (!(delta_20_var >= 0.0) || !(delta_10.variance >= 0.0)) {
    throw ValidationError("variances must be non-negative");
  }
  return wald_estimate(delta_10.point - delta_20_est, delta_10.variance + delta_20_var, level,
                       delta_10.scale);
}

}  // namespace maic

#endif  // MAIC_ESTIMATION_HPP
