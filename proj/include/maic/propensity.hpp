/**
 * propensity.hpp
 *
 * Treatment-assignment (propensity score) model for the index trial and the
 * second-stage weights: logistic regression of treatment on all covariates,
 * inverse probability of treatment weights, and their product with the
 * trial-assignment odds weights.
 */

#ifndef MAIC_PROPENSITY_HPP
#define MAIC_PROPENSITY_HPP

#include <cmath>
#include <string>

#include "maic/data_model.hpp"
#include "maic/error.hpp"

namespace maic {

struct LogisticSettings {
  double score_tol = 1e-10;      ///< on ||X'(t - p)||_inf
  int max_iter = 100;
  double coef_limit = 50.0;      ///< max |beta| beyond this is separation
  double boundary_eps = 1e-10;
};

struct LogisticFit {
  Vector coef;
  Vector fitted;                 ///< expit(X coef)
  bool converged = false;
  int iterations = 0;
  double score_norm = 0.0;
};

inline double expit(double eta) noexcept {
  return eta >= 0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

/// Maximum-likelihood logistic regression by Newton-Raphson (IRLS) from
/// coef = 0, with step halving on likelihood decrease. `design` should
/// already contain an intercept column if one is wanted.
inline LogisticFit fit_logistic(const Matrix& design, const Eigen::VectorXi& t,
                                const LogisticSettings& opts = {}) {
  const auto n = design.rows();
  const auto q = design.cols();
  if (t.size() != n) throw ValidationError("design and response lengths differ");
  if (n < q) throw RankDeficient("fewer subjects than logistic coefficients");
  {
    Eigen::ColPivHouseholderQR<Matrix> qr(design);
    if (qr.rank() < q) throw RankDeficient("propensity design matrix is rank deficient");
  }
  const Vector tv = t.cast<double>();

  Vector coef = Vector::Zero(q);
  Vector eta(n), p(n), score(q), delta(q), trial(q);
  auto loglik = [&](const Vector& b) {
    eta.noalias() = design * b;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      // log(1 + exp(eta)) without overflow
      const double e = eta[i];
      const double softplus = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
      ll += tv[i] * e - softplus;
    }
    return ll;
  };
  auto update_fitted = [&](const Vector& b) {
    eta.noalias() = design * b;
    for (Eigen::Index i = 0; i < n; ++i) p[i] = expit(eta[i]);
    score.noalias() = design.transpose() * (tv - p);
  };

  update_fitted(coef);
  double ll = loglik(coef);
  int iter = 0;
  for (; iter < opts.max_iter; ++iter) {
    if (score.lpNorm<Eigen::Infinity>() <= opts.score_tol) break;
    const Vector w = (p.array() * (1.0 - p.array())).matrix();
    const Matrix info = design.transpose() * w.asDiagonal() * design;
    Eigen::LDLT<Matrix> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      throw PerfectSeparation("logistic information matrix became singular");
    }
    delta = ldlt.solve(score);
    double step = 1.0;
    double ll_new = ll;
    for (int half = 0; half < 30; ++half) {
      trial = coef + step * delta;
      ll_new = loglik(trial);
      if (std::isfinite(ll_new) && ll_new >= ll - 1e-12 * std::abs(ll)) break;
      step *= 0.5;
    }
    coef = trial;
    ll = ll_new;
    if (coef.lpNorm<Eigen::Infinity>() > opts.coef_limit) {
      throw PerfectSeparation("logistic coefficients diverge (max |beta| > " +
                              std::to_string(opts.coef_limit) + ")");
    }
    update_fitted(coef);
  }

  LogisticFit fit{coef, p, false, iter, score.lpNorm<Eigen::Infinity>()};
  // separation by fitted probabilities: one arm entirely pinned to its label
  bool arm1_pinned = true, arm0_pinned = true;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (t[i] == 1 && p[i] < 1.0 - opts.boundary_eps) arm1_pinned = false;
    if (t[i] == 0 && p[i] > opts.boundary_eps) arm0_pinned = false;
  }
  if (arm1_pinned || arm0_pinned) {
    throw PerfectSeparation("fitted propensities reach 0/1 for an entire arm");
  }
  if (fit.score_norm > opts.score_tol) {
    throw NonConvergence("logistic regression did not converge in " +
                         std::to_string(opts.max_iter) + " iterations");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(p[i] > 0.0 && p[i] < 1.0)) throw PerfectSeparation("fitted propensity at 0 or 1");
  }
  fit.converged = true;
  return fit;
}

struct PropensityFit {
  double beta0 = 0.0;
  Vector beta1;
  Vector propensity_scores;      ///< each strictly inside (0, 1)
  bool converged = false;
  int iterations = 0;
};

/// Design matrix [1 | x].
inline Matrix propensity_design(const Matrix& covariates) {
  Matrix design(covariates.rows(), covariates.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(covariates.cols()) = covariates;
  return design;
}

/// Logistic regression of treatment on every covariate as a main effect.
inline PropensityFit fit_propensity(const Matrix& covariates, const Eigen::VectorXi& treatment,
                                    const LogisticSettings& opts = {}) {
  const auto fit = fit_logistic(propensity_design(covariates), treatment, opts);
  return {fit.coef[0], fit.coef.tail(covariates.cols()), fit.fitted, fit.converged, fit.iterations};
}

inline PropensityFit fit_propensity(const IndexPatientData& ipd, const LogisticSettings& opts = {}) {
  return fit_propensity(ipd.covariates(), ipd.treatment(), opts);
}

/// 1/e_i for treated subjects, 1/(1 - e_i) for controls.
inline Vector ipt_weights(const Vector& propensity_scores, const Eigen::VectorXi& treatment) {
  if (propensity_scores.size() != treatment.size()) {
    throw ValidationError("propensity and treatment lengths differ");
  }
  Vector w(treatment.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    w[i] = treatment[i] == 1 ? 1.0 / propensity_scores[i] : 1.0 / (1.0 - propensity_scores[i]);
  }
  return w;
}

inline Vector ipt_weights(const PropensityFit& fit, const Eigen::VectorXi& treatment) {
  return ipt_weights(fit.propensity_scores, treatment);
}

/// omega_i = t_i w_i / e_i + (1 - t_i) w_i / (1 - e_i).
inline WeightVector combine_weights(const WeightVector& trial_weights, const Vector& propensity_scores,
                                    const Eigen::VectorXi& treatment) {
  if (trial_weights.size() != treatment.size()) {
    throw ValidationError("trial weights and treatment lengths differ");
  }
  return WeightVector(trial_weights.values().cwiseProduct(ipt_weights(propensity_scores, treatment)),
                      WeightKind::Combined);
}

inline WeightVector combine_weights(const WeightVector& trial_weights, const PropensityFit& fit,
                                    const Eigen::VectorXi& treatment) {
  return combine_weights(trial_weights, fit.propensity_scores, treatment);
}

}  // namespace maic

#endif  // MAIC_PROPENSITY_HPP
