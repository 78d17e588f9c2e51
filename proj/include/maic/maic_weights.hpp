/**
 * maic_weights.hpp
 *
 * Method-of-moments estimation of trial-assignment odds weights.
 *
 * With effect modifiers centred on the competitor means, z*_i = z_i - theta_z,
 * the weights are w_i = exp(z*_i . alpha1) where alpha1 minimises the convex
 * objective Q(alpha1) = sum_i exp(z*_i . alpha1). The stationarity condition
 * sum_i w_i z*_i = 0 is exactly balance of the weighted effect-modifier means
 * against theta_z. The intercept of the odds model is not identified and is
 * not estimated; weights are relative.
 */

#ifndef MAIC_MAIC_WEIGHTS_HPP
#define MAIC_MAIC_WEIGHTS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "maic/data_model.hpp"
#include "maic/error.hpp"

namespace maic {

inline void require_same_width(const Vector& alpha1, const Matrix& z_star) {
  if (alpha1.size() != z_star.cols()) {
    throw ValidationError("alpha1 length does not match number of effect modifiers");
  }
}

/// Q(alpha1) = sum_i exp(z*_i . alpha1). Returns +inf on overflow.
inline double objective_q(const Vector& alpha1, const Matrix& z_star) {
  require_same_width(alpha1, z_star);
  const double q = (z_star * alpha1).array().exp().sum();
  return std::isfinite(q) ? q : std::numeric_limits<double>::infinity();
}

/// grad Q(alpha1) = sum_i exp(z*_i . alpha1) z*_i.
inline Vector gradient_q(const Vector& alpha1, const Matrix& z_star) {
  require_same_width(alpha1, z_star);
  const Vector w = (z_star * alpha1).array().exp().matrix();
  return z_star.transpose() * w;
}

enum class SeparationDirection { None, AllAboveTarget, AllBelowTarget };

struct ColumnFeasibility {
  bool feasible = true;
  SeparationDirection direction = SeparationDirection::None;
};

struct FeasibilityReport {
  std::vector<ColumnFeasibility> columns;

  bool feasible() const {
    return std::all_of(columns.begin(), columns.end(), [](const auto& c) { return c.feasible; });
  }

  /// One line per infeasible column, e.g. "x2: all values below target".
  std::string describe(const std::vector<std::string>& names = {}) const {
    std::ostringstream os;
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (columns[j].feasible) continue;
      os << (j < names.size() ? names[j] : "column " + std::to_string(j + 1)) << ": "
         << (columns[j].direction == SeparationDirection::AllBelowTarget
                 ? "all values below target"
                 : "all values above target")
         << "\n";
    }
    return os.str();
  }
};

/// A column is infeasible iff every centred value has the same strict sign.
inline FeasibilityReport check_feasibility(const Matrix& z_star) {
  FeasibilityReport report;
  report.columns.resize(static_cast<std::size_t>(z_star.cols()));
  for (Eigen::Index j = 0; j < z_star.cols(); ++j) {
    const auto col = z_star.col(j);
    auto& c = report.columns[static_cast<std::size_t>(j)];
    if ((col.array() > 0.0).all()) {
      c = {false, SeparationDirection::AllAboveTarget};
    } else if ((col.array() < 0.0).all()) {
      c = {false, SeparationDirection::AllBelowTarget};
    }
  }
  return report;
}

/// Kish effective sample size (sum w)^2 / sum w^2.
inline double ess(const Vector& w) {
  const double s = w.sum();
  return s * s / w.squaredNorm();
}

inline double ess(const WeightVector& w) { return ess(w.values()); }

/// Empirical percentile with linear interpolation between order statistics:
/// h = (n-1) * percentile / 100 + 1 (1-based position).
inline double interpolated_percentile(const Vector& values, double percentile) {
  if (!(percentile > 0.0 && percentile <= 100.0)) {
    throw ValidationError("percentile must lie in (0, 100]");
  }
  std::vector<double> sorted(values.data(), values.data() + values.size());
  std::sort(sorted.begin(), sorted.end());
  const auto n = sorted.size();
  const double h = static_cast<double>(n - 1) * percentile / 100.0 + 1.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo >= n) return sorted[n - 1];
  return sorted[lo - 1] + (h - static_cast<double>(lo)) * (sorted[lo] - sorted[lo - 1]);
}

/// Cap every weight above the percentile cutoff at the cutoff.
inline WeightVector truncate_weights(const WeightVector& weights, double percentile) {
  const double cutoff = interpolated_percentile(weights.values(), percentile);
  return WeightVector(weights.values().cwiseMin(cutoff), truncated_kind(weights.kind()));
}

struct OptimizerSettings {
  double grad_tol = 1e-10;      ///< on ||grad Q||_inf
  int max_iter = 500;
  double alpha_limit = 1e4;     ///< ||alpha1||_inf beyond this is treated as divergence
  Vector start;                 ///< empty means alpha1 = 0
};

struct TrialWeightFit {
  Vector alpha1;
  WeightVector weights;
  bool converged = false;
  int iterations = 0;
  /// ||grad Q||_inf / max(1, Q) at alpha1; for a converged fit this bounds the
  /// weighted mean imbalance of every effect modifier.
  double final_gradient_norm = 0.0;
  double ess = 0.0;
};

namespace detail {

inline constexpr double kEps = std::numeric_limits<double>::epsilon();

struct QEval {
  double q = 0.0;
  Vector grad;
};

inline bool evaluate_q(const Matrix& z_star, const Vector& alpha, QEval& out, Vector& scratch) {
  scratch.noalias() = z_star * alpha;
  scratch = scratch.array().exp().matrix();
  out.q = scratch.sum();
  if (!std::isfinite(out.q)) return false;
  out.grad.noalias() = z_star.transpose() * scratch;
  return out.grad.allFinite();
}

inline double gradient_norm(const QEval& e) { return e.grad.lpNorm<Eigen::Infinity>(); }

inline double scaled_gradient_norm(const QEval& e) { return gradient_norm(e) / std::max(1.0, e.q); }

}  // namespace detail

/// Weights exp(z*_i . alpha1), shifted by the largest exponent when needed to
/// avoid overflow (the shift is a common rescaling and changes nothing).
inline Vector odds_weights(const Matrix& z_star, const Vector& alpha1) {
  Vector eta = z_star * alpha1;
  const double m = eta.maxCoeff();
  if (m > 700.0) eta.array() -= m;
  return eta.array().exp().matrix();
}

/// Quasi-Newton (BFGS) minimisation of Q from centred effect modifiers.
///
/// Throws InfeasibleBalance when a column is separated, when Q drops below 1
/// (impossible at a balancing solution, where max_i w_i >= 1) or when alpha1
/// leaves the box ||alpha1||_inf <= alpha_limit. Throws NonConvergence when
/// max_iter is exhausted.
inline TrialWeightFit fit_trial_weights(const Matrix& z_star, const OptimizerSettings& opts = {}) {
  if (z_star.rows() < 1 || z_star.cols() < 1) throw ValidationError("empty centred covariate matrix");
  if (!z_star.allFinite()) throw ValidationError("non-finite centred covariate");
  const auto report = check_feasibility(z_star);
  if (!report.feasible()) {
    throw InfeasibleBalance("no balancing weights exist:\n" + report.describe());
  }

  const auto p = z_star.cols();
  Vector alpha = opts.start.size() == 0 ? Vector::Zero(p) : opts.start;
  require_same_width(alpha, z_star);

  Vector scratch(z_star.rows());
  detail::QEval cur, next;
  if (!detail::evaluate_q(z_star, alpha, cur, scratch)) {
    throw ValidationError("objective is not finite at the start point");
  }

  Matrix h_inv = Matrix::Identity(p, p);
  bool scaled = false;
  int iter = 0;
  auto finish = [&](bool converged) {
    TrialWeightFit fit{alpha, WeightVector(odds_weights(z_star, alpha), WeightKind::TrialOdds),
                       converged, iter, detail::gradient_norm(cur), 0.0};
    fit.ess = ess(fit.weights);
    return fit;
  };

  Vector direction(p), step(p), y(p), alpha_next(p);
  for (; iter < opts.max_iter; ++iter) {
    if (detail::gradient_norm(cur) <= opts.grad_tol) return finish(true);

    direction.noalias() = -h_inv * cur.grad;
    if (!scaled) {
      // first step: unit length along steepest descent
      direction /= std::max(1.0, direction.norm());
    }
    double slope = cur.grad.dot(direction);
    if (!(slope < 0.0)) {
      h_inv.setIdentity();
      direction = -cur.grad / std::max(1.0, cur.grad.norm());
      slope = cur.grad.dot(direction);
    }

    // backtracking Armijo search; non-finite trial points are rejected
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      alpha_next = alpha + t * direction;
      if (detail::evaluate_q(z_star, alpha_next, next, scratch)) {
        // Armijo; once Q differences fall below rounding, a smaller gradient
        // is the only usable signal of progress
        const bool armijo = next.q <= cur.q + 1e-4 * t * slope;
        const bool flat = std::abs(next.q - cur.q) <= 64.0 * detail::kEps * cur.q &&
                          next.grad.lpNorm<Eigen::Infinity>() < cur.grad.lpNorm<Eigen::Infinity>();
        if (armijo || flat) {
          accepted = true;
          break;
        }
      }
      t *= 0.5;
    }
    if (!accepted) {
      // numerical floor: accept the current point if it is balanced to the
      // tolerance, otherwise the problem is not making progress
      if (detail::scaled_gradient_norm(cur) <= opts.grad_tol) return finish(true);
      if (scaled) {
        h_inv.setIdentity();
        scaled = false;
        continue;
      }
      throw NonConvergence("trial-weight line search failed to decrease the objective");
    }

    step = alpha_next - alpha;
    y = next.grad - cur.grad;
    alpha.swap(alpha_next);
    std::swap(cur, next);

    if (cur.q < 1.0 || alpha.lpNorm<Eigen::Infinity>() > opts.alpha_limit) {
      throw InfeasibleBalance(
          "trial-weight objective diverges: effect-modifier targets lie outside the "
          "index trial's covariate hull");
    }

    const double sy = step.dot(y);
    if (sy > 1e-300) {
      if (!scaled) {
        h_inv = Matrix::Identity(p, p) * (sy / y.squaredNorm());
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Vector hy = h_inv * y;
      const double yhy = y.dot(hy);
      h_inv += ((1.0 + rho * yhy) * rho) * (step * step.transpose()) -
               rho * (hy * step.transpose() + step * hy.transpose());
    }
  }
  if (detail::gradient_norm(cur) <= opts.grad_tol) return finish(true);
  throw NonConvergence("trial-weight optimiser reached " + std::to_string(opts.max_iter) +
                       " iterations without meeting the gradient tolerance");
}

inline TrialWeightFit fit_trial_weights(const IndexPatientData& ipd, const AggregateSummary& summary,
                                        const OptimizerSettings& opts = {}) {
  return fit_trial_weights(center_covariates(ipd, summary), opts);
}

/// max_j |sum_i w_i z*_ij / sum_i w_i|.
inline double max_weighted_imbalance(const Matrix& z_star, const Vector& w) {
  return ((z_star.transpose() * w) / w.sum()).lpNorm<Eigen::Infinity>();
}

}  // namespace maic

#endif  // MAIC_MAIC_WEIGHTS_HPP
