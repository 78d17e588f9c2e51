#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "test_support.hpp"

using namespace maic;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Matrix column(std::initializer_list<double> v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

}  // namespace

TEST_CASE("objective and gradient on small inputs", "[weights]") {
  const Matrix z = column({-0.75, 0.25});
  const Vector zero = Vector::Zero(1);
  CHECK(objective_q(zero, z) == 2.0);
  CHECK_THAT(gradient_q(zero, z)[0], WithinAbs(-0.5, 1e-15));

  const Vector a = Vector::Constant(1, std::log(3.0));
  const double expected = std::pow(3.0, -0.75) + std::pow(3.0, 0.25);
  CHECK_THAT(objective_q(a, z), WithinRel(expected, 1e-14));
  CHECK_THAT(objective_q(a, z), WithinAbs(1.7548, 1e-4));
  CHECK_THAT(gradient_q(a, z)[0], WithinAbs(0.0, 1e-12));
  CHECK(objective_q(Vector(2.0 * a), z) > objective_q(a, z));

  const Matrix wide = column({0.3, -1.2, 0.4, 0.1, 2.0});
  CHECK(objective_q(zero, wide) == 5.0);
  CHECK_THAT(gradient_q(zero, wide)[0], WithinAbs(wide.sum(), 1e-15));
}

TEST_CASE("two-point fixture has the closed-form solution", "[weights][oracle]") {
  const Matrix z = column({-0.75, 0.25});
  const auto fit = fit_trial_weights(z);
  REQUIRE(fit.converged);
  CHECK_THAT(fit.alpha1[0], WithinAbs(std::log(3.0), 1e-8));
  CHECK_THAT(fit.weights[0], WithinAbs(std::pow(3.0, -0.75), 1e-8));
  CHECK_THAT(fit.weights[1], WithinAbs(std::pow(3.0, 0.25), 1e-8));
  CHECK_THAT(fit.ess, WithinAbs(1.6, 1e-8));
}

TEST_CASE("random two-point instances match the analytic root", "[weights][oracle]") {
  // With n_a subjects at a < 0 and n_b at b > 0 the balance equation
  //   n_a a e^{alpha a} + n_b b e^{alpha b} = 0
  // gives alpha = ln(-n_a a / (n_b b)) / (b - a).
  CounterRng rng(derive_key(7, {}));
  for (int rep = 0; rep < 100; ++rep) {
    const double a = -test::uniform(rng, 0.05, 2.0);
    const double b = test::uniform(rng, 0.05, 2.0);
    const int na = 1 + static_cast<int>(rng.below(20));
    const int nb = 1 + static_cast<int>(rng.below(20));
    Matrix z(na + nb, 1);
    z.topRows(na).setConstant(a);
    z.bottomRows(nb).setConstant(b);
    const double alpha = std::log(-na * a / (nb * b)) / (b - a);
    const auto fit = fit_trial_weights(z);
    CHECK_THAT(fit.alpha1[0], WithinAbs(alpha, 1e-8 * std::max(1.0, std::abs(alpha))));
  }
}

TEST_CASE("already balanced sample gives alpha zero and unit weights", "[weights]") {
  const Matrix z = column({-1.0, 1.0, -0.5, 0.5});
  const auto fit = fit_trial_weights(z);
  CHECK(fit.alpha1.cwiseAbs().maxCoeff() < 1e-12);
  CHECK((fit.weights.values().array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK_THAT(fit.ess, WithinAbs(4.0, 1e-12));
}

TEST_CASE("one-sided column is infeasible", "[weights]") {
  const Matrix below = column({-0.75, -0.25, -0.1});
  const auto report = check_feasibility(below);
  CHECK_FALSE(report.feasible());
  CHECK_THAT(report.describe({"x1"}), ContainsSubstring("x1") && ContainsSubstring("below"));
  CHECK_THROWS_AS(fit_trial_weights(below), InfeasibleBalance);

  const Matrix above = column({0.3, 0.1});
  CHECK_THROWS_AS(fit_trial_weights(above), InfeasibleBalance);

  CHECK(check_feasibility(column({-0.75, 0.25})).feasible());
  CHECK(check_feasibility(column({0.0, -0.2, -0.4})).feasible());
}

TEST_CASE("balance holds on random feasible instances", "[weights][property]") {
  CounterRng rng(derive_key(11, {}));
  for (int rep = 0; rep < 200; ++rep) {
    const Eigen::Index n = 10 + static_cast<Eigen::Index>(rng.below(291));
    const Eigen::Index p = 1 + static_cast<Eigen::Index>(rng.below(3));
    const Matrix z = test::feasible_z_star(rng, n, p);
    const auto fit = fit_trial_weights(z);
    REQUIRE(fit.converged);
    const Vector& w = fit.weights.values();
    // weighted mean of z* is zero, so weighted mean of z equals the target
    CHECK(max_weighted_imbalance(z, w) < 1e-8);
    CHECK((w.array() > 0.0).all());
    const Vector g = gradient_q(fit.alpha1, z);
    CHECK(g.cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(objective_q(fit.alpha1, z) <= static_cast<double>(n));
  }
}

TEST_CASE("gradient agrees with central differences", "[weights][property]") {
  CounterRng rng(derive_key(13, {}));
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index n = 5 + static_cast<Eigen::Index>(rng.below(100));
    const Eigen::Index p = 1 + static_cast<Eigen::Index>(rng.below(3));
    const Matrix z = test::feasible_z_star(rng, n, p);
    Vector a(p);
    for (Eigen::Index j = 0; j < p; ++j) a[j] = rng.normal();
    const Vector g = gradient_q(a, z);
    Vector fd(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      const double h = 1e-5 * std::max(1.0, std::abs(a[j]));
      Vector up = a, dn = a;
      up[j] += h;
      dn[j] -= h;
      fd[j] = (objective_q(up, z) - objective_q(dn, z)) / (2.0 * h);
    }
    const double rel = (g - fd).norm() / std::max(g.norm(), 1e-3);
    CHECK(rel < 1e-6);
  }
}

TEST_CASE("Kish effective sample size", "[weights]") {
  CHECK_THAT(ess(Vector::Ones(7)), WithinAbs(7.0, 1e-12));
  Vector w(2);
  w << 2.0, 1.0;
  CHECK_THAT(ess(w), WithinAbs(1.8, 1e-12));

  CounterRng rng(derive_key(17, {}));
  for (int rep = 0; rep < 50; ++rep) {
    Vector v(20);
    for (auto& x : v) x = test::uniform(rng, 0.01, 5.0);
    const double c = test::uniform(rng, 0.001, 1000.0);
    CHECK_THAT(ess(Vector(c * v)), WithinRel(ess(v), 1e-12));
    CHECK(ess(v) <= 20.0 + 1e-12);
    CHECK(ess(v) >= 1.0 - 1e-12);
  }
}

TEST_CASE("percentile truncation", "[weights]") {
  Vector w(20);
  for (int i = 0; i < 20; ++i) w[i] = i + 1;
  CHECK_THAT(interpolated_percentile(w, 95.0), WithinAbs(19.05, 1e-12));
  const WeightVector wv(w, WeightKind::TrialOdds);
  const auto t = truncate_weights(wv, 95.0);
  CHECK(t.kind() == WeightKind::TruncatedTrialOdds);
  CHECK_THAT(t[19], WithinAbs(19.05, 1e-12));
  CHECK(t[18] == 19.0);

  const auto same = truncate_weights(wv, 100.0);
  CHECK(same.values() == w);

  CounterRng rng(derive_key(19, {}));
  for (int rep = 0; rep < 50; ++rep) {
    Vector v(1 + static_cast<Eigen::Index>(rng.below(100)));
    for (auto& x : v) x = std::exp(rng.normal());
    const WeightVector in(v, WeightKind::Combined);
    const double pct = test::uniform(rng, 1.0, 100.0);
    const auto out = truncate_weights(in, pct);
    CHECK((out.values().array() <= v.array()).all());
    CHECK((out.values().array() > 0.0).all());
    CHECK(out.values().maxCoeff() <= interpolated_percentile(v, pct) + 1e-15);
    const double spread_in = v.maxCoeff() / v.minCoeff();
    CHECK(out.values().maxCoeff() / out.values().minCoeff() <= spread_in);
    const auto lower = truncate_weights(in, pct / 2.0);
    CHECK((lower.values().array() <= out.values().array()).all());
  }
}
