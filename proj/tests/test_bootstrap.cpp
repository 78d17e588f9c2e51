#include <catch2/catch_amalgamated.hpp>

#include <numeric>

#include "test_support.hpp"

using namespace maic;
using Catch::Matchers::WithinAbs;

namespace {

ReplicateData small_dataset(int replicate = 0) {
  ScenarioConfig cfg;
  cfg.n_index = 60;
  cfg.n_competitor = 100;
  return generate_replicate_data(cfg, replicate);
}

}  // namespace

TEST_CASE("resample indices are deterministic and in range", "[bootstrap]") {
  const auto a = resample_indices(5, 3, 50);
  const auto b = resample_indices(5, 3, 50);
  const auto c = resample_indices(5, 4, 50);
  CHECK(a == b);
  CHECK(a != c);
  CHECK(std::all_of(a.begin(), a.end(), [](std::size_t i) { return i < 50; }));
}

TEST_CASE("replicate summary", "[bootstrap]") {
  const auto r = summarize_replicates({1.0, 2.0, 3.0, 4.0}, 5);
  CHECK(r.point == 2.5);
  CHECK_THAT(r.se, WithinAbs(std::sqrt(5.0 / 3.0), 1e-15));
  CHECK(r.n_failed == 1);
  CHECK(summarize_replicates({2.0, 2.0, 2.0}, 3).se == 0.0);
}

TEST_CASE("identity resample reproduces the plug-in estimate", "[bootstrap]") {
  const auto [ipd, ald] = small_dataset();
  const auto data = AnalysisData::from(ipd, ald);
  std::vector<std::size_t> identity(static_cast<std::size_t>(data.n()));
  std::iota(identity.begin(), identity.end(), std::size_t{0});
  const auto pts = estimate_methods(data.rows(identity), kAllMethods);
  for (Method m : kAllMethods) {
    const auto fit = fit_method(data, m);
    const double plug_in = weighted_outcome_regression(data.t, data.y, fit.final_weights.values());
    REQUIRE(pts[static_cast<std::size_t>(m)].delta_10.has_value());
    CHECK(*pts[static_cast<std::size_t>(m)].delta_10 == plug_in);
  }
}

TEST_CASE("bootstrap is identical across thread counts", "[bootstrap][property]") {
  const auto [ipd, ald] = small_dataset(1);
  const auto data = AnalysisData::from(ipd, ald);
  BootstrapSettings one{200, 77, 1, 0.05};
  BootstrapSettings many = one;
  many.threads = 4;
  const auto a = bootstrap_methods(data, kAllMethods, one);
  const auto b = bootstrap_methods(data, kAllMethods, many);
  for (std::size_t m = 0; m < 4; ++m) {
    CHECK(a[m].result.replicates == b[m].result.replicates);
    CHECK(a[m].result.point == b[m].result.point);
    CHECK(a[m].result.se == b[m].result.se);
    CHECK(a[m].result.se > 0.0);
  }
}

TEST_CASE("constant outcome has zero bootstrap spread", "[bootstrap]") {
  auto [ipd, ald] = small_dataset(2);
  const auto flat = IndexPatientData::create(ipd.covariates(), ipd.treatment(),
                                             Vector::Constant(ipd.n(), 1.25),
                                             ipd.effect_modifier_columns());
  for (Method m : kAllMethods) {
    const auto r = bootstrap_effect(flat, ald, m, {100, 3, 2, 0.05});
    CHECK(r.point == 0.0);
    CHECK(r.se == 0.0);
  }
}

TEST_CASE("excess resample failures raise TooManyFailures", "[bootstrap]") {
  // one subject above the target: most resamples cannot balance
  Matrix x(20, 1);
  for (int i = 0; i < 20; ++i) x(i, 0) = i == 0 ? 1.0 : -0.1 * (i + 1);
  Eigen::VectorXi t(20);
  for (int i = 0; i < 20; ++i) t[i] = i % 2;
  const auto ipd = IndexPatientData::create(x, t, Vector::LinSpaced(20, 0, 1), {0});
  const auto ald = AggregateSummary::create({"x1"}, Vector::Zero(1), 0.0, 0.1);
  CHECK_NOTHROW(fit_trial_weights(ipd, ald));
  CHECK_THROWS_AS(bootstrap_effect(ipd, ald, Method::MAIC, {200, 9, 1, 0.05}), TooManyFailures);
}
