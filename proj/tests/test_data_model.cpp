#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace maic;
using Catch::Matchers::ContainsSubstring;

namespace {

const char* kMinimalIpd =
    "treatment,outcome,x1\n"
    "1,3.0,0\n"
    "0,5.0,1\n";

}  // namespace

TEST_CASE("minimal IPD parses", "[data_model]") {
  const auto ipd = parse_ipd_csv(kMinimalIpd);
  REQUIRE(ipd.n() == 2);
  REQUIRE(ipd.k() == 1);
  CHECK(ipd.treatment()[0] == 1);
  CHECK(ipd.outcome()[1] == 5.0);
  CHECK(ipd.covariates()(1, 0) == 1.0);
  CHECK(ipd.covariate_names() == std::vector<std::string>{"x1"});
}

TEST_CASE("IPD parser rejects malformed input", "[data_model]") {
  SECTION("blank outcome names the row and column") {
    const auto text = "treatment,outcome,x1\n1,3.0,0\n0,,1\n";
    REQUIRE_THROWS_WITH(parse_ipd_csv(text),
                        ContainsSubstring("row 2") && ContainsSubstring("outcome") &&
                            ContainsSubstring("missing"));
  }
  SECTION("non-numeric covariate") {
    const auto text = "treatment,outcome,x1\n1,3.0,abc\n0,5,1\n";
    REQUIRE_THROWS_WITH(parse_ipd_csv(text), ContainsSubstring("non-numeric"));
  }
  SECTION("single arm") {
    const auto text = "treatment,outcome,x1\n1,3.0,0\n1,5.0,1\n";
    REQUIRE_THROWS_WITH(parse_ipd_csv(text), ContainsSubstring("comparator arm empty"));
  }
  SECTION("treatment outside {0, 1}") {
    const auto text = "treatment,outcome,x1\n2,3.0,0\n0,5.0,1\n";
    REQUIRE_THROWS_AS(parse_ipd_csv(text), ValidationError);
  }
  SECTION("missing outcome column") {
    const auto text = "treatment,x1\n1,0\n0,1\n";
    REQUIRE_THROWS_AS(parse_ipd_csv(text), ValidationError);
  }
  SECTION("unknown effect modifier") {
    REQUIRE_THROWS_AS(parse_ipd_csv(kMinimalIpd, {"age"}), ValidationError);
  }
}

TEST_CASE("ALD JSON validation", "[data_model]") {
  using nlohmann::ordered_json;
  const auto good = ordered_json::parse(
      R"({"covariate_means": {"x1": 0.75}, "effect_estimate": -0.2, "effect_variance": 0.04})");
  const auto ald = ald_from_json(good);
  CHECK(ald.effect_estimate() == -0.2);
  CHECK(ald.effect_variance() == 0.04);
  CHECK(ald.mean_for("x1") == 0.75);
  CHECK_FALSE(ald.mean_for("x2").has_value());

  auto negative = good;
  negative["effect_variance"] = -1.0;
  CHECK_THROWS_AS(ald_from_json(negative), ValidationError);

  auto missing = good;
  missing.erase("effect_estimate");
  CHECK_THROWS_AS(ald_from_json(missing), ValidationError);

  const auto back = ald_from_json(ald_to_json(ald));
  CHECK(back.effect_estimate() == ald.effect_estimate());
  CHECK(back.covariate_means() == ald.covariate_means());
}

TEST_CASE("covariate centering", "[data_model]") {
  const auto ipd = parse_ipd_csv(kMinimalIpd);
  const auto ald = AggregateSummary::create({"x1"}, Vector::Constant(1, 0.75), -0.2, 0.04);
  const Matrix z = center_covariates(ipd, ald);
  CHECK(z(0, 0) == -0.75);
  CHECK(z(1, 0) == 0.25);

  SECTION("three covariates, subject at the target") {
    Matrix x = Matrix::Constant(2, 3, 0.6);
    x.row(1).setConstant(0.2);
    Eigen::VectorXi t(2);
    t << 1, 0;
    const auto d = IndexPatientData::create(x, t, Vector::Zero(2), {0, 1, 2});
    const auto s = AggregateSummary::create({"x1", "x2", "x3"}, Vector::Constant(3, 0.6), 0, 0);
    const Matrix zs = center_covariates(d, s);
    CHECK(zs.row(0).isZero(0.0));
  }

  SECTION("unmatched effect modifier") {
    const auto other = AggregateSummary::create({"age"}, Vector::Constant(1, 50.0), 0, 0);
    REQUIRE_THROWS_WITH(center_covariates(ipd, other), ContainsSubstring("x1"));
  }
}

TEST_CASE("centering plus target recovers the raw effect modifiers", "[data_model][property]") {
  CounterRng rng(derive_key(101, {}));
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(60));
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.below(4));
    Matrix x(n, k);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    Eigen::VectorXi t = Eigen::VectorXi::Zero(n);
    t[0] = 1;
    IndexVector em(static_cast<std::size_t>(k));
    std::iota(em.begin(), em.end(), std::size_t{0});
    const auto ipd = IndexPatientData::create(x, t, Vector::Zero(n), em);
    Vector theta(k);
    for (Eigen::Index j = 0; j < k; ++j) theta[j] = rng.normal();
    const auto s = AggregateSummary::create(ipd.covariate_names(), theta, 0, 0);
    const Matrix back = center_covariates(ipd, s).rowwise() + theta.transpose();
    CHECK((back - x).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("IPD CSV round trip is exact", "[data_model][property]") {
  CounterRng rng(derive_key(202, {}));
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(40));
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.below(3));
    Matrix x(n, k);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal() * 1e3;
    Eigen::VectorXi t(n);
    for (Eigen::Index i = 0; i < n; ++i) t[i] = static_cast<int>(i % 2);
    Vector y(n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = rng.normal() / 7.0;
    IndexVector em(static_cast<std::size_t>(k));
    std::iota(em.begin(), em.end(), std::size_t{0});
    const auto ipd = IndexPatientData::create(x, t, y, em);
    const auto back = parse_ipd_csv(write_ipd_csv(ipd));
    REQUIRE(back.covariates() == ipd.covariates());
    REQUIRE(back.outcome() == ipd.outcome());
    REQUIRE(back.treatment() == ipd.treatment());
  }
}

TEST_CASE("subset keeps repeats and rejects empty arms", "[data_model]") {
  const auto ipd = parse_ipd_csv(kMinimalIpd);
  const std::size_t rows[] = {0, 0, 1};
  const auto s = ipd.subset(rows);
  CHECK(s.n() == 3);
  CHECK(s.treatment().sum() == 2);
  const std::size_t only_treated[] = {0, 0};
  CHECK_THROWS_AS(ipd.subset(only_treated), ValidationError);
}

TEST_CASE("weight vectors must be strictly positive", "[data_model]") {
  CHECK_THROWS_AS(WeightVector(Vector::Zero(3), WeightKind::TrialOdds), ValidationError);
  CHECK_THROWS_AS(WeightVector(Vector(), WeightKind::TrialOdds), ValidationError);
  CHECK(truncated_kind(WeightKind::Combined) == WeightKind::TruncatedCombined);
}

TEST_CASE("number formatting round-trips", "[io]") {
  for (double v : {0.1, -2.0, 1e-300, 123456.789, 1.0 / 3.0}) {
    CHECK(io::parse_double(io::format_double(v)) == v);
  }
  CHECK_FALSE(io::parse_double("1.5x").has_value());
  CHECK_FALSE(io::parse_double("nan").has_value());
  CHECK(io::split_csv_line("a,\"b,c\",d") == std::vector<std::string>{"a", "b,c", "d"});
}
