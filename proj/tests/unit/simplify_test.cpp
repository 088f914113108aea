#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "mapid/expr.hpp"
#include "mapid/maps.hpp"
#include "mapid/rng.hpp"
#include "mapid/simplify.hpp"

using namespace mapid;

namespace {

Dataset logistic_pairs(std::size_t pairs, double sigma, std::uint64_t seed) {
  Dataset ds = make_trajectory_dataset(MapSpec::logistic(), {0.5}, pairs);
  return add_noise(ds, NoiseConfig{sigma, seed});
}

}  // namespace

TEST_CASE("threshold ladder") {
  const std::vector<double> ts = aic_thresholds();
  REQUIRE(ts.size() == 11);
  CHECK(ts.front() == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(ts.back() == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t i = 1; i < ts.size(); ++i)
    CHECK(ts[i] / ts[i - 1] == doctest::Approx(std::pow(10.0, 0.2)).epsilon(1e-12));
}

TEST_CASE("snap prunes small terms and rationalizes constants") {
  const Expr e = parse("3.874*x0 - 3.8735*|x0|^2.0094 + 0.003*sin(x0)");
  const Expr s = snap(e, 0.01);
  CHECK(format(s).find("sin") == std::string::npos);
  REQUIRE(s.kind() == Expr::Kind::Sum);
  REQUIRE(s.kids().size() == 2);
  CHECK(s.kids()[0].kids()[0].value() == 27.0 / 7.0);
  CHECK(s.kids()[1].kids()[0].value() == -27.0 / 7.0);
  CHECK(s.kids()[1].kids()[1].exponent() == 2.0);

  CHECK(snap(parse("0.334*x0"), 0.01).kids()[0].value() == 1.0 / 3.0);
}

TEST_CASE("snap leaves non-rationalizable constants alone at tiny thresholds") {
  const Expr e = parse("3.874*x0 - 3.8735*|x0|^2.0094");
  CHECK(structural_equal(snap(e, 1e-9), e));
}

TEST_CASE("snap rejects non-positive thresholds") {
  CHECK_THROWS_AS(snap(parse("x0"), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(snap(parse("x0"), -0.1), std::invalid_argument);
}

TEST_CASE("snap never adds constants") {
  const std::vector<std::string> texts = {
      "3.874*x0 - 3.8735*|x0|^2.0094 + 0.003*sin(x0)",
      "0.97*x0 + 0.21*exp(-3.1*|x0|^2) - 0.15",
      "1.004*sign(x0)*|x0|^0.52 - 0.0007",
  };
  for (const std::string& text : texts) {
    const Expr e = parse(text);
    const std::size_t before = count_constants(e);
    for (double t : aic_thresholds()) CHECK(count_constants(snap(e, t)) <= before);
  }
}

TEST_CASE("rss fixtures") {
  const MapSpec map = MapSpec::custom({parse("3.9*x0 - 3.9*|x0|^2")});
  const Dataset ds = make_trajectory_dataset(map, {0.5}, 100);
  CHECK(residual_sum_squares({parse("3.9*x0 - 3.9*|x0|^2")}, ds) == 0.0);

  double expect = 0.0;
  for (const StateVec& y : ds.targets) expect += y[0] * y[0];
  CHECK(residual_sum_squares({Expr::constant(0.0)}, ds) == expect);

  CHECK_THROWS_AS(residual_sum_squares({parse("x0"), parse("x1")}, ds),
                  std::invalid_argument);
}

TEST_CASE("aic scores") {
  const MapSpec map = MapSpec::custom({parse("3.9*x0 - 3.9*|x0|^2")});
  const Dataset clean = make_trajectory_dataset(map, {0.5}, 100);
  const AicScore exact = aic({parse("3.9*x0 - 3.9*|x0|^2")}, clean);
  CHECK(exact.rss == 0.0);
  CHECK(std::isinf(exact.aic));
  CHECK(exact.aic < 0.0);
  CHECK(exact.k == 4);

  const Dataset noisy = logistic_pairs(300, 0.01, 5);
  const AicScore good = aic({parse("3.9*x0 - 3.9*|x0|^2")}, noisy);
  const AicScore worse = aic({parse("3.5*x0 - 3.5*|x0|^2")}, noisy);
  CHECK(good.k == worse.k);
  CHECK(good.rss < worse.rss);
  CHECK(good.aic < worse.aic);
  const double M = static_cast<double>(noisy.size());
  CHECK(good.aic == doctest::Approx(2.0 * 4.0 + M * std::log(good.rss / M)).epsilon(1e-12));

  const AicScore failed = aic({parse("1/|x0|")}, [] {
    Dataset d;
    d.inputs = {{0.0}, {0.5}};
    d.targets = {{1.0}, {2.0}};
    return d;
  }());
  CHECK(std::isinf(failed.aic));
  CHECK(failed.aic > 0.0);
}

TEST_CASE("select ties resolve to the coarsest threshold") {
  const MapSpec map = MapSpec::custom({parse("2*x0 - 2*|x0|^2")});
  const Dataset ds = sample_linspace(map, 0.0, 1.0, 50);
  const SimplificationResult sr = select({parse("2*x0 - 2*|x0|^2")}, ds);
  REQUIRE(sr.candidates.size() == 11);
  CHECK(sr.chosen == 10);
  for (const ThresholdCandidate& c : sr.candidates) {
    CHECK(structural_equal(c.expr[0], parse("2*x0 - 2*|x0|^2")));
    CHECK(c.rss == 0.0);
    CHECK(c.k == 3);
  }
}

TEST_CASE("select of a constant-zero expression") {
  const Dataset ds = logistic_pairs(50, 0.0, 0);
  const SimplificationResult sr = select({Expr::constant(0.0)}, ds);
  CHECK(sr.chosen == 10);
  for (const ThresholdCandidate& c : sr.candidates) {
    CHECK(c.expr[0].is_const(0.0));
    CHECK(c.k == 0);
  }
}

TEST_CASE("select picks the AIC argmin") {
  const Dataset ds = logistic_pairs(400, 0.01, 9);
  const std::vector<std::string> texts = {
      "3.91*x0 - 3.88*|x0|^2.01 + 0.004*sin(x0)",
      "0.97*x0 + 0.21*exp(-3.1*|x0|^2) - 0.15",
      "2.2*x0 - 1.9*|x0|^1.8 + 0.009*|x0|^3",
  };
  for (const std::string& text : texts) {
    const SimplificationResult sr = select({parse(text)}, ds);
    REQUIRE(sr.candidates.size() == 11);
    std::size_t best = 0;
    for (std::size_t i = 0; i < sr.candidates.size(); ++i) {
      const AicScore again = aic(sr.candidates[i].expr, ds);
      CHECK(again.aic == sr.candidates[i].aic);
      CHECK(again.rss == sr.candidates[i].rss);
      if (sr.candidates[i].aic <= sr.candidates[best].aic) best = i;
    }
    CHECK(sr.chosen == best);
  }
}

TEST_CASE("expand_squares distributes even powers of sums") {
  const Expr sq = expand_squares(ExprSystem{parse("|x0 + x1|^2")})[0];
  REQUIRE(sq.kind() == Expr::Kind::Sum);
  CHECK(sq.kids().size() == 3);

  const Expr quart = expand_squares(ExprSystem{parse("|x0 + x1|^4")})[0];
  REQUIRE(quart.kind() == Expr::Kind::Sum);
  CHECK(quart.kids().size() == 5);

  Rng rng(31);
  for (int i = 0; i < 100; ++i) {
    const StateVec x = {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
    CHECK(evaluate(sq, x) ==
          doctest::Approx(evaluate(parse("|x0 + x1|^2"), x)).epsilon(1e-12));
    CHECK(evaluate(quart, x) ==
          doctest::Approx(evaluate(parse("|x0 + x1|^4"), x)).epsilon(1e-12));
  }

  const Expr odd = parse("|x0 + x1|^3");
  CHECK(structural_equal(expand_squares(ExprSystem{odd})[0], odd));
  const Expr plain = parse("|x0|^2");
  CHECK(structural_equal(expand_squares(ExprSystem{plain})[0], plain));
}

TEST_CASE("ols fits a line through a single-term model") {
  const MapSpec map = MapSpec::custom({parse("2*x0")});
  const Dataset ds = sample_linspace(map, -1.0, 1.0, 50);
  const RefinedModel out = ols_refine(ExprSystem{parse("0.5*x0")}, ds);
  CHECK(!out.condition_flag);
  REQUIRE(out.coefficients.size() == 1);
  REQUIRE(out.coefficients[0].size() == 2);
  CHECK(out.coefficients[0][0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(std::fabs(out.coefficients[0][1]) < 1e-9);
  CHECK(out.rss_before > 1.0);
  CHECK(out.rss_after < 1e-15);
}

TEST_CASE("ols improves a mistuned logistic model") {
  const Dataset ds = logistic_pairs(300, 0.0, 0);
  const RefinedModel out = ols_refine(ExprSystem{parse("3.7*x0 - 3.7*|x0|^2.02")}, ds);
  CHECK(!out.condition_flag);
  CHECK(out.rss_after < out.rss_before);
  CHECK(out.coefficients[0][0] == doctest::Approx(3.9).epsilon(0.05));
  CHECK(out.coefficients[0][1] == doctest::Approx(-3.9).epsilon(0.05));
}

TEST_CASE("ols keeps incumbents on a singular design") {
  const MapSpec map = MapSpec::custom({parse("x0")});
  const Dataset ds = sample_linspace(map, 0.2, 0.8, 25);
  const Expr e = parse("x0 + sign(x0)*|x0|");
  const RefinedModel out = ols_refine(ExprSystem{e}, ds);
  CHECK(out.condition_flag);
  REQUIRE(out.coefficients[0].size() == 2);
  CHECK(out.coefficients[0][0] == 1.0);
  CHECK(out.coefficients[0][1] == 1.0);
  CHECK(structural_equal(out.expr[0], e));
  CHECK(out.rss_after == out.rss_before);
}

TEST_CASE("ols never worsens the fit when the design is sound") {
  const Dataset ds = logistic_pairs(200, 0.05, 3);
  const std::vector<std::string> texts = {
      "3.9*x0 - 3.9*|x0|^2",
      "x0 + 0.1*sin(x0)",
      "0.5*exp(-2*|x0|^2) - 0.2 + 0.3*x0",
  };
  for (const std::string& text : texts) {
    const RefinedModel out = ols_refine(ExprSystem{parse(text)}, ds);
    if (!out.condition_flag) CHECK(out.rss_after <= out.rss_before + 1e-9);
  }
}
