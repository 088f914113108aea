#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "mapid/eval.hpp"
#include "mapid/expr.hpp"
#include "mapid/maps.hpp"

using namespace mapid;

namespace {

const char* kLogisticText = "3.9*x0 - 3.9*|x0|^2";

Dataset noisy_logistic(std::size_t pairs, double sigma, std::uint64_t seed) {
  return add_noise(make_trajectory_dataset(MapSpec::logistic(), {0.5}, pairs),
                   NoiseConfig{sigma, seed});
}

}  // namespace

TEST_CASE("rrmse of the exact form on clean data") {
  CHECK(rrmse(true_system(MapSpec::logistic()),
              make_trajectory_dataset(MapSpec::logistic(), {0.5}, 200)) < 1e-12);
  CHECK(rrmse(true_system(MapSpec::gaussian()),
              make_trajectory_dataset(MapSpec::gaussian(), {0.0}, 200)) < 1e-12);
  CHECK(rrmse(true_system(MapSpec::tinkerbell()),
              make_trajectory_dataset(MapSpec::tinkerbell(), {-0.5, -0.5}, 200)) < 1e-12);
}

TEST_CASE("rrmse of the zero predictor is exactly one") {
  const Dataset ds = noisy_logistic(150, 0.0, 0);
  CHECK(rrmse({Expr::constant(0.0)}, ds) == 1.0);
}

TEST_CASE("rrmse is scale invariant") {
  Dataset ds = noisy_logistic(150, 0.01, 4);
  const double base = rrmse({parse(kLogisticText)}, ds);
  for (StateVec& y : ds.targets) y[0] *= 2.0;
  const double scaled = rrmse({parse("7.8*x0 - 7.8*|x0|^2")}, ds);
  CHECK(scaled == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("rrmse matches the trajectory noise floor") {
  const Dataset low = noisy_logistic(1000, 0.01, 7);
  const double r_low = rrmse({parse(kLogisticText)}, low);
  CHECK(r_low == doctest::Approx(0.0233).epsilon(0.3));
  CHECK(std::fabs(r_low - true_rrmse(MapSpec::logistic(), low)) < 1e-12);

  const Dataset high = noisy_logistic(1000, 0.05, 7);
  CHECK(rrmse({parse(kLogisticText)}, high) == doctest::Approx(0.1202).epsilon(0.3));

  const Dataset tk = add_noise(
      make_trajectory_dataset(MapSpec::tinkerbell(), {-0.5, -0.5}, 1000),
      NoiseConfig{0.01, 7});
  CHECK(true_rrmse(MapSpec::tinkerbell(), tk) == doctest::Approx(0.0173).epsilon(0.35));
}

TEST_CASE("true_rrmse vanishes on clean data") {
  CHECK(true_rrmse(MapSpec::logistic(),
                   make_trajectory_dataset(MapSpec::logistic(), {0.5}, 100)) == 0.0);
  CHECK(true_rrmse(MapSpec::gaussian(),
                   sample_linspace(MapSpec::gaussian(), -1.0, 1.0, 100)) == 0.0);
}

TEST_CASE("rrmse failure and degenerate cases") {
  Dataset zero;
  zero.inputs = {{0.1}, {0.2}};
  zero.targets = {{0.0}, {0.0}};
  CHECK_THROWS_AS(rrmse({Expr::constant(0.0)}, zero), std::invalid_argument);

  Dataset bad;
  bad.inputs = {{0.0}, {0.5}};
  bad.targets = {{1.0}, {1.0}};
  CHECK(std::isinf(rrmse({parse("1/|x0|")}, bad)));

  CHECK_THROWS_AS(rrmse({parse("x0"), parse("x1")}, bad), std::invalid_argument);
}

TEST_CASE("an exact model shadows for the whole horizon") {
  const MapSpec spec = MapSpec::custom({parse(kLogisticText)});
  const ShadowResult res = shadow({parse(kLogisticText)}, spec, {0.5}, 30, 0.05);
  CHECK(res.shadow_steps == 30);
  CHECK(!res.escaped);

  const ShadowResult preset =
      shadow(true_system(MapSpec::logistic()), MapSpec::logistic(), {0.5}, 30, 0.05);
  CHECK(preset.shadow_steps == 30);
  CHECK(!preset.escaped);
}

TEST_CASE("a slightly perturbed model shadows for a while") {
  const ShadowResult res = shadow({parse("3.900000001*x0 - 3.900000001*|x0|^2")},
                                  MapSpec::logistic(), {0.5}, 30, 0.05);
  CHECK(res.shadow_steps >= 10);
  CHECK(!res.escaped);
}

TEST_CASE("a constant model loses the trajectory immediately") {
  const ShadowResult res =
      shadow({Expr::constant(10.0)}, MapSpec::logistic(), {0.5}, 30, 0.05);
  CHECK(res.shadow_steps == 0);
  CHECK(!res.escaped);
}

TEST_CASE("shadow reports model escape") {
  const MapSpec spec = MapSpec::custom({parse("x0*x0")});
  const ShadowResult res = shadow({parse("x0*x0")}, spec, {3.0}, 30, 1e9);
  CHECK(res.escaped);
  CHECK(res.shadow_steps == 3);
}

TEST_CASE("shadow length grows with the allowed gap") {
  const ExprSystem model = {parse("3.9001*x0 - 3.9001*|x0|^2")};
  std::size_t prev = 0;
  for (double gap : {0.001, 0.01, 0.1}) {
    const ShadowResult res = shadow(model, MapSpec::logistic(), {0.5}, 50, gap);
    CHECK(res.shadow_steps >= prev);
    prev = res.shadow_steps;
  }
}

TEST_CASE("shadow argument validation") {
  const ExprSystem model = {parse("x0")};
  CHECK_THROWS_AS(shadow(model, MapSpec::logistic(), {0.5}, 0, 0.05),
                  std::invalid_argument);
  CHECK_THROWS_AS(shadow(model, MapSpec::logistic(), {0.5}, 10, 0.0),
                  std::invalid_argument);
}

TEST_CASE("1-D portraits sample the domain endpoints") {
  const MapSpec spec = MapSpec::custom({parse(kLogisticText)});
  const Portrait p = export_portrait({parse(kLogisticText)}, spec, {0.0}, {1.0}, 3);
  CHECK(p.header == std::vector<std::string>{"x0", "true0", "pred0", "eval_error"});
  REQUIRE(p.rows.size() == 3);
  CHECK(p.rows[0][0] == 0.0);
  CHECK(p.rows[1][0] == 0.5);
  CHECK(p.rows[2][0] == 1.0);
  for (const std::vector<double>& row : p.rows) {
    CHECK(row[1] == row[2]);
    CHECK(row[3] == 0.0);
  }
}

TEST_CASE("the gaussian portrait peaks at the origin") {
  const Portrait p = export_portrait(true_system(MapSpec::gaussian()),
                                     MapSpec::gaussian(), {-1.0}, {1.0}, 101);
  REQUIRE(p.rows.size() == 101);
  double best_x = -2.0, best_v = -1e9;
  for (const std::vector<double>& row : p.rows) {
    if (row[1] > best_v) {
      best_v = row[1];
      best_x = row[0];
    }
  }
  CHECK(std::fabs(best_x) < 1e-12);
  CHECK(best_v == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("2-D portraits cover the lattice") {
  const Portrait p = export_portrait(true_system(MapSpec::tinkerbell()),
                                     MapSpec::tinkerbell(), {-1.0, -1.0},
                                     {1.0, 1.0}, 5);
  CHECK(p.header.size() == 7);
  REQUIRE(p.rows.size() == 25);
  for (const std::vector<double>& row : p.rows) {
    REQUIRE(row.size() == 7);
    CHECK(std::fabs(row[2] - row[4]) <= 1e-12 * (1.0 + std::fabs(row[2])));
    CHECK(std::fabs(row[3] - row[5]) <= 1e-12 * (1.0 + std::fabs(row[3])));
    CHECK(row[6] == 0.0);
  }
}

TEST_CASE("portrait rows flag evaluation failures") {
  const Portrait p = export_portrait({parse("1/|x0|")}, MapSpec::logistic(),
                                     {-1.0}, {1.0}, 3);
  REQUIRE(p.rows.size() == 3);
  CHECK(p.rows[1][0] == 0.0);
  CHECK(std::isnan(p.rows[1][2]));
  CHECK(p.rows[1][3] == 1.0);
  CHECK(p.rows[0][3] == 0.0);
  CHECK(p.rows[2][3] == 0.0);
}
