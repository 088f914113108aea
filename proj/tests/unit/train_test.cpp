#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "mapid/experiment.hpp"
#include "mapid/maps.hpp"
#include "mapid/netcore.hpp"
#include "mapid/rng.hpp"
#include "mapid/train.hpp"

using namespace mapid;

namespace {

Dataset zero_problem(std::size_t rows) {
  Dataset ds;
  for (std::size_t i = 0; i < rows; ++i) {
    ds.inputs.push_back({static_cast<double>(i) / static_cast<double>(rows)});
    ds.targets.push_back({0.0});
  }
  return assign_folds(ds, 5, 1);
}

}  // namespace

TEST_CASE("cyclic schedule hits its corners") {
  TrainConfig cfg;
  CHECK(cyclic_lr(0, cfg) == cfg.lr_min);
  CHECK(cyclic_lr(250, cfg) == doctest::Approx(0.032).epsilon(1e-12));
  CHECK(cyclic_lr(500, cfg) == cfg.lr_max);
  CHECK(cyclic_lr(750, cfg) == doctest::Approx(0.032).epsilon(1e-12));
  CHECK(cyclic_lr(1000, cfg) == cfg.lr_min);
  CHECK(cyclic_lr(1500, cfg) == cfg.lr_max);
}

TEST_CASE("a zero problem stays at its zero initialization") {
  NetworkConfig net;
  net.weight_init_std = 0.0;
  net.exp_init_std = 0.0;
  TrainConfig cfg;
  cfg.epochs = 50;

  const TrainedModel model = train_fold(net, cfg, zero_problem(20), 0, 7);
  CHECK(!model.failed);
  CHECK(model.best_val_mae == 0.0);
  CHECK(model.convergence_epoch == 0);
  CHECK(model.val_history.size() == 50);
  for (double v : model.val_history) CHECK(v == 0.0);
  CHECK(flatten(model.params) == flatten(init_params(net, 7)));
}

TEST_CASE("train_fold is deterministic") {
  const ExperimentConfig pre = preset("logistic");
  Dataset ds = assign_folds(build_clean_dataset(pre), 5, 3);
  TrainConfig cfg = pre.train;
  cfg.epochs = 120;

  const TrainedModel a = train_fold(pre.net, cfg, ds, 1, 99);
  const TrainedModel b = train_fold(pre.net, cfg, ds, 1, 99);
  CHECK(a.best_val_mae == b.best_val_mae);
  CHECK(a.convergence_epoch == b.convergence_epoch);
  CHECK(flatten(a.params) == flatten(b.params));
  CHECK(a.val_history == b.val_history);
  REQUIRE(a.loss_history.size() == b.loss_history.size());
  for (std::size_t i = 0; i < a.loss_history.size(); ++i)
    CHECK(a.loss_history[i].total == b.loss_history[i].total);

  const TrainedModel c = train_fold(pre.net, cfg, ds, 1, 100);
  CHECK(flatten(c.params) != flatten(a.params));
}

TEST_CASE("best snapshot tracks the validation history") {
  const ExperimentConfig pre = preset("logistic");
  Dataset ds = assign_folds(build_clean_dataset(pre), 5, 3);
  TrainConfig cfg = pre.train;
  cfg.epochs = 150;

  const TrainedModel model = train_fold(pre.net, cfg, ds, 0, 11);
  REQUIRE(model.val_history.size() == 150);
  REQUIRE(model.loss_history.size() == 150);
  for (double v : model.val_history) CHECK(model.best_val_mae <= v);
  if (model.convergence_epoch > 0) {
    CHECK(model.best_val_mae ==
          model.val_history[static_cast<std::size_t>(model.convergence_epoch) - 1]);
  }
  for (const LossBreakdown& l : model.loss_history) {
    CHECK(std::isfinite(l.total));
    CHECK(std::isfinite(l.mae));
    CHECK(l.l_half >= 0.0);
    CHECK(l.l_poly >= 0.0);
    CHECK(l.l_ops >= 0.0);
  }
}

TEST_CASE("zero epochs returns the initialization") {
  const ExperimentConfig pre = preset("logistic");
  Dataset ds = assign_folds(build_clean_dataset(pre), 5, 2);
  TrainConfig cfg = pre.train;
  cfg.epochs = 0;

  const TrainedModel model = train_fold(pre.net, cfg, ds, 2, 5);
  CHECK(model.convergence_epoch == 0);
  CHECK(model.val_history.empty());
  CHECK(model.loss_history.empty());
  CHECK(flatten(model.params) == flatten(init_params(pre.net, 5)));
}

TEST_CASE("logistic folds reach a small validation error") {
  const ExperimentConfig pre = preset("logistic");
  Dataset ds = assign_folds(build_clean_dataset(pre), 5, 1);
  TrainConfig cfg = pre.train;
  cfg.epochs = 1000;

  double best = std::numeric_limits<double>::infinity();
  for (int f = 0; f < 5; ++f) {
    const TrainedModel model =
        train_fold(pre.net, cfg, ds, f, derive_seed(cfg.base_seed, 0, static_cast<std::uint64_t>(f)));
    CHECK(!model.failed);
    best = std::min(best, model.best_val_mae);
  }
  CHECK(best < 0.02);
}

TEST_CASE("run_instances returns winners sorted by validation error") {
  const ExperimentConfig pre = preset("logistic");
  const Dataset ds = build_clean_dataset(pre);
  TrainConfig cfg = pre.train;
  cfg.instances = 3;
  cfg.epochs = 200;

  const std::vector<TrainedModel> winners = run_instances(pre.net, cfg, ds);
  REQUIRE(winners.size() == 3);
  for (std::size_t i = 1; i < winners.size(); ++i)
    CHECK(winners[i - 1].best_val_mae <= winners[i].best_val_mae);
  for (const TrainedModel& w : winners) CHECK(!w.failed);
}

TEST_CASE("run_instances throws once every instance fails") {
  const ExperimentConfig pre = preset("logistic");
  Dataset ds = build_clean_dataset(pre);
  ds.inputs[0][0] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg = pre.train;
  cfg.instances = 2;
  cfg.epochs = 3;

  CHECK_THROWS_AS(run_instances(pre.net, cfg, ds), std::runtime_error);
}
