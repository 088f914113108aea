#include "mapid/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mapid/errors.hpp"
#include "mapid/rng.hpp"

namespace mapid {

double cyclic_lr(int epoch, const TrainConfig& cfg) {
  const int cycle = std::max(cfg.cycle_epochs, 2);
  const int phase = epoch % cycle;
  const double half = cycle / 2.0;
  const double frac = phase <= half ? phase / half : (cycle - phase) / half;
  return cfg.lr_min + (cfg.lr_max - cfg.lr_min) * frac;
}

namespace {

void split_fold(const Dataset& ds, int fold, std::vector<StateVec>& train_x,
                std::vector<StateVec>& train_y, std::vector<StateVec>& val_x,
                std::vector<StateVec>& val_y) {
  if (ds.fold_ids.size() != ds.size())
    throw std::invalid_argument("dataset has no fold assignment");
  for (std::size_t m = 0; m < ds.size(); ++m) {
    if (ds.fold_ids[m] == fold) {
      val_x.push_back(ds.inputs[m]);
      val_y.push_back(ds.targets[m]);
    } else {
      train_x.push_back(ds.inputs[m]);
      train_y.push_back(ds.targets[m]);
    }
  }
  if (train_x.empty() || val_x.empty())
    throw std::invalid_argument("fold split left an empty partition");
}

}  // namespace

TrainedModel train_fold(const NetworkConfig& net, const TrainConfig& cfg,
                        const Dataset& ds, int fold, std::uint64_t seed) {
  if (fold < 0 || fold >= cfg.folds)
    throw std::invalid_argument("fold index out of range");
  std::vector<StateVec> train_x, train_y, val_x, val_y;
  split_fold(ds, fold, train_x, train_y, val_x, val_y);

  TrainedModel model;
  model.fold_id = fold;
  model.params = init_params(net, seed);
  model.loss_history.reserve(static_cast<std::size_t>(cfg.epochs));
  model.val_history.reserve(static_cast<std::size_t>(cfg.epochs));

  NetworkParams cur = model.params;
  NetworkParams grad = make_params(net);
  std::vector<double> w = flatten(cur);
  std::vector<double> m(w.size(), 0.0), v(w.size(), 0.0);

  try {
    model.best_val_mae = mean_absolute_error(net, cur, val_x, val_y);
    model.convergence_epoch = 0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
      // Adam follows the data-fit gradient only; the penalties are applied as
      // a separate proximal step below so their constant subgradients are not
      // rescaled by the moment normalizer.
      LossBreakdown loss =
          loss_and_gradient(net, cur, train_x, train_y, Alphas{0.0, 0.0, 0.0}, grad);
      loss.total = loss.mae + cfg.alphas.a1 * loss.l_half +
                   cfg.alphas.a2 * loss.l_poly + cfg.alphas.a3 * loss.l_ops;
      if (!std::isfinite(loss.total)) throw NumericOverflow(-1, -1);

      const double lr = cyclic_lr(epoch - 1, cfg);
      const std::vector<double> g = flatten(grad);
      const double bc1 = 1.0 - std::pow(cfg.adam.beta1, epoch);
      const double bc2 = 1.0 - std::pow(cfg.adam.beta2, epoch);
      for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = cfg.adam.beta1 * m[i] + (1.0 - cfg.adam.beta1) * g[i];
        v[i] = cfg.adam.beta2 * v[i] + (1.0 - cfg.adam.beta2) * g[i] * g[i];
        w[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.adam.eps);
      }
      unflatten(w, cur);
      penalty_step(net, cur, cfg.alphas, lr);
      w = flatten(cur);

      const double val = mean_absolute_error(net, cur, val_x, val_y);
      model.loss_history.push_back(loss);
      model.val_history.push_back(val);
      if (val < model.best_val_mae) {
        model.best_val_mae = val;
        model.convergence_epoch = epoch;
        model.params = cur;
      }
    }
  } catch (const NumericOverflow&) {
    model.failed = true;
  }
  return model;
}

std::vector<TrainedModel> run_instances(const NetworkConfig& net,
                                        const TrainConfig& cfg, const Dataset& ds) {
  std::vector<TrainedModel> winners;
  for (int i = 0; i < cfg.instances; ++i) {
    const Dataset folded =
        assign_folds(ds, cfg.folds, cfg.base_seed + static_cast<std::uint64_t>(i));
    TrainedModel best;
    bool have = false;
    for (int f = 0; f < cfg.folds; ++f) {
      TrainedModel model = train_fold(
          net, cfg, folded, f,
          derive_seed(cfg.base_seed, static_cast<std::uint64_t>(i),
                      static_cast<std::uint64_t>(f)));
      model.instance_id = i;
      if (model.failed) continue;
      if (!have || model.best_val_mae < best.best_val_mae) {
        best = std::move(model);
        have = true;
      }
    }
    if (have) winners.push_back(std::move(best));
  }
  if (winners.empty()) throw std::runtime_error("all training instances failed");
  std::stable_sort(winners.begin(), winners.end(),
                   [](const TrainedModel& a, const TrainedModel& b) {
                     return a.best_val_mae < b.best_val_mae;
                   });
  return winners;
}

}  // namespace mapid
