#pragma once

#include <cstdint>
#include <vector>

#include "mapid/maps.hpp"
#include "mapid/netcore.hpp"

namespace mapid {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  int epochs = 5000;
  int folds = 5;
  int instances = 20;
  double lr_min = 28e-3;
  double lr_max = 36e-3;
  int cycle_epochs = 1000;  // one full triangle
  Alphas alphas;
  AdamConfig adam;
  std::uint64_t base_seed = 0;
};

struct TrainedModel {
  NetworkParams params;  // snapshot with the best validation MAE
  double best_val_mae = 0.0;
  int convergence_epoch = 0;  // epoch of that snapshot; 0 = initialization
  int fold_id = 0;
  int instance_id = 0;
  bool failed = false;  // numeric overflow aborted this fold
  // Per update epoch (1-based): training loss at the pre-update parameters
  // and validation MAE after the update.
  std::vector<LossBreakdown> loss_history;
  std::vector<double> val_history;
};

// Triangular cyclic schedule: lr_min at phase 0, lr_max at half cycle.
double cyclic_lr(int epoch, const TrainConfig& cfg);

// Full-batch Adam on the non-`fold` samples, validating on `fold` each
// epoch. Keeps the best-validation snapshot (the initial parameters count as
// epoch 0). Deterministic per seed. Overflow marks the model failed and
// returns the best snapshot so far instead of throwing.
TrainedModel train_fold(const NetworkConfig& net, const TrainConfig& cfg,
                        const Dataset& ds, int fold, std::uint64_t seed);

// For each instance i: reshuffle folds with seed base_seed + i, train every
// fold with seeds derived from (base_seed, i, fold), keep the instance's
// best-validation fold model. Returns non-failed instance winners sorted by
// best_val_mae ascending; throws if every instance failed.
std::vector<TrainedModel> run_instances(const NetworkConfig& net,
                                        const TrainConfig& cfg, const Dataset& ds);

}  // namespace mapid
