#pragma once

#include <string>
#include <vector>

#include "mapid/eval.hpp"
#include "mapid/maps.hpp"
#include "mapid/train.hpp"

namespace mapid {

// All writers emit full-precision doubles (17 significant digits) and, when
// `provenance` is nonempty, a leading "# mapid <provenance>" comment line.
// Readers skip '#' comment lines.

void write_trajectory_csv(const std::string& path, const std::vector<StateVec>& traj,
                          const std::string& provenance = "");
std::vector<StateVec> read_trajectory_csv(const std::string& path);

void write_pairs_csv(const std::string& path, const Dataset& ds,
                     const std::string& provenance = "");
Dataset read_pairs_csv(const std::string& path);

void write_training_log_csv(const std::string& path, const TrainedModel& model,
                            const TrainConfig& cfg,
                            const std::string& provenance = "");

void write_portrait_csv(const std::string& path, const Portrait& portrait,
                        const std::string& provenance = "");

// Expression text files: optional leading '#' comment lines, then one
// system in the expression grammar. Round-trips through parse_system.
void write_expression_file(const std::string& path, const ExprSystem& sys,
                           const std::string& provenance = "");
ExprSystem read_expression_file(const std::string& path);

struct ResultRow {
  double sigma = 0.0;
  std::string expression;
  double val_mae = 0.0;
  double rrmse = 0.0;
  double true_rrmse = 0.0;
  int convergence_epoch = 0;
};

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows,
                       const std::string& provenance = "");

}  // namespace mapid
