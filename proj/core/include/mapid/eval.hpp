#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mapid/expr.hpp"
#include "mapid/maps.hpp"

namespace mapid {

struct EvalReport {
  double rrmse = 0.0;
  double true_rrmse = 0.0;
  double val_mae = 0.0;
  std::size_t shadow_steps = 0;
  bool escaped = false;
};

struct ShadowResult {
  std::size_t shadow_steps = 0;
  bool escaped = false;
};

// sqrt(sum ||expr(x_m) - y_m||^2 / sum ||y_m||^2) over the dataset pairs.
// Evaluation failure or non-finite prediction returns +infinity.
double rrmse(const ExprSystem& expr, const Dataset& ds);

// RRMSE of the exact map applied to the (noisy) inputs against the (noisy)
// targets: the noise floor an identified model is compared to.
double true_rrmse(const MapSpec& spec, const Dataset& ds);

// Iterates expr and the exact map side by side from x0. shadow_steps is the
// largest s with ||expr_traj[i] - true_traj[i]||_inf <= gap for all i <= s.
// escaped reports the expr trajectory leaving the divergence guard box.
ShadowResult shadow(const ExprSystem& expr, const MapSpec& spec, const StateVec& x0,
                    std::size_t steps, double gap);

// Grid evaluation of expr vs the exact map for plotting. 1-D: rows
// (x0, true, pred, eval_error). 2-D: rows (x0, x1, true0, true1, pred0,
// pred1, eval_error) over a grid x grid lattice. Failed evaluations carry
// NaN predictions and eval_error = 1.
struct Portrait {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

Portrait export_portrait(const ExprSystem& expr, const MapSpec& spec,
                         const StateVec& lo, const StateVec& hi, std::size_t grid);

}  // namespace mapid
