#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mapid/expr.hpp"

namespace mapid {

// Dense row-major matrix. Deliberately minimal: the public API stays free of
// third-party linear-algebra types; heavy lifting happens inside the library.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // rows*cols, row-major

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::size_t size() const noexcept { return data.size(); }
};

// Architecture of one symbolic network. Input is (x, bias_value) in R^{n+1};
// each of L operational layers concatenates h_lin linear units, h_sig
// signomial-product units, h_op units per operator, and the bias channel;
// K parallel stacks are summed by per-stack linear readouts.
struct NetworkConfig {
  int n = 1;       // state dimension
  int stacks = 1;  // K
  int layers = 1;  // L
  std::vector<UnaryOp> operators;
  int h_lin = 1;
  int h_sig = 1;
  int h_op = 1;  // per operator
  double bias_value = 2.0;
  double weight_init_std = 5e-4;
  double exp_init_std = 0.25;  // signomial exponents draw N(1, exp_init_std)
  // Exponent penalty shape: distance to the nearest integer in {0..3} either
  // linearly or through sqrt (sharper pull once an exponent is almost snapped).
  bool poly_sqrt = false;

  int layer_input_dim(int layer) const {
    return layer == 0 ? n + 1 : layer_output_dim();
  }
  int layer_output_dim() const {
    return h_lin + h_sig + static_cast<int>(operators.size()) * h_op + 1;
  }
};

struct LayerParams {
  Mat w_lin;               // h_lin x d_in
  Mat e_sig;               // h_sig x d_in (signomial exponents)
  std::vector<Mat> w_op;   // per operator: h_op x h_sig (operators act on signomials)
};

struct StackParams {
  std::vector<LayerParams> layers;
  Mat w_out;  // n x d_L readout
};

struct NetworkParams {
  std::vector<StackParams> stacks;
};

struct Alphas {
  double a1 = 0.05;    // L_1/2 on linear and readout weights
  double a2 = 0.01;    // integer-snap distance on signomial exponents
  double a3 = 0.0375;  // L_1/2 on operator input weights
};

struct LossBreakdown {
  double mae = 0.0;
  double l_half = 0.0;
  double l_poly = 0.0;
  double l_ops = 0.0;
  double total = 0.0;
};

struct Regularizers {
  double l_half = 0.0;
  double l_poly = 0.0;
  double l_ops = 0.0;
};

// Zero-valued parameters shaped for cfg.
NetworkParams make_params(const NetworkConfig& cfg);

std::size_t param_count(const NetworkConfig& cfg);

// Multiplicative weights ~ N(0, 5e-4); signomial exponents ~ N(1, 0.25).
// The draw order is fixed, so a seed pins every weight.
NetworkParams init_params(const NetworkConfig& cfg, std::uint64_t seed);

// Flat column order matches the init draw order.
std::vector<double> flatten(const NetworkParams& params);
void unflatten(const std::vector<double>& flat, NetworkParams& params);

// Numeric forward pass. Signomial units clamp |u| below at 1e-12. Throws
// NumericOverflow naming the stack/layer on a non-finite intermediate.
StateVec forward(const NetworkConfig& cfg, const NetworkParams& params,
                 const StateVec& x);
std::vector<StateVec> forward_batch(const NetworkConfig& cfg,
                                    const NetworkParams& params,
                                    const std::vector<StateVec>& inputs);

// Validation-style MAE (mean over samples of the L1 norm over output dims),
// no regularization.
double mean_absolute_error(const NetworkConfig& cfg, const NetworkParams& params,
                           const std::vector<StateVec>& inputs,
                           const std::vector<StateVec>& targets);

Regularizers regularizers(const NetworkConfig& cfg, const NetworkParams& params);

// Full-batch loss and reverse-mode gradient, including the penalty terms.
// grad must be shaped like params (make_params). Subgradients: |w|^(1/2)
// differentiates as sign(w)/(2*sqrt(|w| + 1e-8)); exponent snap distance as
// sign to the nearest integer in {0,1,2,3}; sign(.) units have zero gradient;
// the signomial clamp region is treated as constant.
LossBreakdown loss_and_gradient(const NetworkConfig& cfg, const NetworkParams& params,
                                const std::vector<StateVec>& inputs,
                                const std::vector<StateVec>& targets,
                                const Alphas& alphas, NetworkParams& grad);

// Proximal application of the penalty terms, decoupled from the data-fit
// gradient: each weight moves lr-scaled along its penalty subgradient, and a
// move that would cross the penalty's stationary point (zero for the |w|^(1/2)
// terms, the nearest integer in {0..3} for exponents) lands exactly on it.
// Keeps large coefficients reachable while still zeroing dead weights.
void penalty_step(const NetworkConfig& cfg, NetworkParams& params,
                  const Alphas& alphas, double lr);

// Symbolic mirror of forward: propagates (Var 0..n-1, Const bias) through the
// same layer algebra and canonicalizes. Agrees with forward to ~1e-9 relative
// away from the clamp region.
ExprSystem extract(const NetworkConfig& cfg, const NetworkParams& params);

}  // namespace mapid
