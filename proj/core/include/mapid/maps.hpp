#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "mapid/expr.hpp"

namespace mapid {

// Iterates leaving [-kDivergenceBound, kDivergenceBound]^n abort trajectory
// generation with TrajectoryEscape.
inline constexpr double kDivergenceBound = 1e6;

struct LogisticMap {
  double r = 3.9;  // x' = r*x*(1 - x)
};

struct GaussianMap {
  double alpha = 12.0;  // x' = exp(-alpha*x^2) + beta
  double beta = -0.5;
};

struct TinkerbellMap {
  double a = 0.9;  // x' = x^2 - y^2 + a*x + b*y
  double b = -0.6013;
  double c = 2.0;  // y' = 2*x*y + c*x + d*y
  double d = 0.5;
};

struct CustomMap {
  ExprSystem exprs;
};

struct MapSpec {
  std::variant<LogisticMap, GaussianMap, TinkerbellMap, CustomMap> kind;

  static MapSpec logistic(double r = 3.9) { return {LogisticMap{r}}; }
  static MapSpec gaussian(double alpha = 12.0, double beta = -0.5) {
    return {GaussianMap{alpha, beta}};
  }
  static MapSpec tinkerbell(double a = 0.9, double b = -0.6013, double c = 2.0,
                            double d = 0.5) {
    return {TinkerbellMap{a, b, c, d}};
  }
  static MapSpec custom(ExprSystem exprs) { return {CustomMap{std::move(exprs)}}; }

  int dim() const;
};

struct NoiseConfig {
  double sigma = 0.0;  // noise std relative to per-dimension RMS
  std::uint64_t seed = 0;
};

enum class SamplingKind { Trajectory, LinSpace };

struct SamplingInfo {
  SamplingKind kind = SamplingKind::Trajectory;
  StateVec x0;            // Trajectory
  std::size_t steps = 0;  // Trajectory
  double lo = 0.0;        // LinSpace
  double hi = 0.0;
};

// Supervised one-step dataset: targets[m] is the map image of inputs[m]
// (before noise). For trajectory sampling the clean rows chain:
// inputs[m+1] == targets[m].
struct Dataset {
  std::vector<StateVec> inputs;
  std::vector<StateVec> targets;
  std::vector<int> fold_ids;  // empty until assign_folds
  SamplingInfo sampling;
  NoiseConfig noise;

  std::size_t size() const noexcept { return inputs.size(); }
  int dim() const noexcept {
    return inputs.empty() ? 0 : static_cast<int>(inputs[0].size());
  }
};

// One exact application of the map.
StateVec step(const MapSpec& spec, const StateVec& x);

// [x0, f(x0), ..., f^steps(x0)], length steps+1. Throws TrajectoryEscape if
// an iterate leaves the divergence guard box or goes non-finite.
std::vector<StateVec> generate_trajectory(const MapSpec& spec, const StateVec& x0,
                                          std::size_t steps);

// All consecutive pairs (x_t, x_{t+1}) of a trajectory with `pairs` steps.
Dataset make_trajectory_dataset(const MapSpec& spec, const StateVec& x0,
                                std::size_t pairs);

// M evenly spaced 1-D inputs over [lo, hi] including both endpoints.
Dataset sample_linspace(const MapSpec& spec, double lo, double hi, std::size_t M);

// RMS-scaled Gaussian perturbation, per state dimension j with scale
// sigma * RMS_j over the clean inputs. Trajectory datasets perturb the
// underlying state stream once, so the noisy rows still chain; linspace
// datasets perturb inputs and targets independently. sigma = 0 is identity.
Dataset add_noise(const Dataset& ds, const NoiseConfig& cfg);

// Balanced random fold assignment: a seeded uniform shuffle cut into
// `folds` contiguous blocks of size floor(M/folds) or ceil(M/folds).
Dataset assign_folds(const Dataset& ds, int folds, std::uint64_t seed);

// Exact closed form of a preset map as expression trees (Custom returns its
// own system). Useful as a ground-truth reference.
ExprSystem true_system(const MapSpec& spec);

}  // namespace mapid
