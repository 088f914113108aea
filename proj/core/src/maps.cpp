#include "mapid/maps.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mapid/errors.hpp"
#include "mapid/rng.hpp"

namespace mapid {

int MapSpec::dim() const {
  if (std::holds_alternative<TinkerbellMap>(kind)) return 2;
  if (const auto* c = std::get_if<CustomMap>(&kind))
    return static_cast<int>(c->exprs.size());
  return 1;
}

StateVec step(const MapSpec& spec, const StateVec& x) {
  if (static_cast<int>(x.size()) != spec.dim())
    throw std::invalid_argument("state dimension " + std::to_string(x.size()) +
                                " does not match map dimension " +
                                std::to_string(spec.dim()));
  if (const auto* m = std::get_if<LogisticMap>(&spec.kind))
    return {m->r * x[0] * (1.0 - x[0])};
  if (const auto* m = std::get_if<GaussianMap>(&spec.kind))
    return {std::exp(-m->alpha * x[0] * x[0]) + m->beta};
  if (const auto* m = std::get_if<TinkerbellMap>(&spec.kind))
    return {x[0] * x[0] - x[1] * x[1] + m->a * x[0] + m->b * x[1],
            2.0 * x[0] * x[1] + m->c * x[0] + m->d * x[1]};
  return evaluate(std::get<CustomMap>(spec.kind).exprs, x);
}

std::vector<StateVec> generate_trajectory(const MapSpec& spec, const StateVec& x0,
                                          std::size_t steps) {
  std::vector<StateVec> out;
  out.reserve(steps + 1);
  out.push_back(x0);
  for (std::size_t t = 0; t < steps; ++t) {
    StateVec next = step(spec, out.back());
    for (double v : next)
      if (!std::isfinite(v) || std::fabs(v) > kDivergenceBound)
        throw TrajectoryEscape(t + 1, v);
    out.push_back(std::move(next));
  }
  return out;
}

Dataset make_trajectory_dataset(const MapSpec& spec, const StateVec& x0,
                                std::size_t pairs) {
  if (pairs == 0) throw std::invalid_argument("dataset needs at least one pair");
  const std::vector<StateVec> traj = generate_trajectory(spec, x0, pairs);
  Dataset ds;
  ds.sampling.kind = SamplingKind::Trajectory;
  ds.sampling.x0 = x0;
  ds.sampling.steps = pairs;
  ds.inputs.assign(traj.begin(), traj.end() - 1);
  ds.targets.assign(traj.begin() + 1, traj.end());
  return ds;
}

Dataset sample_linspace(const MapSpec& spec, double lo, double hi, std::size_t M) {
  if (spec.dim() != 1)
    throw std::invalid_argument("linspace sampling supports 1-D maps only");
  if (!(lo < hi)) throw std::invalid_argument("linspace requires lo < hi");
  if (M < 2) throw std::invalid_argument("linspace requires at least 2 samples");
  Dataset ds;
  ds.sampling.kind = SamplingKind::LinSpace;
  ds.sampling.lo = lo;
  ds.sampling.hi = hi;
  ds.inputs.reserve(M);
  ds.targets.reserve(M);
  const double span = hi - lo;
  for (std::size_t m = 0; m < M; ++m) {
    const double x = lo + span * static_cast<double>(m) / static_cast<double>(M - 1);
    ds.inputs.push_back({x});
    ds.targets.push_back(step(spec, {x}));
  }
  return ds;
}

namespace {

std::vector<double> rms_per_dim(const Dataset& ds) {
  const int n = ds.dim();
  std::vector<double> rms(static_cast<std::size_t>(n), 0.0);
  for (const StateVec& x : ds.inputs)
    for (int j = 0; j < n; ++j) rms[static_cast<std::size_t>(j)] += x[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j)];
  for (double& v : rms) v = std::sqrt(v / static_cast<double>(ds.size()));
  return rms;
}

}  // namespace

Dataset add_noise(const Dataset& ds, const NoiseConfig& cfg) {
  if (cfg.sigma < 0.0) throw std::invalid_argument("noise sigma must be nonnegative");
  Dataset out = ds;
  out.noise = cfg;
  if (cfg.sigma == 0.0) return out;

  const std::size_t M = ds.size();
  const std::size_t n = static_cast<std::size_t>(ds.dim());
  const std::vector<double> rms = rms_per_dim(ds);
  Rng rng(cfg.seed);

  if (ds.sampling.kind == SamplingKind::Trajectory) {
    // Perturb the underlying stream of M+1 states so consecutive noisy rows
    // still chain: noisy_target[m] == noisy_input[m+1].
    std::vector<StateVec> delta(M + 1, StateVec(n, 0.0));
    for (std::size_t t = 0; t <= M; ++t)
      for (std::size_t j = 0; j < n; ++j)
        delta[t][j] = rng.normal(0.0, cfg.sigma * rms[j]);
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t j = 0; j < n; ++j) {
        out.inputs[m][j] += delta[m][j];
        out.targets[m][j] += delta[m + 1][j];
      }
  } else {
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t j = 0; j < n; ++j)
        out.inputs[m][j] += rng.normal(0.0, cfg.sigma * rms[j]);
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t j = 0; j < n; ++j)
        out.targets[m][j] += rng.normal(0.0, cfg.sigma * rms[j]);
  }
  return out;
}

Dataset assign_folds(const Dataset& ds, int folds, std::uint64_t seed) {
  const std::size_t M = ds.size();
  if (folds < 2) throw std::invalid_argument("need at least 2 folds");
  if (M < static_cast<std::size_t>(folds))
    throw std::invalid_argument("fewer samples than folds");

  std::vector<std::size_t> perm(M);
  for (std::size_t i = 0; i < M; ++i) perm[i] = i;
  Rng rng(seed);
  for (std::size_t i = M - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i + 1));
    std::swap(perm[i], perm[j]);
  }

  Dataset out = ds;
  out.fold_ids.assign(M, 0);
  const std::size_t base = M / static_cast<std::size_t>(folds);
  const std::size_t extra = M % static_cast<std::size_t>(folds);
  std::size_t pos = 0;
  for (int f = 0; f < folds; ++f) {
    const std::size_t len = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
    for (std::size_t k = 0; k < len; ++k) out.fold_ids[perm[pos++]] = f;
  }
  return out;
}

ExprSystem true_system(const MapSpec& spec) {
  const Expr x = Expr::var(0);
  const Expr y = Expr::var(1);
  if (const auto* m = std::get_if<LogisticMap>(&spec.kind)) {
    // r*x - r*x^2, written with the signomial the identifier would use.
    return {canonicalize(Expr::sum({Expr::prod({Expr::constant(m->r), x}),
                                    Expr::prod({Expr::constant(-m->r),
                                                Expr::signomial(x, 2.0)})}))};
  }
  if (const auto* m = std::get_if<GaussianMap>(&spec.kind)) {
    return {canonicalize(Expr::sum(
        {Expr::unary(UnaryOp::Exp, Expr::prod({Expr::constant(-m->alpha),
                                               Expr::signomial(x, 2.0)})),
         Expr::constant(m->beta)}))};
  }
  if (const auto* m = std::get_if<TinkerbellMap>(&spec.kind)) {
    Expr fx = Expr::sum({Expr::signomial(x, 2.0),
                         Expr::prod({Expr::constant(-1.0), Expr::signomial(y, 2.0)}),
                         Expr::prod({Expr::constant(m->a), x}),
                         Expr::prod({Expr::constant(m->b), y})});
    Expr fy = Expr::sum({Expr::prod({Expr::constant(2.0), x, y}),
                         Expr::prod({Expr::constant(m->c), x}),
                         Expr::prod({Expr::constant(m->d), y})});
    return canonicalize(ExprSystem{fx, fy});
  }
  return std::get<CustomMap>(spec.kind).exprs;
}

}  // namespace mapid
