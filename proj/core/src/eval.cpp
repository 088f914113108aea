#include "mapid/eval.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "mapid/errors.hpp"

namespace mapid {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

double rrmse(const ExprSystem& expr, const Dataset& ds) {
  if (ds.size() == 0) throw std::invalid_argument("empty dataset");
  if (expr.size() != static_cast<std::size_t>(ds.dim()))
    throw std::invalid_argument("expression arity does not match dataset dimension");
  double num = 0.0, den = 0.0;
  for (std::size_t m = 0; m < ds.size(); ++m) {
    for (double y : ds.targets[m]) den += y * y;
    StateVec pred;
    try {
      pred = evaluate(expr, ds.inputs[m]);
    } catch (const EvalError&) {
      num = kInf;
      continue;
    }
    for (std::size_t j = 0; j < pred.size(); ++j) {
      const double r = pred[j] - ds.targets[m][j];
      num += r * r;
    }
  }
  if (den <= 0.0) throw std::invalid_argument("rrmse denominator is zero");
  if (!std::isfinite(num)) return kInf;
  return std::sqrt(num / den);
}

double true_rrmse(const MapSpec& spec, const Dataset& ds) {
  if (ds.size() == 0) throw std::invalid_argument("empty dataset");
  double num = 0.0, den = 0.0;
  for (std::size_t m = 0; m < ds.size(); ++m) {
    const StateVec pred = step(spec, ds.inputs[m]);
    for (std::size_t j = 0; j < pred.size(); ++j) {
      const double y = ds.targets[m][j];
      den += y * y;
      const double r = pred[j] - y;
      num += r * r;
    }
  }
  if (den <= 0.0) throw std::invalid_argument("rrmse denominator is zero");
  return std::sqrt(num / den);
}

ShadowResult shadow(const ExprSystem& expr, const MapSpec& spec, const StateVec& x0,
                    std::size_t steps, double gap) {
  if (steps < 1) throw std::invalid_argument("shadow needs at least one step");
  if (!(gap > 0.0)) throw std::invalid_argument("gap must be positive");
  ShadowResult res;
  StateVec a = x0;  // identified model
  StateVec b = x0;  // exact map
  for (std::size_t i = 1; i <= steps; ++i) {
    b = step(spec, b);
    try {
      a = evaluate(expr, a);
    } catch (const EvalError&) {
      res.escaped = true;
      return res;
    }
    for (double v : a)
      if (!std::isfinite(v) || std::fabs(v) > kDivergenceBound) {
        res.escaped = true;
        return res;
      }
    double inf_norm = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j)
      inf_norm = std::max(inf_norm, std::fabs(a[j] - b[j]));
    if (inf_norm > gap) return res;
    res.shadow_steps = i;
  }
  return res;
}

Portrait export_portrait(const ExprSystem& expr, const MapSpec& spec,
                         const StateVec& lo, const StateVec& hi, std::size_t grid) {
  if (grid < 2) throw std::invalid_argument("portrait grid must be at least 2");
  const int n = spec.dim();
  if (static_cast<int>(lo.size()) != n || static_cast<int>(hi.size()) != n)
    throw std::invalid_argument("domain box dimension mismatch");
  if (n != 1 && n != 2)
    throw std::invalid_argument("portrait export supports 1-D and 2-D maps");

  Portrait p;
  auto emit = [&](const StateVec& x) {
    std::vector<double> row(x.begin(), x.end());
    const StateVec truth = step(spec, x);
    row.insert(row.end(), truth.begin(), truth.end());
    bool failed = false;
    StateVec pred;
    try {
      pred = evaluate(expr, x);
    } catch (const EvalError&) {
      failed = true;
      pred.assign(static_cast<std::size_t>(n), kNaN);
    }
    for (double v : pred) row.push_back(failed || !std::isfinite(v) ? kNaN : v);
    row.push_back(failed ? 1.0 : 0.0);
    p.rows.push_back(std::move(row));
  };

  if (n == 1) {
    p.header = {"x0", "true0", "pred0", "eval_error"};
    for (std::size_t i = 0; i < grid; ++i) {
      const double x = lo[0] + (hi[0] - lo[0]) * static_cast<double>(i) /
                                   static_cast<double>(grid - 1);
      emit({x});
    }
  } else {
    p.header = {"x0", "x1", "true0", "true1", "pred0", "pred1", "eval_error"};
    for (std::size_t i = 0; i < grid; ++i)
      for (std::size_t j = 0; j < grid; ++j) {
        const double x = lo[0] + (hi[0] - lo[0]) * static_cast<double>(i) /
                                     static_cast<double>(grid - 1);
        const double y = lo[1] + (hi[1] - lo[1]) * static_cast<double>(j) /
                                     static_cast<double>(grid - 1);
        emit({x, y});
      }
  }
  return p;
}

}  // namespace mapid
