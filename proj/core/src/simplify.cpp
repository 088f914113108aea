#include "mapid/simplify.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "mapid/errors.hpp"

namespace mapid {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxDenominator = 16;
constexpr double kConditionLimit = 1e10;

// Simplest p/q within tol: the smallest denominator q <= kMaxDenominator
// whose rounding error fits, so coarser thresholds give coarser rationals.
double snap_constant(double c, double t) {
  const double tol = t * std::max(1.0, std::fabs(c));
  for (int q = 1; q <= kMaxDenominator; ++q) {
    const double cand = std::round(c * q) / q;
    if (std::fabs(c - cand) <= tol) return cand;
  }
  return c;
}

Expr snap_constants(const Expr& e, double t) {
  switch (e.kind()) {
    case Expr::Kind::Const:
      return Expr::constant(snap_constant(e.value(), t));
    case Expr::Kind::Var:
      return e;
    case Expr::Kind::Signomial:
      return Expr::signomial(snap_constants(e.base(), t),
                             snap_constant(e.exponent(), t));
    case Expr::Kind::Op:
      return Expr::unary(e.op(), snap_constants(e.arg(), t));
    case Expr::Kind::Sum:
    case Expr::Kind::Prod: {
      std::vector<Expr> kids;
      kids.reserve(e.kids().size());
      for (const Expr& k : e.kids()) kids.push_back(snap_constants(k, t));
      return e.kind() == Expr::Kind::Sum ? Expr::sum(std::move(kids))
                                         : Expr::prod(std::move(kids));
    }
  }
  return e;
}

// (coefficient, basis core) of a canonical non-Sum term; a bare constant has
// core 1 so it becomes an intercept column.
std::pair<double, Expr> term_parts(const Expr& t) {
  if (t.kind() == Expr::Kind::Const) return {t.value(), Expr::constant(1.0)};
  if (t.kind() == Expr::Kind::Prod && !t.kids().empty() &&
      t.kids()[0].kind() == Expr::Kind::Const) {
    const double c = t.kids()[0].value();
    if (t.kids().size() == 2) return {c, t.kids()[1]};
    std::vector<Expr> rest(t.kids().begin() + 1, t.kids().end());
    return {c, Expr::prod(std::move(rest))};
  }
  return {1.0, t};
}

std::vector<Expr> top_terms(const Expr& e) {
  if (e.kind() == Expr::Kind::Sum) return e.kids();
  return {e};
}

}  // namespace

std::vector<double> aic_thresholds() {
  std::vector<double> t(11);
  for (int i = 0; i <= 10; ++i) t[static_cast<std::size_t>(i)] = std::pow(10.0, -2.0 + 0.2 * i);
  return t;
}

Expr snap(const Expr& e, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("snap threshold must be positive");
  std::vector<Expr> kept;
  for (const Expr& term : top_terms(e)) {
    const auto [coeff, core] = term_parts(term);
    (void)core;
    if (std::fabs(coeff) <= t) continue;
    kept.push_back(snap_constants(term, t));
  }
  if (kept.empty()) return Expr::constant(0.0);
  return canonicalize(kept.size() == 1 ? kept[0] : Expr::sum(std::move(kept)));
}

ExprSystem snap(const ExprSystem& e, double t) {
  ExprSystem out;
  out.reserve(e.size());
  for (const Expr& c : e) out.push_back(snap(c, t));
  return out;
}

double residual_sum_squares(const ExprSystem& expr, const Dataset& ds) {
  if (expr.size() != static_cast<std::size_t>(ds.dim()))
    throw std::invalid_argument("expression arity does not match dataset dimension");
  double rss = 0.0;
  for (std::size_t m = 0; m < ds.size(); ++m) {
    const StateVec pred = evaluate(expr, ds.inputs[m]);
    for (std::size_t j = 0; j < pred.size(); ++j) {
      const double r = pred[j] - ds.targets[m][j];
      rss += r * r;
    }
  }
  return rss;
}

AicScore aic(const ExprSystem& expr, const Dataset& ds) {
  const double M = static_cast<double>(ds.size());
  AicScore score;
  score.k = count_constants(expr) + 1;
  try {
    score.rss = residual_sum_squares(expr, ds);
  } catch (const EvalError&) {
    score.rss = kInf;
    score.aic = kInf;
    return score;
  }
  if (!std::isfinite(score.rss)) {
    score.rss = kInf;
    score.aic = kInf;
  } else if (score.rss == 0.0) {
    score.aic = -kInf;
  } else {
    score.aic = 2.0 * static_cast<double>(score.k) + M * std::log(score.rss / M);
  }
  return score;
}

SimplificationResult select(const ExprSystem& e, const Dataset& ds) {
  SimplificationResult result;
  double best = kInf;
  bool any = false;
  const std::vector<double> ts = aic_thresholds();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    ThresholdCandidate cand;
    cand.threshold = ts[i];
    cand.expr = snap(e, ts[i]);
    const AicScore s = aic(cand.expr, ds);
    cand.aic = s.aic;
    cand.rss = s.rss;
    cand.k = s.k - 1;  // constant census; aic's k adds the variance parameter
    if (cand.aic <= best) {
      best = cand.aic;
      result.chosen = i;
      any = any || cand.aic < kInf;
    }
    result.candidates.push_back(std::move(cand));
  }
  if (!any) throw std::runtime_error("every simplification candidate failed to evaluate");
  return result;
}

namespace {

// Fully distributes a product of sums into a sum of products.
Expr distribute(const Expr& a, const Expr& b) {
  const std::vector<Expr> ta = top_terms(a);
  const std::vector<Expr> tb = top_terms(b);
  std::vector<Expr> out;
  out.reserve(ta.size() * tb.size());
  for (const Expr& x : ta)
    for (const Expr& y : tb) out.push_back(Expr::prod({x, y}));
  return canonicalize(Expr::sum(std::move(out)));
}

}  // namespace

Expr expand_squares(const Expr& e) {
  switch (e.kind()) {
    case Expr::Kind::Const:
    case Expr::Kind::Var:
      return e;
    case Expr::Kind::Op:
      return Expr::unary(e.op(), expand_squares(e.arg()));
    case Expr::Kind::Signomial: {
      const Expr base = expand_squares(e.base());
      const double p = e.exponent();
      if (base.kind() == Expr::Kind::Sum && (p == 2.0 || p == 4.0)) {
        Expr sq = distribute(base, base);
        if (p == 4.0) sq = distribute(sq, sq);
        return sq;
      }
      return Expr::signomial(base, p);
    }
    case Expr::Kind::Sum:
    case Expr::Kind::Prod: {
      std::vector<Expr> kids;
      kids.reserve(e.kids().size());
      for (const Expr& k : e.kids()) kids.push_back(expand_squares(k));
      return e.kind() == Expr::Kind::Sum ? Expr::sum(std::move(kids))
                                         : Expr::prod(std::move(kids));
    }
  }
  return e;
}

ExprSystem expand_squares(const ExprSystem& e) {
  ExprSystem out;
  out.reserve(e.size());
  for (const Expr& c : e) out.push_back(canonicalize(expand_squares(c)));
  return out;
}

RefinedModel ols_refine(const ExprSystem& expr, const Dataset& ds) {
  const std::size_t n = expr.size();
  if (n != static_cast<std::size_t>(ds.dim()))
    throw std::invalid_argument("expression arity does not match dataset dimension");
  const std::size_t M = ds.size();
  if (M == 0) throw std::invalid_argument("empty dataset");

  RefinedModel out;
  out.expr = expr;
  out.coefficients.resize(n);
  out.rss_before = residual_sum_squares(expr, ds);

  for (std::size_t d = 0; d < n; ++d) {
    std::vector<Expr> terms = top_terms(expr[d]);
    std::vector<double> coeffs;
    std::vector<Expr> cores;
    bool has_intercept = false;
    for (const Expr& t : terms) {
      auto [c, core] = term_parts(t);
      if (core.is_const(1.0)) has_intercept = true;
      coeffs.push_back(c);
      cores.push_back(std::move(core));
    }
    // A lone non-constant term still gets an additive constant to fit.
    if (cores.size() == 1 && !has_intercept && !cores[0].is_const(1.0)) {
      cores.push_back(Expr::constant(1.0));
      coeffs.push_back(0.0);
    }

    const auto J = static_cast<Eigen::Index>(cores.size());
    Eigen::MatrixXd G(static_cast<Eigen::Index>(M), J);
    Eigen::VectorXd y(static_cast<Eigen::Index>(M));
    bool bad = false;
    for (std::size_t m = 0; m < M && !bad; ++m) {
      y(static_cast<Eigen::Index>(m)) = ds.targets[m][d];
      for (Eigen::Index j = 0; j < J && !bad; ++j) {
        double v = 0.0;
        try {
          v = evaluate(cores[static_cast<std::size_t>(j)], ds.inputs[m]);
        } catch (const EvalError&) {
          bad = true;
          break;
        }
        if (!std::isfinite(v)) {
          bad = true;
          break;
        }
        G(static_cast<Eigen::Index>(m), j) = v;
      }
    }

    std::vector<double> solved = coeffs;
    if (!bad) {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(G, Eigen::ComputeThinU | Eigen::ComputeThinV);
      const auto& sv = svd.singularValues();
      const double smin = sv(sv.size() - 1);
      const double cond = smin > 0.0 ? sv(0) / smin : kInf;
      if (!(cond <= kConditionLimit)) {
        bad = true;
      } else {
        const Eigen::VectorXd c = svd.solve(y);
        for (Eigen::Index j = 0; j < J; ++j)
          solved[static_cast<std::size_t>(j)] = c(j);
      }
    }
    if (bad) {
      out.condition_flag = true;
      solved = coeffs;  // keep incumbents; a fitted intercept stays 0
    }

    std::vector<Expr> rebuilt;
    for (std::size_t j = 0; j < cores.size(); ++j)
      rebuilt.push_back(Expr::prod({Expr::constant(solved[j]), cores[j]}));
    out.expr[d] = canonicalize(rebuilt.size() == 1 ? rebuilt[0]
                                                   : Expr::sum(std::move(rebuilt)));
    out.coefficients[d] = std::move(solved);
  }

  out.rss_after = residual_sum_squares(out.expr, ds);
  return out;
}

RefinedModel ols_refine(const SimplificationResult& sr, const Dataset& ds) {
  return ols_refine(sr.candidates[sr.chosen].expr, ds);
}

}  // namespace mapid
