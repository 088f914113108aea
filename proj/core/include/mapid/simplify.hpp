#pragma once

#include <cstddef>
#include <vector>

#include "mapid/expr.hpp"
#include "mapid/maps.hpp"

namespace mapid {

struct AicScore {
  double aic = 0.0;
  double rss = 0.0;
  std::size_t k = 0;
};

struct ThresholdCandidate {
  double threshold = 0.0;
  ExprSystem expr;
  double aic = 0.0;
  double rss = 0.0;
  std::size_t k = 0;
};

struct SimplificationResult {
  std::vector<ThresholdCandidate> candidates;  // one per threshold, ascending
  std::size_t chosen = 0;                      // AIC argmin, ties to larger t
};

struct RefinedModel {
  ExprSystem expr;
  std::vector<std::vector<double>> coefficients;  // per output dimension
  double rss_before = 0.0;
  double rss_after = 0.0;
  bool condition_flag = false;
};

// The 11 thresholds 10^(-2 + 0.2*i), i = 0..10.
std::vector<double> aic_thresholds();

// Threshold simplification: drops top-level additive terms with coefficient
// magnitude <= t, then snaps every remaining constant (coefficients and
// signomial exponents) to the nearest rational p/q, q <= 16, when within
// t*max(1, |c|). Result is re-canonicalized. Never increases count_constants.
ExprSystem snap(const ExprSystem& e, double t);
Expr snap(const Expr& e, double t);

double residual_sum_squares(const ExprSystem& expr, const Dataset& ds);

// aic = 2k + M*ln(rss/M) with k = count_constants + 1. Perfect fit (rss = 0)
// maps to -infinity; an evaluation failure or non-finite rss to +infinity.
AicScore aic(const ExprSystem& expr, const Dataset& ds);

// Snap at each threshold, score all, choose the minimizer (ties resolve to
// the larger threshold). Throws if every candidate is disqualified.
SimplificationResult select(const ExprSystem& e, const Dataset& ds);

// Rewrites |sum|^p for positive even integer p (2 or 4) into the distributed
// polynomial, exposing cross-terms as separate additive terms for OLS.
// Semantics-preserving; run between selection and refinement.
ExprSystem expand_squares(const ExprSystem& e);
Expr expand_squares(const Expr& e);

// Least-squares refit of the linearly entering top-level coefficients, basis
// shapes frozen. Per output dimension solves min ||y - G c||_2 by SVD; a
// design condition estimate above 1e10 (or a non-finite design) keeps that
// dimension's incumbent coefficients and sets condition_flag. A single-term
// expression is fit as outer coefficient plus additive constant.
RefinedModel ols_refine(const ExprSystem& expr, const Dataset& ds);
RefinedModel ols_refine(const SimplificationResult& sr, const Dataset& ds);

}  // namespace mapid
