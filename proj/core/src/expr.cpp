#include "mapid/expr.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "mapid/errors.hpp"

namespace mapid {

const char* unary_op_name(UnaryOp op) noexcept {
  switch (op) {
    case UnaryOp::Sin: return "sin";
    case UnaryOp::Abs: return "abs";
    case UnaryOp::Exp: return "exp";
    case UnaryOp::Sign: return "sign";
  }
  return "?";
}

Expr Expr::constant(double v) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Const;
  n->value = v;
  return Expr(std::move(n));
}

Expr Expr::var(int index) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Var;
  n->var_index = index;
  return Expr(std::move(n));
}

Expr Expr::sum(std::vector<Expr> terms) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Sum;
  n->kids = std::move(terms);
  return Expr(std::move(n));
}

Expr Expr::prod(std::vector<Expr> factors) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Prod;
  n->kids = std::move(factors);
  return Expr(std::move(n));
}

Expr Expr::signomial(Expr base, double exponent) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Signomial;
  n->exponent = exponent;
  n->kids.push_back(std::move(base));
  return Expr(std::move(n));
}

Expr Expr::unary(UnaryOp op, Expr arg) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Op;
  n->op = op;
  n->kids.push_back(std::move(arg));
  return Expr(std::move(n));
}

double evaluate(const Expr& e, const StateVec& x) {
  switch (e.kind()) {
    case Expr::Kind::Const:
      return e.value();
    case Expr::Kind::Var:
      if (e.var_index() < 0 || static_cast<std::size_t>(e.var_index()) >= x.size())
        throw std::out_of_range("variable x" + std::to_string(e.var_index()) +
                                " out of range for state of dimension " +
                                std::to_string(x.size()));
      return x[static_cast<std::size_t>(e.var_index())];
    case Expr::Kind::Sum: {
      double acc = 0.0;
      for (const Expr& t : e.kids()) acc += evaluate(t, x);
      return acc;
    }
    case Expr::Kind::Prod: {
      double acc = 1.0;
      for (const Expr& f : e.kids()) acc *= evaluate(f, x);
      return acc;
    }
    case Expr::Kind::Signomial: {
      const double a = std::fabs(evaluate(e.base(), x));
      const double p = e.exponent();
      if (a == 0.0) {
        if (p == 0.0) return 1.0;
        if (p < 0.0) throw EvalError("0 raised to negative power in " + format(e));
        return 0.0;
      }
      return std::pow(a, p);
    }
    case Expr::Kind::Op: {
      const double v = evaluate(e.arg(), x);
      switch (e.op()) {
        case UnaryOp::Sin: return std::sin(v);
        case UnaryOp::Abs: return std::fabs(v);
        case UnaryOp::Exp: return std::exp(v);
        case UnaryOp::Sign: return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
      }
      return 0.0;
    }
  }
  return 0.0;
}

StateVec evaluate(const ExprSystem& sys, const StateVec& x) {
  StateVec out;
  out.reserve(sys.size());
  for (const Expr& e : sys) out.push_back(evaluate(e, x));
  return out;
}

int arity(const Expr& e) {
  switch (e.kind()) {
    case Expr::Kind::Const: return 0;
    case Expr::Kind::Var: return e.var_index() + 1;
    default: {
      int n = 0;
      for (const Expr& k : e.kids()) n = std::max(n, arity(k));
      return n;
    }
  }
}

int arity(const ExprSystem& sys) {
  int n = 0;
  for (const Expr& e : sys) n = std::max(n, arity(e));
  return n;
}

namespace {

// Order used for canonical sorting: variables first, constants last, so a
// canonical sum prints like "3.9*x0 - 3.9*|x0|^2 + 0.016".
int kind_rank(Expr::Kind k) {
  switch (k) {
    case Expr::Kind::Var: return 0;
    case Expr::Kind::Signomial: return 1;
    case Expr::Kind::Op: return 2;
    case Expr::Kind::Prod: return 3;
    case Expr::Kind::Sum: return 4;
    case Expr::Kind::Const: return 5;
  }
  return 6;
}

int cmp_double(double a, double b) {
  if (a < b) return -1;
  if (a > b) return 1;
  return 0;
}

}  // namespace

int structural_compare(const Expr& a, const Expr& b) {
  const int ra = kind_rank(a.kind());
  const int rb = kind_rank(b.kind());
  if (ra != rb) return ra < rb ? -1 : 1;
  switch (a.kind()) {
    case Expr::Kind::Const:
      return cmp_double(a.value(), b.value());
    case Expr::Kind::Var:
      return cmp_double(a.var_index(), b.var_index());
    case Expr::Kind::Signomial: {
      if (int c = structural_compare(a.base(), b.base())) return c;
      return cmp_double(a.exponent(), b.exponent());
    }
    case Expr::Kind::Op: {
      if (a.op() != b.op())
        return static_cast<int>(a.op()) < static_cast<int>(b.op()) ? -1 : 1;
      return structural_compare(a.arg(), b.arg());
    }
    case Expr::Kind::Sum:
    case Expr::Kind::Prod: {
      const std::size_t n = std::min(a.kids().size(), b.kids().size());
      for (std::size_t i = 0; i < n; ++i)
        if (int c = structural_compare(a.kids()[i], b.kids()[i])) return c;
      if (a.kids().size() != b.kids().size())
        return a.kids().size() < b.kids().size() ? -1 : 1;
      return 0;
    }
  }
  return 0;
}

bool structural_equal(const Expr& a, const Expr& b) {
  return structural_compare(a, b) == 0;
}

namespace {

// Splits a canonical non-Sum term into (coefficient, coefficient-free core).
std::pair<double, Expr> split_term(const Expr& t) {
  if (t.kind() == Expr::Kind::Prod && !t.kids().empty() &&
      t.kids()[0].kind() == Expr::Kind::Const) {
    const double c = t.kids()[0].value();
    if (t.kids().size() == 2) return {c, t.kids()[1]};
    std::vector<Expr> rest(t.kids().begin() + 1, t.kids().end());
    return {c, Expr::prod(std::move(rest))};
  }
  return {1.0, t};
}

Expr rebuild_term(double coeff, const Expr& core) {
  if (coeff == 1.0) return core;
  std::vector<Expr> kids;
  kids.push_back(Expr::constant(coeff));
  if (core.kind() == Expr::Kind::Prod)
    kids.insert(kids.end(), core.kids().begin(), core.kids().end());
  else
    kids.push_back(core);
  return Expr::prod(std::move(kids));
}

Expr canon(const Expr& e);
Expr canon_prod(std::vector<Expr> parts);

Expr canon_op(UnaryOp op, Expr arg) {
  if (arg.kind() == Expr::Kind::Const) {
    const double v = arg.value();
    double r = 0.0;
    switch (op) {
      case UnaryOp::Sin: r = std::sin(v); break;
      case UnaryOp::Abs: r = std::fabs(v); break;
      case UnaryOp::Exp: r = std::exp(v); break;
      case UnaryOp::Sign: r = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); break;
    }
    if (std::isfinite(r)) return Expr::constant(r);
  }
  if (op == UnaryOp::Abs) {
    // |.| of an already nonnegative node is a no-op.
    if (arg.kind() == Expr::Kind::Signomial) return arg;
    if (arg.kind() == Expr::Kind::Op && arg.op() == UnaryOp::Abs) return arg;
    // |a*b| == |a|*|b| lets constant signs and signomial factors escape.
    if (arg.kind() == Expr::Kind::Prod) {
      bool helps = false;
      for (const Expr& k : arg.kids())
        if (k.kind() == Expr::Kind::Const || k.kind() == Expr::Kind::Signomial ||
            (k.kind() == Expr::Kind::Op && k.op() == UnaryOp::Abs))
          helps = true;
      if (helps) {
        std::vector<Expr> parts;
        for (const Expr& k : arg.kids()) parts.push_back(canon_op(UnaryOp::Abs, k));
        return canon_prod(std::move(parts));
      }
    }
  }
  return Expr::unary(op, std::move(arg));
}

Expr canon_signomial(Expr base, double p) {
  if (p == 0.0) return Expr::constant(1.0);
  if (base.kind() == Expr::Kind::Const) {
    const double r = std::pow(std::fabs(base.value()), p);
    if (std::isfinite(r)) return Expr::constant(r);
  }
  // ||b|^q|^p == |b|^(q*p) and ||b||^p == |b|^p.
  if (base.kind() == Expr::Kind::Signomial)
    return canon_signomial(base.base(), base.exponent() * p);
  if (base.kind() == Expr::Kind::Op && base.op() == UnaryOp::Abs)
    return canon_signomial(base.arg(), p);
  return Expr::signomial(std::move(base), p);
}

Expr canon_sum(std::vector<Expr> parts);

Expr canon_prod(std::vector<Expr> parts) {
  std::vector<Expr> factors;
  double coeff = 1.0;
  for (Expr& p : parts) {
    if (p.kind() == Expr::Kind::Prod) {
      for (const Expr& k : p.kids()) {
        if (k.kind() == Expr::Kind::Const)
          coeff *= k.value();
        else
          factors.push_back(k);
      }
    } else if (p.kind() == Expr::Kind::Const) {
      coeff *= p.value();
    } else {
      factors.push_back(std::move(p));
    }
  }
  if (coeff == 0.0) return Expr::constant(0.0);
  if (factors.empty()) return Expr::constant(coeff);
  // A constant times a sum distributes, keeping extracted readouts flat.
  if (factors.size() == 1 && factors[0].kind() == Expr::Kind::Sum && coeff != 1.0) {
    std::vector<Expr> terms;
    terms.reserve(factors[0].kids().size());
    for (const Expr& t : factors[0].kids())
      terms.push_back(canon_prod({Expr::constant(coeff), t}));
    return canon_sum(std::move(terms));
  }
  std::stable_sort(factors.begin(), factors.end(), [](const Expr& a, const Expr& b) {
    return structural_compare(a, b) < 0;
  });
  if (coeff == 1.0) {
    if (factors.size() == 1) return factors[0];
    return Expr::prod(std::move(factors));
  }
  std::vector<Expr> kids;
  kids.reserve(factors.size() + 1);
  kids.push_back(Expr::constant(coeff));
  for (Expr& f : factors) kids.push_back(std::move(f));
  return Expr::prod(std::move(kids));
}

Expr canon_sum(std::vector<Expr> parts) {
  std::vector<std::pair<double, Expr>> terms;  // (coefficient, core)
  double const_acc = 0.0;
  for (Expr& p : parts) {
    if (p.kind() == Expr::Kind::Sum) {
      for (const Expr& t : p.kids()) {
        if (t.kind() == Expr::Kind::Const)
          const_acc += t.value();
        else
          terms.push_back(split_term(t));
      }
    } else if (p.kind() == Expr::Kind::Const) {
      const_acc += p.value();
    } else {
      terms.push_back(split_term(p));
    }
  }
  std::stable_sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) {
    if (int c = structural_compare(a.second, b.second)) return c < 0;
    return a.first < b.first;
  });
  // Merge structurally identical cores.
  std::vector<Expr> out;
  std::size_t i = 0;
  while (i < terms.size()) {
    double c = terms[i].first;
    std::size_t j = i + 1;
    while (j < terms.size() && structural_equal(terms[i].second, terms[j].second)) {
      c += terms[j].first;
      ++j;
    }
    if (c != 0.0) out.push_back(rebuild_term(c, terms[i].second));
    i = j;
  }
  if (const_acc != 0.0) out.push_back(Expr::constant(const_acc));
  if (out.empty()) return Expr::constant(0.0);
  if (out.size() == 1) return out[0];
  return Expr::sum(std::move(out));
}

Expr canon(const Expr& e) {
  switch (e.kind()) {
    case Expr::Kind::Const:
    case Expr::Kind::Var:
      return e;
    case Expr::Kind::Op:
      return canon_op(e.op(), canon(e.arg()));
    case Expr::Kind::Signomial:
      return canon_signomial(canon(e.base()), e.exponent());
    case Expr::Kind::Prod: {
      std::vector<Expr> kids;
      kids.reserve(e.kids().size());
      for (const Expr& k : e.kids()) kids.push_back(canon(k));
      return canon_prod(std::move(kids));
    }
    case Expr::Kind::Sum: {
      std::vector<Expr> kids;
      kids.reserve(e.kids().size());
      for (const Expr& k : e.kids()) kids.push_back(canon(k));
      return canon_sum(std::move(kids));
    }
  }
  return e;
}

}  // namespace

Expr canonicalize(const Expr& e) { return canon(e); }

ExprSystem canonicalize(const ExprSystem& sys) {
  ExprSystem out;
  out.reserve(sys.size());
  for (const Expr& e : sys) out.push_back(canon(e));
  return out;
}

std::size_t count_constants(const Expr& e) {
  switch (e.kind()) {
    case Expr::Kind::Const:
      return (e.value() == 0.0 || e.value() == 1.0) ? 0u : 1u;
    case Expr::Kind::Var:
      return 0;
    case Expr::Kind::Signomial: {
      const double p = e.exponent();
      return count_constants(e.base()) + ((p == 0.0 || p == 1.0) ? 0u : 1u);
    }
    case Expr::Kind::Op:
      return count_constants(e.arg());
    case Expr::Kind::Sum:
    case Expr::Kind::Prod: {
      std::size_t n = 0;
      for (const Expr& k : e.kids()) n += count_constants(k);
      return n;
    }
  }
  return 0;
}

std::size_t count_constants(const ExprSystem& sys) {
  std::size_t n = 0;
  for (const Expr& e : sys) n += count_constants(e);
  return n;
}

}  // namespace mapid
