#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

namespace mapid {

using StateVec = std::vector<double>;

enum class UnaryOp { Sin, Abs, Exp, Sign };

const char* unary_op_name(UnaryOp op) noexcept;

// Immutable symbolic expression tree. An Expr is a cheap value handle over a
// shared, never-mutated node, so copies are O(1) and subtrees can be shared.
//
// Node kinds:
//   Const(v)            numeric literal
//   Var(i)              state component x_i (0-based)
//   Sum(terms...)       n-ary addition
//   Prod(factors...)    n-ary multiplication
//   Signomial(base, e)  |base|^e  (absolute-valued power, real exponent)
//   Op(name, arg)       sin / abs / exp / sign
class Expr {
 public:
  enum class Kind { Const, Var, Sum, Prod, Signomial, Op };

  struct Node {
    Kind kind;
    double value = 0.0;        // Const
    int var_index = 0;         // Var
    double exponent = 0.0;     // Signomial
    UnaryOp op = UnaryOp::Sin; // Op
    std::vector<Expr> kids;    // Sum/Prod terms, Signomial base, Op arg
  };

  Expr() : Expr(constant(0.0)) {}

  static Expr constant(double v);
  static Expr var(int index);
  static Expr sum(std::vector<Expr> terms);
  static Expr prod(std::vector<Expr> factors);
  static Expr signomial(Expr base, double exponent);
  static Expr unary(UnaryOp op, Expr arg);

  Kind kind() const noexcept { return node_->kind; }
  double value() const noexcept { return node_->value; }
  int var_index() const noexcept { return node_->var_index; }
  double exponent() const noexcept { return node_->exponent; }
  UnaryOp op() const noexcept { return node_->op; }
  const std::vector<Expr>& kids() const noexcept { return node_->kids; }
  const Expr& base() const noexcept { return node_->kids[0]; }
  const Expr& arg() const noexcept { return node_->kids[0]; }

  bool is_const(double v) const noexcept {
    return kind() == Kind::Const && value() == v;
  }

 private:
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

// One expression per output state dimension.
using ExprSystem = std::vector<Expr>;

// Recursive evaluation. Signomial evaluates |base|^exponent with 0^0 = 1;
// 0 raised to a negative power throws EvalError carrying the subexpression.
// sign(0) = 0.
double evaluate(const Expr& e, const StateVec& x);
StateVec evaluate(const ExprSystem& sys, const StateVec& x);

// Highest variable index referenced, plus one. 0 for variable-free trees.
int arity(const Expr& e);
int arity(const ExprSystem& sys);

// Canonical form: flattens nested Sums/Prods, folds constant subtrees,
// distributes constant coefficients over Sum factors, merges each Prod's
// constants into one leading coefficient, sorts by a stable structural key
// and merges structurally identical additive terms.
Expr canonicalize(const Expr& e);
ExprSystem canonicalize(const ExprSystem& sys);

// Total order on trees; canonicalize sorts with this. Returns <0, 0, >0.
int structural_compare(const Expr& a, const Expr& b);
bool structural_equal(const Expr& a, const Expr& b);

// Number of numeric-constant leaf positions (Const leaves and Signomial
// exponents), excluding exact 0s and 1s left behind by canonicalization.
// Expects a canonicalized tree.
std::size_t count_constants(const Expr& e);
std::size_t count_constants(const ExprSystem& sys);

struct FormatOptions {
  int significant_digits = 6;  // 17 round-trips doubles exactly
};

// Deterministic text in the parse grammar. parse(format(e, exact)) is
// structurally equal to canonicalize(e).
std::string format(const Expr& e, const FormatOptions& opts = {});
std::string format(const ExprSystem& sys, const FormatOptions& opts = {});
inline FormatOptions exact_format() { return FormatOptions{17}; }

// Parses the expression grammar; see README for the full syntax. Throws
// ParseError with a byte position on bad input. The result is canonicalized.
Expr parse(const std::string& text);
// Semicolon-separated component list ("expr ; expr") for systems.
ExprSystem parse_system(const std::string& text);

}  // namespace mapid
