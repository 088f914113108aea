#include <cctype>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "mapid/errors.hpp"
#include "mapid/expr.hpp"

namespace mapid {

namespace {

std::string fmt_number(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

// True when the term would print with a leading minus, so a Sum can render
// it as " - <negated>" instead of " + -...".
bool leading_negative(const Expr& t) {
  if (t.kind() == Expr::Kind::Const) return t.value() < 0.0;
  if (t.kind() == Expr::Kind::Prod && !t.kids().empty() &&
      t.kids()[0].kind() == Expr::Kind::Const)
    return t.kids()[0].value() < 0.0;
  return false;
}

Expr negate_leading(const Expr& t) {
  if (t.kind() == Expr::Kind::Const) return Expr::constant(-t.value());
  std::vector<Expr> kids = t.kids();
  kids[0] = Expr::constant(-kids[0].value());
  if (kids.size() == 2 && kids[0].is_const(1.0)) return kids[1];
  return Expr::prod(std::move(kids));
}

void write(const Expr& e, const FormatOptions& o, std::string& out);

void write_factor(const Expr& f, const FormatOptions& o, std::string& out) {
  const bool parens = f.kind() == Expr::Kind::Sum || f.kind() == Expr::Kind::Prod ||
                      (f.kind() == Expr::Kind::Const && f.value() < 0.0);
  if (parens) out += '(';
  write(f, o, out);
  if (parens) out += ')';
}

void write(const Expr& e, const FormatOptions& o, std::string& out) {
  switch (e.kind()) {
    case Expr::Kind::Const:
      out += fmt_number(e.value(), o.significant_digits);
      return;
    case Expr::Kind::Var:
      out += 'x';
      out += std::to_string(e.var_index());
      return;
    case Expr::Kind::Sum: {
      for (std::size_t i = 0; i < e.kids().size(); ++i) {
        const Expr& t = e.kids()[i];
        if (i == 0) {
          write(t, o, out);
        } else if (leading_negative(t)) {
          out += " - ";
          write(negate_leading(t), o, out);
        } else {
          out += " + ";
          write(t, o, out);
        }
      }
      return;
    }
    case Expr::Kind::Prod: {
      const std::vector<Expr>& kids = e.kids();
      std::size_t start = 0;
      // A negative coefficient prints as a leading minus; "-12*x0" parses
      // back to the same tree, so no parentheses are needed.
      if (!kids.empty() && kids[0].kind() == Expr::Kind::Const &&
          kids[0].value() < 0.0 && kids.size() > 1) {
        out += '-';
        const double mag = -kids[0].value();
        if (mag != 1.0) {
          out += fmt_number(mag, o.significant_digits);
          out += '*';
        }
        start = 1;
      }
      for (std::size_t i = start; i < kids.size(); ++i) {
        if (i > start) out += '*';
        write_factor(kids[i], o, out);
      }
      return;
    }
    case Expr::Kind::Signomial: {
      out += '|';
      write(e.base(), o, out);
      out += '|';
      if (e.exponent() != 1.0) {
        out += '^';
        out += fmt_number(e.exponent(), o.significant_digits);
      }
      return;
    }
    case Expr::Kind::Op:
      out += unary_op_name(e.op());
      out += '(';
      write(e.arg(), o, out);
      out += ')';
      return;
  }
}

}  // namespace

std::string format(const Expr& e, const FormatOptions& opts) {
  std::string out;
  write(e, opts, out);
  return out;
}

std::string format(const ExprSystem& sys, const FormatOptions& opts) {
  std::string out;
  for (std::size_t i = 0; i < sys.size(); ++i) {
    if (i) out += " ; ";
    write(sys[i], opts, out);
  }
  return out;
}

namespace {

class Parser {
 public:
  explicit Parser(const std::string& text) : s_(text) {}

  Expr parse_single() {
    Expr e = parse_expr();
    skip_ws();
    if (pos_ < s_.size()) fail("unexpected trailing input");
    return e;
  }

  ExprSystem parse_all() {
    ExprSystem sys;
    sys.push_back(parse_expr());
    skip_ws();
    while (pos_ < s_.size() && s_[pos_] == ';') {
      ++pos_;
      sys.push_back(parse_expr());
      skip_ws();
    }
    if (pos_ < s_.size()) fail("unexpected trailing input");
    return sys;
  }

 private:
  Expr parse_expr() {
    skip_ws();
    Expr e = parse_sum();
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] != ';')
      fail("unexpected trailing input");
    return e;
  }

  [[noreturn]] void fail(const std::string& msg) { throw ParseError(msg, pos_); }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }

  Expr parse_sum() {
    std::vector<Expr> terms;
    terms.push_back(parse_term());
    for (;;) {
      const char c = peek();
      if (c == '+') {
        ++pos_;
        terms.push_back(parse_term());
      } else if (c == '-') {
        ++pos_;
        terms.push_back(Expr::prod({Expr::constant(-1.0), parse_term()}));
      } else {
        break;
      }
    }
    if (terms.size() == 1) return terms[0];
    return Expr::sum(std::move(terms));
  }

  Expr parse_term() {
    std::vector<Expr> factors;
    factors.push_back(parse_unary());
    for (;;) {
      const char c = peek();
      if (c == '*') {
        ++pos_;
        factors.push_back(parse_unary());
      } else if (c == '/') {
        ++pos_;
        factors.push_back(reciprocal(parse_unary()));
      } else {
        break;
      }
    }
    if (factors.size() == 1) return factors[0];
    return Expr::prod(std::move(factors));
  }

  Expr reciprocal(const Expr& d) {
    if (d.kind() == Expr::Kind::Const) {
      if (d.value() == 0.0) fail("division by zero");
      return Expr::constant(1.0 / d.value());
    }
    if (d.kind() == Expr::Kind::Signomial)
      return Expr::signomial(d.base(), -d.exponent());
    if (d.kind() == Expr::Kind::Op && d.op() == UnaryOp::Abs)
      return Expr::signomial(d.arg(), -1.0);
    fail("divisor must be a number or an absolute-valued factor");
  }

  Expr parse_unary() {
    if (eat('-')) return Expr::prod({Expr::constant(-1.0), parse_unary()});
    if (eat('+')) return parse_unary();
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_primary();
    if (peek() != '^') return base;
    ++pos_;
    const double p = parse_signed_number();
    // |e|^p stacks onto the bare |e| primary and folds in canonicalization.
    if (base.kind() == Expr::Kind::Signomial)
      return Expr::signomial(base, p);
    const bool integral = p == std::floor(p);
    if (integral && p >= 0.0 && p <= 4.0) {
      const int n = static_cast<int>(p);
      if (n == 0) return Expr::constant(1.0);
      if (n == 1) return base;
      std::vector<Expr> reps(static_cast<std::size_t>(n), base);
      return Expr::prod(std::move(reps));
    }
    return Expr::signomial(base, p);
  }

  Expr parse_primary() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = parse_sum();
      if (!eat(')')) fail("expected ')'");
      return e;
    }
    if (c == '|') {
      ++pos_;
      Expr e = parse_sum();
      if (!eat('|')) fail("expected closing '|'");
      return Expr::signomial(std::move(e), 1.0);
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
      return Expr::constant(parse_number());
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_')
      return parse_ident();
    fail(std::string("unexpected character '") + c + "'");
  }

  Expr parse_ident() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
      ++pos_;
    const std::string name = s_.substr(start, pos_ - start);
    if (name.size() > 1 && (name[0] == 'x' || name[0] == 'X')) {
      bool digits = true;
      for (std::size_t i = 1; i < name.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(name[i]))) digits = false;
      if (digits) {
        try {
          return Expr::var(std::stoi(name.substr(1)));
        } catch (const std::exception&) {
          pos_ = start;
          fail("variable index out of range");
        }
      }
    }
    UnaryOp op;
    if (name == "sin") op = UnaryOp::Sin;
    else if (name == "abs") op = UnaryOp::Abs;
    else if (name == "exp") op = UnaryOp::Exp;
    else if (name == "sign") op = UnaryOp::Sign;
    else {
      pos_ = start;
      fail("unknown identifier '" + name + "'");
    }
    if (!eat('(')) fail("expected '(' after '" + name + "'");
    Expr arg = parse_sum();
    if (!eat(')')) fail("expected ')'");
    return Expr::unary(op, std::move(arg));
  }

  double parse_signed_number() {
    skip_ws();
    double sign = 1.0;
    if (pos_ < s_.size() && (s_[pos_] == '-' || s_[pos_] == '+')) {
      if (s_[pos_] == '-') sign = -1.0;
      ++pos_;
    }
    return sign * parse_number();
  }

  double parse_number() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (pos_ < s_.size() && s_[pos_] == '.') {
      ++pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    if (pos_ == start || (pos_ == start + 1 && s_[start] == '.'))
      fail("expected a number");
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t mark = pos_;
      ++pos_;
      if (pos_ < s_.size() && (s_[pos_] == '-' || s_[pos_] == '+')) ++pos_;
      if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      } else {
        pos_ = mark;
      }
    }
    try {
      return std::stod(s_.substr(start, pos_ - start));
    } catch (const std::exception&) {
      pos_ = start;
      fail("malformed number");
    }
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse(const std::string& text) {
  Parser p(text);
  Expr e = p.parse_single();
  return canonicalize(e);
}

ExprSystem parse_system(const std::string& text) {
  Parser p(text);
  ExprSystem sys = p.parse_all();
  return canonicalize(sys);
}

}  // namespace mapid
