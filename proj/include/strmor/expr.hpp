// Copyright strmor authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef STRMOR_EXPR_HPP
#define STRMOR_EXPR_HPP

#include <cctype>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "common.hpp"

namespace strmor
{

class ArityError : public ValidationError
{
public:
  using ValidationError::ValidationError;
};

class NonFiniteError : public NumericalError
{
public:
  using NumericalError::NumericalError;
};

class DomainError : public NumericalError
{
public:
  using NumericalError::NumericalError;
};

//
// Symbolic scalar function of the complex frequency s and a real parameter vector p. Nodes are
// immutable and shared, so copies are cheap and safe across threads.
//
class ScalarExpr
{
public:
  enum class Kind
  {
    Real,
    Complex,
    Freq,
    Param,
    Pow,
    Exp,
    Sum,
    Product,
    Neg
  };

private:
  struct Node
  {
    Kind kind;
    Complex value{0.0, 0.0};  // Real/Complex constants, Exp factor c (real part), Pow exponent
    int index = 0;            // Param index
    std::vector<std::shared_ptr<const Node>> args;
  };
  using NodePtr = std::shared_ptr<const Node>;

  NodePtr node_;

  explicit ScalarExpr(NodePtr n) : node_(std::move(n)) {}

  static ScalarExpr make(Kind k, Complex v = {}, int idx = 0, std::vector<NodePtr> args = {})
  {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->value = v;
    n->index = idx;
    n->args = std::move(args);
    return ScalarExpr(std::move(n));
  }

public:
  ScalarExpr() : ScalarExpr(constant(0.0)) {}

  static ScalarExpr constant(double v) { return make(Kind::Real, {v, 0.0}); }
  static ScalarExpr constant(Complex v)
  {
    return v.imag() == 0.0 ? constant(v.real()) : make(Kind::Complex, v);
  }
  static ScalarExpr freq() { return make(Kind::Freq); }
  static ScalarExpr param(int j)
  {
    if (j < 0)
    {
      throw ArityError("parameter index must be nonnegative");
    }
    return make(Kind::Param, {}, j);
  }
  static ScalarExpr pow(const ScalarExpr &base, double exponent)
  {
    if (!std::isfinite(exponent))
    {
      throw ParseError("non-finite exponent");
    }
    if (exponent == 1.0)
    {
      return base;
    }
    if (exponent == 0.0)
    {
      return constant(1.0);
    }
    if (base.is_zero() && exponent > 0.0)
    {
      return base;
    }
    return make(Kind::Pow, {exponent, 0.0}, 0, {base.node_});
  }
  // exp(c * arg) with real c.
  static ScalarExpr exp(double c, const ScalarExpr &arg)
  {
    if (c == 0.0 || arg.is_zero())
    {
      return constant(1.0);
    }
    return make(Kind::Exp, {c, 0.0}, 0, {arg.node_});
  }
  static ScalarExpr sum(const std::vector<ScalarExpr> &terms)
  {
    std::vector<NodePtr> args;
    for (const auto &t : terms)
    {
      if (!t.is_zero())
      {
        args.push_back(t.node_);
      }
    }
    if (args.empty())
    {
      return constant(0.0);
    }
    if (args.size() == 1)
    {
      return ScalarExpr(args[0]);
    }
    return make(Kind::Sum, {}, 0, std::move(args));
  }
  static ScalarExpr product(const std::vector<ScalarExpr> &factors)
  {
    std::vector<NodePtr> args;
    for (const auto &f : factors)
    {
      if (f.is_zero())
      {
        return constant(0.0);
      }
      if (!f.is_one())
      {
        args.push_back(f.node_);
      }
    }
    if (args.empty())
    {
      return constant(1.0);
    }
    if (args.size() == 1)
    {
      return ScalarExpr(args[0]);
    }
    return make(Kind::Product, {}, 0, std::move(args));
  }
  static ScalarExpr neg(const ScalarExpr &a)
  {
    if (a.kind() == Kind::Real || a.kind() == Kind::Complex)
    {
      return constant(-a.node_->value);
    }
    if (a.kind() == Kind::Neg)
    {
      return ScalarExpr(a.node_->args[0]);
    }
    return make(Kind::Neg, {}, 0, {a.node_});
  }

  Kind kind() const { return node_->kind; }
  bool is_constant() const { return kind() == Kind::Real || kind() == Kind::Complex; }
  bool is_zero() const { return is_constant() && node_->value == Complex(0.0, 0.0); }
  bool is_one() const { return is_constant() && node_->value == Complex(1.0, 0.0); }
  Complex constant_value() const { return node_->value; }
  double exponent() const { return node_->value.real(); }
  double exp_factor() const { return node_->value.real(); }
  int param_index() const { return node_->index; }
  std::size_t num_args() const { return node_->args.size(); }
  ScalarExpr arg(std::size_t i) const { return ScalarExpr(node_->args.at(i)); }

  // Number of parameter components referenced (1 + largest index, or 0).
  int arity() const
  {
    if (kind() == Kind::Param)
    {
      return node_->index + 1;
    }
    int a = 0;
    for (std::size_t i = 0; i < num_args(); i++)
    {
      a = std::max(a, arg(i).arity());
    }
    return a;
  }

  bool depends_on_s() const
  {
    if (kind() == Kind::Freq)
    {
      return true;
    }
    for (std::size_t i = 0; i < num_args(); i++)
    {
      if (arg(i).depends_on_s())
      {
        return true;
      }
    }
    return false;
  }

  bool depends_on_p() const { return arity() > 0; }

  Complex operator()(Complex s, std::span<const double> p = {}) const
  {
    if (static_cast<int>(p.size()) < arity())
    {
      throw ArityError("expression " + to_string() + " needs " + std::to_string(arity()) +
                       " parameter(s), got " + std::to_string(p.size()));
    }
    Complex v = eval_node(*node_, s, p);
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
    {
      throw NonFiniteError("non-finite value of " + to_string() + " at " +
                           format_point(s, {p.begin(), p.end()}));
    }
    return v;
  }
  Complex eval(Complex s, std::span<const double> p = {}) const { return (*this)(s, p); }
  Complex eval(Complex s, const std::vector<double> &p) const
  {
    return (*this)(s, std::span<const double>(p));
  }

  // Symbolic derivative; var < 0 means d/ds, var = j >= 0 means d/dp_j.
  ScalarExpr diff(int var) const
  {
    switch (kind())
    {
      case Kind::Real:
      case Kind::Complex:
        return constant(0.0);
      case Kind::Freq:
        return constant(var < 0 ? 1.0 : 0.0);
      case Kind::Param:
        return constant(var == node_->index ? 1.0 : 0.0);
      case Kind::Pow:
        {
          ScalarExpr du = arg(0).diff(var);
          if (du.is_zero())
          {
            return constant(0.0);
          }
          double a = exponent();
          return product({constant(a), pow(arg(0), a - 1.0), du});
        }
      case Kind::Exp:
        {
          ScalarExpr du = arg(0).diff(var);
          if (du.is_zero())
          {
            return constant(0.0);
          }
          return product({constant(exp_factor()), *this, du});
        }
      case Kind::Sum:
        {
          std::vector<ScalarExpr> terms;
          for (std::size_t i = 0; i < num_args(); i++)
          {
            terms.push_back(arg(i).diff(var));
          }
          return sum(terms);
        }
      case Kind::Product:
        {
          std::vector<ScalarExpr> terms;
          for (std::size_t i = 0; i < num_args(); i++)
          {
            ScalarExpr di = arg(i).diff(var);
            if (di.is_zero())
            {
              continue;
            }
            std::vector<ScalarExpr> f;
            for (std::size_t j = 0; j < num_args(); j++)
            {
              f.push_back(j == i ? di : arg(j));
            }
            terms.push_back(product(f));
          }
          return sum(terms);
        }
      case Kind::Neg:
        return neg(arg(0).diff(var));
    }
    return constant(0.0);
  }
  ScalarExpr diff_s() const { return diff(-1); }
  ScalarExpr diff_p(int j) const { return diff(j); }

  // Fully parenthesized text form; parse(to_string()) reproduces every constant bit for bit.
  std::string to_string() const { return print(*node_); }

  static ScalarExpr parse(std::string_view text);

  friend ScalarExpr operator+(const ScalarExpr &a, const ScalarExpr &b) { return sum({a, b}); }
  friend ScalarExpr operator-(const ScalarExpr &a, const ScalarExpr &b)
  {
    return sum({a, neg(b)});
  }
  friend ScalarExpr operator*(const ScalarExpr &a, const ScalarExpr &b)
  {
    return product({a, b});
  }
  friend ScalarExpr operator-(const ScalarExpr &a) { return neg(a); }

private:
  static Complex eval_node(const Node &n, Complex s, std::span<const double> p)
  {
    switch (n.kind)
    {
      case Kind::Real:
      case Kind::Complex:
        return n.value;
      case Kind::Freq:
        return s;
      case Kind::Param:
        return p[n.index];
      case Kind::Pow:
        {
          Complex b = eval_node(*n.args[0], s, p);
          double a = n.value.real();
          double ai;
          if (std::modf(a, &ai) == 0.0 && std::abs(a) <= 64.0)
          {
            long k = static_cast<long>(std::abs(ai));
            Complex acc(1.0, 0.0), base = b;
            while (k > 0)
            {
              if (k & 1)
              {
                acc *= base;
              }
              base *= base;
              k >>= 1;
            }
            return a < 0.0 ? Complex(1.0, 0.0) / acc : acc;
          }
          if (b.imag() == 0.0 && b.real() < 0.0)
          {
            throw DomainError("fractional power of a value on the negative real axis");
          }
          return std::pow(b, a);
        }
      case Kind::Exp:
        return std::exp(n.value.real() * eval_node(*n.args[0], s, p));
      case Kind::Sum:
        {
          Complex acc = eval_node(*n.args[0], s, p);
          for (std::size_t i = 1; i < n.args.size(); i++)
          {
            acc += eval_node(*n.args[i], s, p);
          }
          return acc;
        }
      case Kind::Product:
        {
          Complex acc = eval_node(*n.args[0], s, p);
          for (std::size_t i = 1; i < n.args.size(); i++)
          {
            acc *= eval_node(*n.args[i], s, p);
          }
          return acc;
        }
      case Kind::Neg:
        return -eval_node(*n.args[0], s, p);
    }
    return {};
  }

  static std::string print(const Node &n)
  {
    switch (n.kind)
    {
      case Kind::Real:
        return n.value.real() < 0.0 || std::signbit(n.value.real())
                   ? "(" + format_double(n.value.real()) + ")"
                   : format_double(n.value.real());
      case Kind::Complex:
        return format_complex(n.value);
      case Kind::Freq:
        return "s";
      case Kind::Param:
        return "p" + std::to_string(n.index);
      case Kind::Pow:
        return "(" + print(*n.args[0]) + ")^(" + format_double(n.value.real()) + ")";
      case Kind::Exp:
        if (n.value.real() == 1.0)
        {
          return "exp(" + print(*n.args[0]) + ")";
        }
        return "exp((" + format_double(n.value.real()) + ")*(" + print(*n.args[0]) + "))";
      case Kind::Sum:
      case Kind::Product:
        {
          std::string out = "(";
          for (std::size_t i = 0; i < n.args.size(); i++)
          {
            if (i)
            {
              out += n.kind == Kind::Sum ? "+" : "*";
            }
            out += "(" + print(*n.args[i]) + ")";
          }
          return out + ")";
        }
      case Kind::Neg:
        return "(-(" + print(*n.args[0]) + "))";
    }
    return {};
  }

  friend class ExprParser;
};

//
// Recursive-descent parser.
//   expr    := term (('+'|'-') term)*
//   term    := unary (('*'|'/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' exponent)?
//   exponent:= ['-'|'+'] number | '(' ['-'|'+'] number ')'
//   primary := number ['i'] | 'i' | 's' | 'p'digits | 'exp' '(' expr ')' | '(' expr ')'
//
class ExprParser
{
public:
  explicit ExprParser(std::string_view text) : src_(text) {}

  ScalarExpr parse()
  {
    ScalarExpr e = expr();
    skip_ws();
    if (pos_ != src_.size())
    {
      fail("unexpected trailing input");
    }
    return e;
  }

private:
  std::string_view src_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string &msg) const
  {
    throw ParseError("expression parse error at offset " + std::to_string(pos_) + ": " + msg +
                     " in '" + std::string(src_) + "'");
  }

  void skip_ws()
  {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_])))
    {
      pos_++;
    }
  }

  bool accept(char c)
  {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c)
    {
      pos_++;
      return true;
    }
    return false;
  }

  void expect(char c)
  {
    if (!accept(c))
    {
      fail(std::string("expected '") + c + "'");
    }
  }

  static ScalarExpr fold_sum(const std::vector<ScalarExpr> &terms)
  {
    bool all_const = !terms.empty();
    for (const auto &t : terms)
    {
      all_const = all_const && t.is_constant();
    }
    if (all_const)
    {
      Complex acc = terms[0].constant_value();
      for (std::size_t i = 1; i < terms.size(); i++)
      {
        acc += terms[i].constant_value();
      }
      return ScalarExpr::constant(acc);
    }
    return ScalarExpr::sum(terms);
  }

  ScalarExpr expr()
  {
    std::vector<ScalarExpr> terms{term()};
    while (true)
    {
      if (accept('+'))
      {
        terms.push_back(term());
      }
      else if (accept('-'))
      {
        terms.push_back(ScalarExpr::neg(term()));
      }
      else
      {
        break;
      }
    }
    return terms.size() == 1 ? terms[0] : fold_sum(terms);
  }

  ScalarExpr term()
  {
    std::vector<ScalarExpr> factors{unary()};
    while (true)
    {
      if (accept('*'))
      {
        factors.push_back(unary());
      }
      else if (accept('/'))
      {
        factors.push_back(ScalarExpr::pow(unary(), -1.0));
      }
      else
      {
        break;
      }
    }
    return factors.size() == 1 ? factors[0] : ScalarExpr::product(factors);
  }

  ScalarExpr unary()
  {
    if (accept('-'))
    {
      return ScalarExpr::neg(unary());
    }
    return power();
  }

  ScalarExpr power()
  {
    ScalarExpr base = primary();
    if (accept('^'))
    {
      bool paren = accept('(');
      double sign = 1.0;
      if (accept('-'))
      {
        sign = -1.0;
      }
      else
      {
        accept('+');
      }
      skip_ws();
      double v = number();
      if (paren)
      {
        expect(')');
      }
      return ScalarExpr::pow(base, sign * v);
    }
    return base;
  }

  double number()
  {
    std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.'))
    {
      pos_++;
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E'))
    {
      std::size_t q = pos_ + 1;
      if (q < src_.size() && (src_[q] == '+' || src_[q] == '-'))
      {
        q++;
      }
      if (q < src_.size() && std::isdigit(static_cast<unsigned char>(src_[q])))
      {
        pos_ = q;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
        {
          pos_++;
        }
      }
    }
    if (start == pos_)
    {
      fail("expected a number");
    }
    double v = 0.0;
    auto res = std::from_chars(src_.data() + start, src_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != src_.data() + pos_)
    {
      fail("malformed number");
    }
    return v;
  }

  bool at_ident_char(std::size_t q) const
  {
    return q < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[q])) || src_[q] == '_');
  }

  ScalarExpr primary()
  {
    skip_ws();
    if (pos_ >= src_.size())
    {
      fail("unexpected end of input");
    }
    char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
    {
      double v = number();
      if (pos_ < src_.size() && src_[pos_] == 'i' && !at_ident_char(pos_ + 1))
      {
        pos_++;
        return ScalarExpr::constant(Complex(0.0, v));
      }
      return ScalarExpr::constant(v);
    }
    if (c == '(')
    {
      pos_++;
      ScalarExpr e = expr();
      expect(')');
      return e;
    }
    if (c == 's' && !at_ident_char(pos_ + 1))
    {
      pos_++;
      return ScalarExpr::freq();
    }
    if (c == 'i' && !at_ident_char(pos_ + 1))
    {
      pos_++;
      return ScalarExpr::constant(Complex(0.0, 1.0));
    }
    if (c == 'p' && pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))
    {
      pos_++;
      std::size_t start = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
      {
        pos_++;
      }
      int j = 0;
      std::from_chars(src_.data() + start, src_.data() + pos_, j);
      return ScalarExpr::param(j);
    }
    if (src_.substr(pos_, 3) == "exp" && !at_ident_char(pos_ + 3))
    {
      pos_ += 3;
      expect('(');
      ScalarExpr arg = expr();
      expect(')');
      // Pull a leading real constant out as the exponential's factor.
      if (arg.kind() == ScalarExpr::Kind::Neg)
      {
        return ScalarExpr::exp(-1.0, arg.arg(0));
      }
      if (arg.kind() == ScalarExpr::Kind::Product && arg.arg(0).kind() == ScalarExpr::Kind::Real)
      {
        std::vector<ScalarExpr> rest;
        for (std::size_t i = 1; i < arg.num_args(); i++)
        {
          rest.push_back(arg.arg(i));
        }
        return ScalarExpr::exp(arg.arg(0).constant_value().real(), ScalarExpr::product(rest));
      }
      return ScalarExpr::exp(1.0, arg);
    }
    fail(std::string("unexpected character '") + c + "'");
  }
};

inline ScalarExpr ScalarExpr::parse(std::string_view text)
{
  return ExprParser(text).parse();
}

}  // namespace strmor

#endif  // STRMOR_EXPR_HPP
