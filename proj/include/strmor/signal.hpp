// Copyright strmor authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef STRMOR_SIGNAL_HPP
#define STRMOR_SIGNAL_HPP

#include <cctype>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "common.hpp"

namespace strmor
{

//
// Time-domain input u(t). One expression per channel, separated by ';':
//   expr := term (('+'|'-') term)*;  term := unary (('*'|'/') unary)*;
//   unary := '-' unary | power;      power := primary ('^' unary)?
//   primary := number | 't' | 'pi' | fn '(' expr ')' | '(' expr ')',  fn in {sin, cos, exp}
//
class Signal
{
  struct Node
  {
    char op;  // 'n' number, 't' time, '+', '-', '*', '/', '^', 'm' negate, 's', 'c', 'e'
    double value = 0.0;
    std::unique_ptr<Node> a, b;
  };

  std::vector<std::shared_ptr<const Node>> channels_;
  std::string text_;

  static double eval(const Node &n, double t)
  {
    switch (n.op)
    {
      case 'n':
        return n.value;
      case 't':
        return t;
      case '+':
        return eval(*n.a, t) + eval(*n.b, t);
      case '-':
        return eval(*n.a, t) - eval(*n.b, t);
      case '*':
        return eval(*n.a, t) * eval(*n.b, t);
      case '/':
        return eval(*n.a, t) / eval(*n.b, t);
      case '^':
        return std::pow(eval(*n.a, t), eval(*n.b, t));
      case 'm':
        return -eval(*n.a, t);
      case 's':
        return std::sin(eval(*n.a, t));
      case 'c':
        return std::cos(eval(*n.a, t));
      case 'e':
        return std::exp(eval(*n.a, t));
    }
    return 0.0;
  }

  class Parser
  {
    std::string_view s_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string &msg) const
    {
      throw ParseError("input signal parse error at offset " + std::to_string(pos_) + ": " + msg +
                       " in '" + std::string(s_) + "'");
    }
    void ws()
    {
      while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_])))
      {
        pos_++;
      }
    }
    bool accept(char c)
    {
      ws();
      if (pos_ < s_.size() && s_[pos_] == c)
      {
        pos_++;
        return true;
      }
      return false;
    }
    static std::unique_ptr<Node> bin(char op, std::unique_ptr<Node> a, std::unique_ptr<Node> b)
    {
      auto n = std::make_unique<Node>();
      n->op = op;
      n->a = std::move(a);
      n->b = std::move(b);
      return n;
    }

  public:
    explicit Parser(std::string_view s) : s_(s) {}

    std::unique_ptr<Node> parse()
    {
      auto e = expr();
      ws();
      if (pos_ != s_.size())
      {
        fail("unexpected trailing input");
      }
      return e;
    }

    std::unique_ptr<Node> expr()
    {
      auto a = term();
      while (true)
      {
        if (accept('+'))
        {
          a = bin('+', std::move(a), term());
        }
        else if (accept('-'))
        {
          a = bin('-', std::move(a), term());
        }
        else
        {
          return a;
        }
      }
    }
    std::unique_ptr<Node> term()
    {
      auto a = unary();
      while (true)
      {
        if (accept('*'))
        {
          a = bin('*', std::move(a), unary());
        }
        else if (accept('/'))
        {
          a = bin('/', std::move(a), unary());
        }
        else
        {
          return a;
        }
      }
    }
    std::unique_ptr<Node> unary()
    {
      if (accept('-'))
      {
        return bin('m', unary(), nullptr);
      }
      auto a = primary();
      if (accept('^'))
      {
        a = bin('^', std::move(a), unary());
      }
      return a;
    }
    std::unique_ptr<Node> primary()
    {
      ws();
      if (pos_ >= s_.size())
      {
        fail("unexpected end of input");
      }
      if (accept('('))
      {
        auto e = expr();
        if (!accept(')'))
        {
          fail("expected ')'");
        }
        return e;
      }
      char c = s_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
      {
        double v = 0.0;
        auto res = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
        if (res.ec != std::errc())
        {
          fail("malformed number");
        }
        pos_ = static_cast<std::size_t>(res.ptr - s_.data());
        auto n = std::make_unique<Node>();
        n->op = 'n';
        n->value = v;
        return n;
      }
      std::size_t start = pos_;
      while (pos_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[pos_])))
      {
        pos_++;
      }
      std::string_view id = s_.substr(start, pos_ - start);
      auto n = std::make_unique<Node>();
      if (id == "t")
      {
        n->op = 't';
        return n;
      }
      if (id == "pi")
      {
        n->op = 'n';
        n->value = std::numbers::pi;
        return n;
      }
      if (id == "sin" || id == "cos" || id == "exp")
      {
        if (!accept('('))
        {
          fail("expected '(' after function name");
        }
        n->op = id == "sin" ? 's' : (id == "cos" ? 'c' : 'e');
        n->a = expr();
        if (!accept(')'))
        {
          fail("expected ')'");
        }
        return n;
      }
      pos_ = start;
      fail("unknown identifier '" + std::string(id) + "'");
    }
  };

public:
  Signal() = default;

  static Signal parse(const std::string &text)
  {
    Signal sig;
    sig.text_ = text;
    std::size_t start = 0;
    while (true)
    {
      std::size_t end = text.find(';', start);
      std::string part = text.substr(start, end == std::string::npos ? std::string::npos : end - start);
      sig.channels_.push_back(std::shared_ptr<const Node>(Parser(part).parse()));
      if (end == std::string::npos)
      {
        break;
      }
      start = end + 1;
    }
    return sig;
  }

  std::size_t channels() const { return channels_.size(); }
  const std::string &text() const { return text_; }

  void operator()(double t, VectorXd &u) const
  {
    for (std::size_t i = 0; i < channels_.size(); i++)
    {
      u(static_cast<Index>(i)) = eval(*channels_[i], t);
    }
  }
};

}  // namespace strmor

#endif  // STRMOR_SIGNAL_HPP
