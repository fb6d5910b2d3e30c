#pragma once

// Recursive-descent parser for the expression grammar:
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' ['-'] integer)?
//   primary := number | 'x' index | func '(' expr ')'
//            | 'bump' '(' expr ';' number ',' number ')' | '(' expr ')'
//   func    := exp | sin | cos | atan | sqrt | flatexp

#include <cctype>
#include <cstdlib>
#include <string>
#include <string_view>

#include "subcart/error.hpp"
#include "subcart/expr.hpp"

namespace subcart {

namespace detail {

class Parser {
 public:
  Parser(std::string_view text, int dim) : text_(text), dim_(dim) {}

  SmoothExpr parse() {
    SmoothExpr e = expr();
    skip();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { fail_at(pos_, msg); }

  [[noreturn]] void fail_at(std::size_t at, const std::string& msg) const {
    throw Error(ErrorKind::Parse, "syntax error at position " + std::to_string(at + 1) + ": " + msg +
                                      " in \"" + std::string(text_) + "\"");
  }

  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      fail(pos_ < text_.size() ? "expected '" + std::string(1, c) + "' but found '" +
                                     std::string(1, text_[pos_]) + "'"
                               : "expected '" + std::string(1, c) + "' at end of input");
    }
  }

  SmoothExpr expr() {
    SmoothExpr lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = lhs + term();
      } else if (accept('-')) {
        lhs = lhs - term();
      } else {
        return lhs;
      }
    }
  }

  SmoothExpr term() {
    SmoothExpr lhs = unary();
    for (;;) {
      if (accept('*')) {
        lhs = lhs * unary();
      } else if (accept('/')) {
        lhs = lhs / unary();
      } else {
        return lhs;
      }
    }
  }

  SmoothExpr unary() {
    if (accept('-')) return -unary();
    return power();
  }

  SmoothExpr power() {
    SmoothExpr base = primary();
    if (!accept('^')) return base;
    const bool negative = accept('-');
    skip();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (start == pos_) fail("exponent must be an integer");
    if (pos_ < text_.size() && (text_[pos_] == '.' || text_[pos_] == 'e' || text_[pos_] == 'E')) {
      fail_at(start, "exponent must be an integer");
    }
    const int k = std::stoi(std::string(text_.substr(start, pos_ - start)));
    skip();
    if (pos_ < text_.size() && text_[pos_] == '^') fail("chained exponents need parentheses");
    return pow(base, negative ? -k : k);
  }

  double number() {
    skip();
    const std::size_t start = pos_;
    if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+')) ++pos_;
    bool digits = false;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
      digits = true;
    }
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        ++pos_;
        digits = true;
      }
    }
    if (!digits) fail_at(start, "expected a number");
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+')) ++pos_;
      bool exp_digits = false;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        ++pos_;
        exp_digits = true;
      }
      if (!exp_digits) pos_ = save;
    }
    return std::strtod(std::string(text_.substr(start, pos_ - start)).c_str(), nullptr);
  }

  SmoothExpr primary() {
    skip();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      SmoothExpr e = expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      return SmoothExpr::constant(dim_, number());
    }
    if (!std::isalpha(static_cast<unsigned char>(c))) fail("unexpected '" + std::string(1, c) + "'");

    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    const std::string name(text_.substr(start, pos_ - start));

    if (name == "x") {
      const std::size_t digits_at = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (digits_at == pos_) fail_at(start, "variable needs an index, e.g. x1");
      const long index = std::stol(std::string(text_.substr(digits_at, pos_ - digits_at)));
      if (index < 1 || index > dim_) {
        fail_at(start, "variable x" + std::to_string(index) + " out of range for dimension " +
                           std::to_string(dim_));
      }
      return SmoothExpr::variable(dim_, static_cast<int>(index - 1));
    }
    if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      fail_at(start, "unknown identifier '" + name + text_[pos_] + "...'");
    }
    if (name == "bump") {
      expect('(');
      SmoothExpr arg = expr();
      expect(';');
      const std::size_t at = pos_;
      const double a = number();
      expect(',');
      const double b = number();
      expect(')');
      if (!(a >= 0.0 && a < b)) fail_at(at, "bump parameters must satisfy 0 <= a < b");
      return bump(arg, a, b);
    }
    using Fn = SmoothExpr (*)(const SmoothExpr&);
    Fn fn = nullptr;
    if (name == "exp") fn = [](const SmoothExpr& e) { return subcart::exp(e); };
    else if (name == "sin") fn = [](const SmoothExpr& e) { return subcart::sin(e); };
    else if (name == "cos") fn = [](const SmoothExpr& e) { return subcart::cos(e); };
    else if (name == "atan") fn = [](const SmoothExpr& e) { return subcart::atan(e); };
    else if (name == "sqrt") fn = [](const SmoothExpr& e) { return subcart::sqrt(e); };
    else if (name == "flatexp") fn = [](const SmoothExpr& e) { return subcart::flatexp(e); };
    else fail_at(start, "unknown identifier '" + name + "'");
    expect('(');
    SmoothExpr arg = expr();
    expect(')');
    return fn(arg);
  }

  std::string_view text_;
  int dim_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parse `text` as a smooth function on R^ambient_dim.
inline SmoothExpr parse_expr(std::string_view text, int ambient_dim) {
  if (ambient_dim < 1) throw Error(ErrorKind::Invalid, "ambient dimension must be positive");
  return detail::Parser(text, ambient_dim).parse();
}

inline ExprVec parse_exprs(const std::vector<std::string>& texts, int ambient_dim) {
  std::vector<SmoothExpr> comps;
  comps.reserve(texts.size());
  for (const auto& t : texts) comps.push_back(parse_expr(t, ambient_dim));
  return {ambient_dim, std::move(comps)};
}

}  // namespace subcart
