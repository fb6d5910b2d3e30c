#include <gtest/gtest.h>

#include "subcart/parse.hpp"

using namespace subcart;

namespace {

ErrorKind kind_of(const char* text, int dim) {
  try {
    parse_expr(text, dim);
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error for " << text;
  return ErrorKind::Invalid;
}

}  // namespace

TEST(Parse, AcceptsGrammar) {
  EXPECT_NO_THROW(parse_expr("x1^2 + x2^2 - 1", 2));
  EXPECT_NO_THROW(parse_expr("  exp( -x1 )*sin(x1)/ (2+cos(x1)) ", 1));
  EXPECT_NO_THROW(parse_expr("atan(x1) - sqrt(1 + x1^2) + flatexp(x1)", 1));
  EXPECT_NO_THROW(parse_expr("1.5e-3 * x1 + .25", 1));
  EXPECT_NO_THROW(parse_expr("x1^-2", 1));
}

TEST(Parse, BumpNodeCarriesParameters) {
  auto e = parse_expr("bump(x1; 1, 2)", 1);
  ASSERT_EQ(e.root()->op, Op::Bump);
  EXPECT_EQ(e.root()->bump.a, 1.0);
  EXPECT_EQ(e.root()->bump.b, 2.0);
}

TEST(Parse, Precedence) {
  auto e = parse_expr("-x1^2 + 2*3 - 4/2", 1);
  EXPECT_DOUBLE_EQ(e(Point{{3.0}}), -9.0 + 6.0 - 2.0);
  auto f = parse_expr("2 - 3 - 4", 1);
  EXPECT_DOUBLE_EQ(f(Point{{0.0}}), -5.0);
  auto g = parse_expr("(x1 + 1)^3", 1);
  EXPECT_DOUBLE_EQ(g(Point{{1.0}}), 8.0);
}

TEST(Parse, VariableOutOfRange) {
  EXPECT_EQ(kind_of("x3", 2), ErrorKind::Parse);
  EXPECT_EQ(kind_of("x0", 2), ErrorKind::Parse);
}

TEST(Parse, ErrorsCarryPosition) {
  try {
    parse_expr("x1 + * x2", 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Parse);
    EXPECT_NE(std::string(e.what()).find("position 6"), std::string::npos) << e.what();
  }
}

TEST(Parse, Rejections) {
  EXPECT_EQ(kind_of("foo(x1)", 1), ErrorKind::Parse);
  EXPECT_EQ(kind_of("x1^1.5", 1), ErrorKind::Parse);
  EXPECT_EQ(kind_of("x1^2^2", 1), ErrorKind::Parse);
  EXPECT_EQ(kind_of("bump(x1; 2, 1)", 1), ErrorKind::Parse);
  EXPECT_EQ(kind_of("bump(x1, 0, 1)", 1), ErrorKind::Parse);
  EXPECT_EQ(kind_of("(x1 + 1", 1), ErrorKind::Parse);
  EXPECT_EQ(kind_of("", 1), ErrorKind::Parse);
  EXPECT_EQ(kind_of("x", 1), ErrorKind::Parse);
  EXPECT_EQ(kind_of("x1 x1", 1), ErrorKind::Parse);
}

TEST(Parse, WhitespaceInsensitive) {
  auto a = parse_expr("bump(x1^2;0.5,2)*exp(x1)", 1);
  auto b = parse_expr(" bump ( x1 ^ 2 ; 0.5 , 2 ) * exp ( x1 ) ", 1);
  for (double t : {-1.0, 0.2, 0.9, 1.3}) EXPECT_EQ(a(Point{{t}}), b(Point{{t}}));
}
