#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "subcart/expr.hpp"
#include "subcart/parse.hpp"
#include "subcart/rng.hpp"
#include "test_support.hpp"

using namespace subcart;

namespace {

// Reference flat-exp, written independently of the expression nodes.
double ref_h(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }

double ref_bump(double dist, double r_in, double r_out) {
  const double s = dist * dist;
  const double num = ref_h(r_out * r_out - s);
  return num / (num + ref_h(s - r_in * r_in));
}

}  // namespace

TEST(Eval, CircleConstraintVanishesOnCircle) {
  auto g = parse_expr("x1^2 + x2^2 - 1", 2);
  EXPECT_EQ(g(Point{{1.0, 0.0}}), 0.0);
  EXPECT_DOUBLE_EQ(g(Point{{2.0, 0.0}}), 3.0);
}

TEST(Eval, BumpPlateauAtOrigin) {
  auto b = parse_expr("bump(x1^2; 1, 2)", 1);
  EXPECT_EQ(b(Point{{0.0}}), 1.0);
  EXPECT_EQ(b(Point{{1.0}}), 1.0);
  EXPECT_EQ(b(Point{{std::sqrt(2.0)}}), 0.0);
}

TEST(Eval, FlatExpAtOne) {
  auto f = parse_expr("flatexp(x1)", 1);
  EXPECT_NEAR(f(Point{{1.0}}), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(f(Point{{1.0}}), 0.367879, 1e-6);
  EXPECT_EQ(f(Point{{0.0}}), 0.0);
  EXPECT_EQ(f(Point{{-3.0}}), 0.0);
}

TEST(Eval, QuotientGuardIsAnError) {
  auto q = parse_expr("1 / x1", 1);
  EXPECT_DOUBLE_EQ(q(Point{{4.0}}), 0.25);
  try {
    q(Point{{0.0}});
    FAIL() << "expected guard violation";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Guard);
  }
  auto r = parse_expr("sqrt(x1)", 1);
  EXPECT_THROW(r(Point{{-1.0}}), Error);
}

TEST(Eval, WrongPointDimensionRejected) {
  auto g = parse_expr("x1 + x2", 2);
  EXPECT_THROW(g(Point{{1.0}}), Error);
}

TEST(Jacobian, SquareAtThree) {
  ExprVec f(1, {parse_expr("x1^2", 1)});
  Matrix j = jacobian(f, Point{{3.0}});
  ASSERT_EQ(j.rows(), 1);
  EXPECT_DOUBLE_EQ(j(0, 0), 6.0);
}

TEST(Jacobian, IdentityMap) {
  auto id = ExprVec::identity(3);
  Matrix j = jacobian(id, Point{{0.3, -2.0, 7.0}});
  EXPECT_TRUE(j.isApprox(Matrix::Identity(3, 3)));
}

TEST(Jacobian, MatchesCentralDifferencesOnFixtureExpressions) {
  // The oracle differentiates by central differences (h = 1e-5) through
  // plain evaluation; the implementation uses forward-mode node rules.
  struct Case {
    const char* text;
    int dim;
    double lo, hi;
  };
  const std::vector<Case> cases = {
      {"x1^2 + x2^2 - 1", 2, -2, 2},
      {"x1 * x2", 2, -2, 2},
      {"2 * atan(x2 / (1 + x1))", 2, -0.4, 0.9},
      {"2 * atan(x2 / (1 - x1))", 2, -0.9, 0.4},
      {"cos(x1)", 1, -4, 4},
      {"-cos(x1) + sin(x1)^3 * exp(x1 / 3)", 1, -3, 3},
      {"flatexp(x1)", 1, 0.2, 3},
      {"x2 / sqrt(x2^2)", 2, 0.1, 2},
      {"bump(x1^2 + x2^2; 0.25, 1)", 2, -0.6, 0.6},
      {"sqrt(1 + x1^2) / (2 + sin(x2))", 2, -2, 2},
  };
  for (const auto& c : cases) {
    auto e = parse_expr(c.text, c.dim);
    Stream rng(42, 1);
    for (int trial = 0; trial < 100; ++trial) {
      Point x(c.dim);
      for (int i = 0; i < c.dim; ++i) x[i] = rng.uniform(c.lo, c.hi);
      const Eigen::RowVectorXd exact = e.gradient(x);
      const Eigen::RowVectorXd fd = test::central_gradient(e, x, 1e-5);
      for (int i = 0; i < c.dim; ++i) {
        EXPECT_LT(test::relative_error(exact[i], fd[i]), 1e-6)
            << c.text << " at trial " << trial << " coordinate " << i;
      }
    }
  }
}

TEST(Derivative, SymbolicMatchesForwardMode) {
  auto e = parse_expr("x1^3 * bump(x1^2 + x2^2; 0.1, 2) + atan(x1 * x2) - flatexp(x2 + 1)", 2);
  Stream rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Point x{{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)}};
    const auto g = e.gradient(x);
    EXPECT_NEAR(diff(e, 0)(x), g[0], 1e-10 * std::max(1.0, std::abs(g[0])));
    EXPECT_NEAR(diff(e, 1)(x), g[1], 1e-10 * std::max(1.0, std::abs(g[1])));
  }
}

TEST(Derivative, SecondDerivativesEvaluable) {
  const std::vector<const char*> fixtures = {"x1^2 + x2^2 - 1", "x1 * x2",
                                             "2 * atan(x2 / (1 + x1))",
                                             "bump(x1^2 + x2^2; 0.25, 1)", "flatexp(x1) * x2"};
  for (const char* text : fixtures) {
    ExprVec f(2, {parse_expr(text, 2)});
    for (const auto& row : f.derivative_rows()) {
      for (const Point& x : {Point{{0.3, 0.2}}, Point{{0.7, -0.5}}, Point{{0.0, 0.9}}}) {
        const Matrix h = row.jacobian(x);
        EXPECT_TRUE(h.allFinite()) << text;
      }
    }
    const auto rows = f.derivative_rows();
    const Point x{{0.3, 0.2}};
    const Matrix hess0 = rows[0].jacobian(x);
    EXPECT_NEAR(hess0(0, 1), hess0(1, 0), 1e-9) << text;
  }
}

TEST(Derivative, FlatExpSecondDerivativeAgainstDifferences) {
  auto f = parse_expr("flatexp(x1)", 1);
  auto d2 = diff(diff(f, 0), 0);
  for (double t : {0.15, 0.4, 1.0, 2.5}) {
    const double h = 1e-4;
    const double fd = (f(Point{{t + h}}) - 2 * f(Point{{t}}) + f(Point{{t - h}})) / (h * h);
    EXPECT_LT(test::relative_error(d2(Point{{t}}), fd), 1e-5) << t;
  }
  EXPECT_EQ(d2(Point{{0.0}}), 0.0);
  EXPECT_EQ(d2(Point{{-1.0}}), 0.0);
}

TEST(MakeBump, CenterBoundaryAndMidpoint) {
  const Point c{{0.5, -1.0}};
  auto b = make_bump(2, c, 0.2, 0.6);
  EXPECT_EQ(b(c), 1.0);
  EXPECT_EQ(b(Point{{0.5 + 0.6, -1.0}}), 0.0);
  const double mid = 0.4;
  const double value = b(Point{{0.5, -1.0 + mid}});
  EXPECT_GT(value, 0.0);
  EXPECT_LT(value, 1.0);
  EXPECT_NEAR(value, ref_bump(mid, 0.2, 0.6), 1e-14);
}

TEST(MakeBump, RejectsBadRadii) {
  EXPECT_THROW(make_bump(1, Point{{0.0}}, 1.0, 1.0), Error);
  EXPECT_THROW(make_bump(1, Point{{0.0}}, 2.0, 1.0), Error);
}

TEST(MakeBump, RadialProfileIsMonotoneWithExactPlateauAndSupport) {
  const Point c{{0.0, 0.0, 0.0}};
  const double r_in = 0.3, r_out = 1.1;
  auto b = make_bump(3, c, r_in, r_out);
  const Point dir = Point{{1.0, 2.0, -2.0}}.normalized();
  double prev = 1.0;
  for (int i = 0; i <= 2000; ++i) {
    const double r = 1.5 * i / 2000.0;
    const double v = b(c + r * dir);
    EXPECT_LE(v, prev) << r;
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    if (r <= r_in * (1 - 1e-12)) {
      EXPECT_EQ(v, 1.0) << r;
    }
    if (r >= r_out * (1 + 1e-12)) {
      EXPECT_EQ(v, 0.0) << r;
    }
    EXPECT_NEAR(v, ref_bump(r, r_in, r_out), 1e-12) << r;
    prev = v;
  }
}

TEST(MakeBump, NarrowAnnulusStaysFinite) {
  // h(b - t) + h(t - a) underflows here when computed literally.
  auto b = make_bump(1, Point{{0.0}}, 0.1, 0.101);
  const Point x{{std::sqrt((0.01 + 0.010201) / 2)}};
  EXPECT_NEAR(b(x), 0.5, 1e-9);
  EXPECT_GT(b(x), 0.0);
  EXPECT_LT(b(x), 1.0);
  EXPECT_TRUE(b.gradient(x).allFinite());
}

TEST(Mask, GateZeroSkipsValue) {
  auto gate = make_bump(1, Point{{2.0}}, 0.1, 0.5);
  auto risky = 1.0 / SmoothExpr::variable(1, 0);  // undefined at 0
  auto m = mask(gate, gate * risky);
  EXPECT_EQ(m(Point{{0.0}}), 0.0);
  EXPECT_EQ(m.gradient(Point{{0.0}})[0], 0.0);
  EXPECT_DOUBLE_EQ(m(Point{{2.0}}), 0.5);
}

TEST(Expr, DimensionMismatchRejected) {
  auto a = SmoothExpr::variable(2, 0);
  auto b = SmoothExpr::variable(3, 0);
  EXPECT_THROW(a + b, Error);
  EXPECT_THROW(ExprVec(2, {a, b}), Error);
}
