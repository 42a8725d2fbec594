#include <greenhyp/expr.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace greenhyp;

TEST(Expr, Precedence)
{
    EXPECT_DOUBLE_EQ(Expr::parse("1 + 2*3")(0, 0), 7.0);
    EXPECT_DOUBLE_EQ(Expr::parse("(1 + 2)*3")(0, 0), 9.0);
    EXPECT_DOUBLE_EQ(Expr::parse("2^3^2")(0, 0), 512.0);
    EXPECT_DOUBLE_EQ(Expr::parse("-2^2")(0, 0), -4.0);
    EXPECT_DOUBLE_EQ(Expr::parse("8/4/2")(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(Expr::parse("1 - 2 - 3")(0, 0), -4.0);
}

TEST(Expr, Variables)
{
    const Expr e = Expr::parse("1 + x^2");
    EXPECT_DOUBLE_EQ(e(0.3, 1.0), 2.0);
    EXPECT_FALSE(e.is_constant());
    const Expr f = Expr::parse("sin(t)*cos(x) + exp(0) + sqrt(4)");
    EXPECT_NEAR(f(0.5, 0.25), std::sin(0.5) * std::cos(0.25) + 3.0, 1e-15);
    EXPECT_NEAR(Expr::parse("pi")(0, 0), 3.141592653589793, 0.0);
    EXPECT_DOUBLE_EQ(Expr::parse("1e-3*2")(0, 0), 2e-3);
}

TEST(Expr, Errors)
{
    for (const char* bad : {"", "1 +", "foo(1)", "sin 1", "(1", "1 2", "x $ 2"}) {
        EXPECT_THROW(Expr::parse(bad), Error) << bad;
    }
    try {
        Expr::parse("1 + @");
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::parse);
        EXPECT_NE(std::string(e.what()).find("column 5"), std::string::npos);
    }
}

TEST(ScalarField, Kinds)
{
    ScalarField c(2.5);
    EXPECT_TRUE(c.is_constant());
    EXPECT_EQ(c(1, 2), 2.5);
    ScalarField e = ScalarField::expression("1/(1+x^2)");
    EXPECT_FALSE(e.is_constant());
    EXPECT_DOUBLE_EQ(e(0, 1), 0.5);
    EXPECT_TRUE(ScalarField::expression("2*pi").is_constant());

    SampledScalar s;
    s.nt = 2;
    s.nx = 3;
    s.t0 = 0;
    s.dt = 1;
    s.x0 = 0;
    s.dx = 1;
    s.values = {0, 1, 2, 10, 11, 12};
    ScalarField g = ScalarField::sampled(s, "grid");
    EXPECT_DOUBLE_EQ(g(0.5, 1.5), 6.5);
    EXPECT_DOUBLE_EQ(g(-1, -1), 0.0); // clamped
    EXPECT_DOUBLE_EQ(g(5, 5), 12.0);
}
