#include <greenhyp/operators.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <complex>

using namespace greenhyp;

namespace {

MatR m1(double v)
{
    MatR m(1, 1);
    m(0, 0) = v;
    return m;
}

ProductSpacetime flat() { return ProductSpacetime::minkowski(0, 1, -1, 1); }
Grid sample_grid() { return flat().grid(5, 5); }

Section fill(const Grid& g, int rank, const std::function<double(double, double, int)>& f)
{
    Section u(g, rank);
    for (int i = 0; i < g.nt; ++i)
        for (int j = 0; j < g.nx; ++j)
            for (int k = 0; k < rank; ++k) u.at(i, j, k) = f(g.t(i), g.x(j), k);
    return u;
}

// Trapezoid pairing sum over the grid; exact weights 1 in the interior which is
// all that matters for compactly supported integrands.
double pairing(const Section& a, const Section& b)
{
    double s = 0;
    for (std::size_t k = 0; k < a.values.size(); ++k) s += a.values[k] * b.values[k];
    return s * a.grid.dt * a.grid.dx;
}

double max_abs(const Section& u, int margin = 0)
{
    double m = 0;
    for (int i = margin; i < u.grid.nt - margin; ++i)
        for (int j = margin; j < u.grid.nx - margin; ++j)
            for (int k = 0; k < u.rank; ++k) m = std::max(m, std::abs(u.at(i, j, k)));
    return m;
}

} // namespace

TEST(Validate, ScalarTransportExample)
{
    auto sys = FirstOrderSystem<>::constant("p", m1(1), m1(0.5), m1(0));
    const auto rep = validate_symmetric_hyperbolic(sys, flat(), sample_grid());
    EXPECT_TRUE(rep.valid);
    // 1 + 0.5 alpha at the fan edge alpha = -(1 - 1e-3)
    EXPECT_NEAR(rep.min_eigenvalue, 1 - 0.5 * (1 - 1e-3), 1e-14);
}

TEST(Validate, DiracReductionHasMarginAtFanEdge)
{
    const auto dir = dirac_1p1();
    const auto sym = dir.symmetrized();
    EXPECT_EQ(sym.a0.constant_value(), MatR::Identity(2, 2));
    MatR expect_a1(2, 2);
    expect_a1 << -1, 0, 0, 1;
    EXPECT_EQ(sym.a1.constant_value(), expect_a1);
    const auto rep = validate_symmetric_hyperbolic(sym, flat(), sample_grid());
    EXPECT_TRUE(rep.valid);
    // eigenvalues 1 -+ alpha: the margin is exactly the fan's relative margin
    EXPECT_NEAR(rep.min_eigenvalue, 1e-3, 1e-14);
}

TEST(Validate, TooFastIsInvalid)
{
    MatR a1(2, 2);
    a1 << 2, 0, 0, -2;
    auto sys = FirstOrderSystem<>::constant("fast", MatR::Identity(2, 2), a1, MatR::Zero(2, 2));
    const auto rep = validate_symmetric_hyperbolic(sys, flat(), sample_grid());
    EXPECT_FALSE(rep.valid);
    EXPECT_GT(std::abs(rep.fail_alpha), 0.5);
    EXPECT_LT(rep.min_eigenvalue, 0);
    // at alpha = 0.6 the (0,0) entry is 1 - 1.2 < 0
    MatR s = sys.a0.constant_value() + 0.6 * sys.a1.constant_value();
    Eigen::LLT<MatR> llt(s);
    EXPECT_NE(llt.info(), Eigen::Success);
}

TEST(Validate, NonHermitianRejected)
{
    MatR a1(2, 2);
    a1 << 0, 0.5, 0.1, 0;
    auto sys = FirstOrderSystem<>::constant("skew", MatR::Identity(2, 2), a1, MatR::Zero(2, 2));
    const auto rep = validate_symmetric_hyperbolic(sys, flat(), sample_grid());
    EXPECT_FALSE(rep.valid);
    EXPECT_FALSE(rep.hermitian);
    EXPECT_TRUE(std::isfinite(rep.min_eigenvalue));
}

TEST(Validate, ShapeMismatch)
{
    auto sys = FirstOrderSystem<>::constant("rect", MatR::Ones(1, 2), MatR::Zero(1, 2), MatR::Zero(1, 2));
    EXPECT_THROW(validate_symmetric_hyperbolic(sys, flat(), sample_grid()), Error);
    EXPECT_THROW(FirstOrderSystem<>::constant("bad", MatR::Ones(2, 2), MatR::Zero(1, 2), MatR::Zero(2, 2)), Error);
}

TEST(Validate, ComplexHermitian)
{
    using C = std::complex<double>;
    MatC a1(2, 2);
    a1 << 0, C(0, 0.8), C(0, -0.8), 0;
    auto sys = FirstOrderSystem<C>::constant("cplx", MatC::Identity(2, 2), a1, MatC::Zero(2, 2));
    EXPECT_TRUE(validate_symmetric_hyperbolic(sys, flat(), sample_grid()).valid);
    a1(0, 1) = C(0, 1.2);
    a1(1, 0) = C(0, -1.2);
    sys.a1 = MatrixField<C>::constant(a1);
    EXPECT_FALSE(validate_symmetric_hyperbolic(sys, flat(), sample_grid()).valid);
}

TEST(Validate, FiberMetricSymmetrizes)
{
    // A1 = [[0, 2], [0.5, 0]] is not symmetric but H = diag(1, 4) makes H A1 symmetric.
    MatR a1(2, 2), h(2, 2);
    a1 << 0, 2, 0.5, 0;
    h << 1, 0, 0, 4;
    auto sys = FirstOrderSystem<>::constant("h", MatR::Identity(2, 2), 0.4 * a1, MatR::Zero(2, 2), h);
    EXPECT_TRUE(validate_symmetric_hyperbolic(sys, flat(), sample_grid()).valid);
    sys.fiber_metric = MatR::Identity(2, 2);
    EXPECT_FALSE(validate_symmetric_hyperbolic(sys, flat(), sample_grid()).valid);
}

TEST(Validate, ConformallyRobust)
{
    Rng rng(3);
    for (int trial = 0; trial < 40; ++trial) {
        const double v = -2.0 + 4.0 * rng.uniform();
        auto sys = FirstOrderSystem<>::constant("t", m1(1), m1(v), m1(0));
        ProductSpacetime st(Topology::line, 0, 1, -1, 1, ScalarField::expression("1 + x^2/2"), 1.0);
        ProductSpacetime scaled(Topology::line, 0, 1, -1, 1, ScalarField::expression("(1 + x^2/2)*(2 + sin(t+x))"),
                                ScalarField::expression("2 + sin(t+x)"));
        const Grid g = st.grid(7, 9);
        EXPECT_EQ(validate_symmetric_hyperbolic(sys, st, g).valid, validate_symmetric_hyperbolic(sys, scaled, g).valid)
            << v;
    }
}

TEST(WaveReduction, ValidatesFlatAndCurved)
{
    auto red = wave_to_first_order(WaveOperator::flat(flat()));
    const auto rep = validate_symmetric_hyperbolic(red.system, flat(), sample_grid());
    EXPECT_TRUE(rep.valid);
    EXPECT_NEAR(rep.min_eigenvalue, 1e-3, 1e-12);

    ProductSpacetime curved(Topology::line, 0, 1, -1, 1, ScalarField::expression("1 + 0.5*sin(x+t)^2"),
                            ScalarField::expression("1 + x^2"));
    WaveOperator w{curved, ScalarField::expression("0.3*x"), 0.2, -1.5};
    auto red2 = wave_to_first_order(w);
    EXPECT_TRUE(validate_symmetric_hyperbolic(red2.system, curved, curved.grid(9, 9)).valid);
}

TEST(WaveReduction, ReductionAgreesWithWaveOperator)
{
    // For u smooth and v = (u, u_t, u_x), row 1 of P v equals -w (box u + ...).
    ProductSpacetime curved(Topology::line, 0, 1, -1, 1, ScalarField::expression("1 + 0.25*x^2"),
                            ScalarField::expression("1 + 0.1*t"));
    WaveOperator w{curved, 0.5, -0.25, -2.0};
    auto red = wave_to_first_order(w);
    const Grid g = curved.grid(81, 81);
    auto u = [](double t, double x) { return std::sin(x - 0.7 * t) + 0.3 * t * x; };
    auto ut = [](double t, double x) { return -0.7 * std::cos(x - 0.7 * t) + 0.3 * x; };
    auto ux = [](double t, double x) { return std::cos(x - 0.7 * t) + 0.3 * t; };
    Section v = fill(g, 3, [&](double t, double x, int k) { return k == 0 ? u(t, x) : k == 1 ? ut(t, x) : ux(t, x); });
    Section pv = apply(red.system, v);
    Section us = fill(g, 1, [&](double t, double x, int) { return u(t, x); });
    Section wu = apply_wave(w, us);
    double err = 0;
    for (int i = 2; i < g.nt - 2; ++i)
        for (int j = 2; j < g.nx - 2; ++j) {
            const double vol = curved.volume_density(g.t(i), g.x(j));
            err = std::max(err, std::abs(pv.at(i, j, 1) + vol * wu.at(i, j)));
            EXPECT_NEAR(pv.at(i, j, 0), 0.0, 1e-3);
            EXPECT_NEAR(pv.at(i, j, 2), 0.0, 1e-3);
        }
    EXPECT_LT(err, 2e-3);
}

TEST(Apply, Examples)
{
    const Grid g = flat().grid(21, 21);
    auto transport = FirstOrderSystem<>::constant("tr", m1(1), m1(0.5), m1(0));
    Section c = fill(g, 1, [](double, double, int) { return 3.25; });
    EXPECT_EQ(max_abs(apply(transport, c)), 0.0);

    Section q = fill(g, 1, [](double t, double x, int) { return (x - 0.5 * t) * (x - 0.5 * t); });
    EXPECT_LT(max_abs(apply(transport, q)), 1e-12);

    auto ident = FirstOrderSystem<>::constant("b", MatR::Zero(2, 2), MatR::Zero(2, 2), MatR::Identity(2, 2));
    Rng rng(5);
    Section r = fill(g, 2, [&](double, double, int) { return rng.uniform(); });
    EXPECT_EQ(apply(ident, r).values, r.values);

    Section wrong(g, 2);
    EXPECT_THROW(apply(transport, wrong), Error);
}

TEST(Apply, PrincipalSymbolConsistency)
{
    MatR a0(2, 2), a1(2, 2), b(2, 2);
    a0 << 2, 0.3, 0.3, 1;
    a1 << 0.2, -0.5, -0.5, 0.1;
    b << 0.4, 1, -1, 0;
    auto sys = FirstOrderSystem<>::constant("s", a0, a1, b);
    auto f = [](double t, double x) { return std::exp(0.5 * t) * std::sin(2 * x); };
    auto ft = [](double t, double x) { return 0.5 * std::exp(0.5 * t) * std::sin(2 * x); };
    auto fx = [](double t, double x) { return 2 * std::exp(0.5 * t) * std::cos(2 * x); };
    auto uf = [](double t, double x, int k) { return k == 0 ? std::cos(t + x) : t * t - x; };
    double prev = 0;
    for (int n : {21, 41, 81}) {
        const Grid g = flat().grid(n, n);
        Section u = fill(g, 2, uf);
        Section fu = fill(g, 2, [&](double t, double x, int k) { return f(t, x) * uf(t, x, k); });
        Section lhs = apply(sys, fu);
        Section pu = apply(sys, u);
        double err = 0;
        for (int i = 1; i < n - 1; ++i)
            for (int j = 1; j < n - 1; ++j) {
                const double t = g.t(i), x = g.x(j);
                Eigen::Vector2d uv(u.at(i, j, 0), u.at(i, j, 1));
                const Eigen::Vector2d sig = sys.symbol(t, x, ft(t, x), fx(t, x)) * uv;
                for (int k = 0; k < 2; ++k) {
                    err = std::max(err, std::abs(lhs.at(i, j, k) - f(t, x) * pu.at(i, j, k) - sig(k)));
                }
            }
        if (prev > 0) {
            EXPECT_GT(prev / err, 3.5) << n;
        }
        prev = err;
    }
    EXPECT_LT(prev, 2e-3);
}

TEST(Dirac, Certificate)
{
    const auto d = dirac_1p1();
    EXPECT_TRUE(d.certificate.ok);
    EXPECT_EQ(d.certificate.anticommutator, MatR::Zero(2, 2));
    EXPECT_TRUE(validate_symmetric_hyperbolic(d.symmetrized(), flat(), sample_grid()).valid);
    // D itself is not symmetric hyperbolic with H = I
    EXPECT_FALSE(validate_symmetric_hyperbolic(d.d, flat(), sample_grid()).valid);
}

TEST(Dirac, SquareIsBoxOnPolynomials)
{
    const auto d = dirac_1p1();
    const Grid g = flat().grid(21, 21);
    auto p0 = [](double t, double x) { return t * t + 3 * t * x - x * x + 2 * x; };
    auto p1 = [](double t, double x) { return 2 * x * x - t + 0.5 * t * t; };
    Section u = fill(g, 2, [&](double t, double x, int k) { return k == 0 ? p0(t, x) : p1(t, x); });
    Section dd = apply(d.d, apply(d.d, u));
    Section box0 = apply_wave(WaveOperator::flat(flat()), u.component(0));
    Section box1 = apply_wave(WaveOperator::flat(flat()), u.component(1));
    for (int i = 2; i < g.nt - 2; ++i)
        for (int j = 2; j < g.nx - 2; ++j) {
            EXPECT_NEAR(dd.at(i, j, 0), box0.at(i, j), 1e-10);
            EXPECT_NEAR(dd.at(i, j, 1), box1.at(i, j), 1e-10);
        }
}

TEST(FormalDual, DtFlipsSign)
{
    auto p = FirstOrderSystem<>::constant("dt", m1(1), m1(0), m1(0));
    const auto d = formal_dual(p, flat());
    EXPECT_EQ(d.a0.constant_value()(0, 0), -1.0);
    EXPECT_EQ(d.a1.constant_value()(0, 0), 0.0);
    EXPECT_EQ(d.b.constant_value()(0, 0), 0.0);
}

TEST(FormalDual, Involution)
{
    MatR a0(2, 2), a1(2, 2), b(2, 2);
    a0 << 1, 2, 3, 4;
    a1 << -1, 0.5, 0, 2;
    b << 0, 1, 7, -3;
    auto p = FirstOrderSystem<>::constant("p", a0, a1, b);
    const auto dd = formal_dual(formal_dual(p, flat()), flat());
    EXPECT_EQ(dd.a0.constant_value(), a0);
    EXPECT_EQ(dd.a1.constant_value(), a1);
    EXPECT_EQ(dd.b.constant_value(), b);
}

namespace {

struct PairingCase {
    Grid g;
    Section f, phi;
};

PairingCase circle_case()
{
    auto st = ProductSpacetime::minkowski_circle(0, 2, 0, 2 * pi);
    const Grid g = st.grid(81, 64);
    // compact in t, periodic in x
    auto bt = [](double t) { return bump6(sqr((t - 1.0) / 0.6)); };
    Section f = fill(g, 2, [&](double t, double x, int k) { return bt(t) * (k == 0 ? std::sin(x) : std::cos(2 * x) + 0.5); });
    Section phi = fill(g, 2, [&](double t, double x, int k) {
        return bt(t) * (k == 0 ? std::cos(x + t) : std::sin(3 * x) * t);
    });
    return {g, f, phi};
}

} // namespace

TEST(FormalDual, DiscretePairingOnCircle)
{
    auto c = circle_case();
    MatR a0(2, 2), a1(2, 2), b(2, 2);
    a0 << 1, 0.2, 0.5, 2;
    a1 << 0.3, -1, 0.4, 0;
    b << 0.5, 1, -2, 0.25;
    auto p = FirstOrderSystem<>::constant("p", a0, a1, b);
    const auto tp = formal_dual(p, ProductSpacetime::minkowski_circle(0, 2, 0, 2 * pi));
    const double lhs = pairing(c.phi, apply(p, c.f));
    const double rhs = pairing(apply(tp, c.phi), c.f);
    EXPECT_LE(std::abs(lhs - rhs), 1e-12);
    EXPECT_GT(std::abs(lhs), 1e-3);
}

TEST(FormalDual, VariableCoefficientsByQuadrature)
{
    ProductSpacetime st(Topology::circle, 0, 2, 0, 2 * pi, ScalarField::expression("1 + 0.3*sin(x)"), 1.0);
    auto c = circle_case();
    auto p = FirstOrderSystem<>::make("v", MatrixField<double>::expressions(2, 2, {"1 + 0.1*cos(x)", "0", "0", "1"}),
                                      MatrixField<double>::expressions(2, 2, {"0", "sin(t)", "0.5*x", "0"}),
                                      MatrixField<double>::expressions(2, 2, {"1", "t", "0", "cos(x)"}));
    const auto tp = formal_dual(p, st);
    // weighted pairing with sqrt(beta gamma)
    auto weighted = [&](const Section& a, const Section& b) {
        double s = 0;
        for (int i = 0; i < c.g.nt; ++i)
            for (int j = 0; j < c.g.nx; ++j)
                for (int k = 0; k < 2; ++k) s += st.volume_density(c.g.t(i), c.g.x(j)) * a.at(i, j, k) * b.at(i, j, k);
        return s * c.g.dt * c.g.dx;
    };
    const double lhs = weighted(c.phi, apply(p, c.f));
    const double rhs = weighted(apply(tp, c.phi), c.f);
    EXPECT_LE(std::abs(lhs - rhs), 5e-3 * std::abs(lhs));
}

TEST(FormalAdjoint, Examples)
{
    OperatorPair<double> dt{FirstOrderSystem<>::constant("dt", m1(1), m1(0), m1(0)), m1(1), m1(1)};
    const auto adj = formal_adjoint(dt, flat());
    EXPECT_EQ(adj.op.a0.constant_value()(0, 0), -1.0);

    // chiral block dx - dt: the identity-metric adjoint is dt - dx = -(dx - dt)
    const auto chi = chiral_block();
    EXPECT_EQ(chi.op.a0.constant_value()(0, 0), -1.0);
    EXPECT_EQ(chi.op.a1.constant_value()(0, 0), 1.0);
    const auto chi_adj = formal_adjoint(chi, flat());
    EXPECT_EQ(chi_adj.op.a0.constant_value(), -chi.op.a0.constant_value());
    EXPECT_EQ(chi_adj.op.a1.constant_value(), -chi.op.a1.constant_value());

    OperatorPair<double> degenerate{dt.op, m1(0), m1(1)};
    EXPECT_THROW(formal_adjoint(degenerate, flat()), Error);
}

TEST(FormalAdjoint, PairingOnCircleWithMetrics)
{
    auto c = circle_case();
    // rectangular P: rank 2 -> rank 1
    MatR a0(1, 2), a1(1, 2), b(1, 2), h1(2, 2), h2(1, 1);
    a0 << 1, -0.5;
    a1 << 0.25, 2;
    b << 3, 1;
    h1 << 2, 0.5, 0.5, 1;
    h2 << 3;
    OperatorPair<double> pair{FirstOrderSystem<>::constant("r", a0, a1, b, h2), h1, h2};
    const auto adj = formal_adjoint(pair, ProductSpacetime::minkowski_circle(0, 2, 0, 2 * pi));
    EXPECT_EQ(adj.op.rank_in(), 1);
    EXPECT_EQ(adj.op.rank_out(), 2);
    const Section g1 = c.phi.component(0);
    auto metric_pair = [&](const MatR& h, const Section& a, const Section& bsec) {
        double s = 0;
        for (int i = 0; i < c.g.nt; ++i)
            for (int j = 0; j < c.g.nx; ++j)
                for (int p = 0; p < a.rank; ++p)
                    for (int q = 0; q < a.rank; ++q) s += a.at(i, j, p) * h(p, q) * bsec.at(i, j, q);
        return s * c.g.dt * c.g.dx;
    };
    const double lhs = metric_pair(h2, g1, apply(pair.op, c.f));
    const double rhs = metric_pair(h1, apply(adj.op, g1), c.f);
    EXPECT_LE(std::abs(lhs - rhs), 1e-12);
    // adjoint of the adjoint
    const auto back = formal_adjoint(adj, flat());
    EXPECT_LT((back.op.a0.constant_value() - a0).norm(), 1e-14);
    EXPECT_LT((back.op.b.constant_value() - b).norm(), 1e-14);
}

TEST(DirectSum, BlockDiagonal)
{
    auto p = FirstOrderSystem<>::transport(0.5);
    auto q = FirstOrderSystem<>::transport(-0.25);
    const auto s = direct_sum(p, q);
    EXPECT_EQ(s.rank(), 2);
    MatR expect(2, 2);
    expect << 0.5, 0, 0, -0.25;
    EXPECT_EQ(s.a1.constant_value(), expect);
    EXPECT_EQ(s.a0.constant_value(), MatR::Identity(2, 2));
    EXPECT_TRUE(validate_symmetric_hyperbolic(s, flat(), sample_grid()).valid);
    const auto bad = direct_sum(p, FirstOrderSystem<>::transport(1.5));
    EXPECT_FALSE(validate_symmetric_hyperbolic(bad, flat(), sample_grid()).valid);
}

TEST(MatrixField, ExpressionsAndDerivatives)
{
    auto f = MatrixField<double>::expressions(1, 2, {"t*x", "3"});
    EXPECT_FALSE(f.is_constant());
    EXPECT_DOUBLE_EQ(f(2, 3)(0, 0), 6.0);
    EXPECT_NEAR(f.d_dt(2, 3)(0, 0), 3.0, 1e-8);
    EXPECT_NEAR(f.d_dx(2, 3)(0, 1), 0.0, 1e-12);
    EXPECT_TRUE(MatrixField<double>::expressions(1, 1, {"2*pi"}).is_constant());
    EXPECT_THROW(MatrixField<double>::expressions(2, 2, {"1"}), Error);
    EXPECT_THROW(MatrixField<double>::expressions(1, 1, {"1"}, {"2"}), Error);
}
