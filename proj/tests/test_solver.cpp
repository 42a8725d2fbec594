#include <greenhyp/solver.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <cstdio>

using namespace greenhyp;

namespace {

double bump(double x, double c, double r) { return bump6(sqr((x - c) / r)); }
double bump_dx(double x, double c, double r)
{
    const double s = sqr((x - c) / r);
    if (s >= 1) return 0.0;
    return 6 * std::pow(1 - s, 5) * (-2 * (x - c) / (r * r));
}

CauchyData row_data(const Grid& g, int slice, int rank, const std::function<double(double, int)>& f)
{
    CauchyData d = CauchyData::zeros(g, slice, rank);
    for (int j = 0; j < g.nx; ++j)
        for (int k = 0; k < rank; ++k) d.at(j, k) = f(g.x(j), k);
    return d;
}

Section fill(const Grid& g, int rank, const std::function<double(double, double, int)>& f)
{
    Section u(g, rank);
    for (int i = 0; i < g.nt; ++i)
        for (int j = 0; j < g.nx; ++j)
            for (int k = 0; k < rank; ++k) u.at(i, j, k) = f(g.t(i), g.x(j), k);
    return u;
}

// Max-norm error against an exact solution on the final row and the
// relative l2 error over all rows.
double error_vs(const Section& u, const std::function<double(double, double, int)>& exact, int comp = 0)
{
    double num = 0, den = 0;
    for (int i = 0; i < u.grid.nt; ++i)
        for (int j = 0; j < u.grid.nx; ++j) {
            const double e = exact(u.grid.t(i), u.grid.x(j), comp);
            num += sqr(u.at(i, j, comp) - e);
            den += sqr(e);
        }
    return std::sqrt(num / den);
}

double order(double coarse, double fine) { return std::log2(coarse / fine); }

// Transport dt u + 0.5 dx u = 0 at nx nodes on [-4, 4] x [0, 1.5], dt ~ dx.
double transport_error(int nx, Scheme scheme)
{
    auto st = ProductSpacetime::minkowski(0, 1.5, -4, 4);
    const double dx = 8.0 / (nx - 1);
    const int nt = static_cast<int>(std::lround(1.5 / dx)) + 1;
    const Grid g = Grid::make(nt, nx, 0, 1.5 / (nt - 1), -4, dx);
    auto sys = FirstOrderSystem<>::transport(0.5);
    const CauchyData u0 = row_data(g, 0, 1, [](double x, int) { return bump(x, -0.5, 0.6); });
    SolveOptions opt;
    opt.scheme = scheme;
    const Section u = solve_cauchy(sys, st, nullptr, u0, g, opt);
    return error_vs(u, [](double t, double x, int) { return bump(x - 0.5 * t, -0.5, 0.6); });
}

} // namespace

TEST(Solve, TransportTranslatesBump)
{
    const double e1 = transport_error(161, Scheme::lax_wendroff);
    const double e2 = transport_error(321, Scheme::lax_wendroff);
    const double e3 = transport_error(641, Scheme::lax_wendroff);
    EXPECT_LT(e3, 5e-3);
    EXPECT_GE(order(e1, e2), 1.8);
    EXPECT_GE(order(e2, e3), 1.8);
}

TEST(Solve, OtherSchemesConverge)
{
    const double r1 = transport_error(161, Scheme::rk2), r2 = transport_error(321, Scheme::rk2),
                 r3 = transport_error(641, Scheme::rk2);
    EXPECT_GE(order(r2, r3), 1.8) << r1 << " " << r2 << " " << r3;
    const double w1 = transport_error(161, Scheme::upwind), w2 = transport_error(321, Scheme::upwind);
    EXPECT_GT(order(w1, w2), 0.7);
    EXPECT_LT(w2, 0.2);
}

TEST(Solve, ZeroDataGivesZero)
{
    auto st = ProductSpacetime::minkowski(0, 1, -2, 2);
    const Grid g = st.grid(41, 81);
    auto red = wave_to_first_order(WaveOperator::klein_gordon(st, 1.3));
    const Section zero_f(g, 3);
    for (Scheme s : {Scheme::lax_wendroff, Scheme::rk2, Scheme::upwind}) {
        SolveOptions opt;
        opt.scheme = s;
        const Section u = solve_cauchy(red.system, st, &zero_f, CauchyData::zeros(g, 0, 3), g, opt);
        for (double v : u.values) EXPECT_EQ(v, 0.0);
        EXPECT_EQ(u.mask->count(), 0u);
    }
}

namespace {

double dalembert_error(int nx)
{
    auto st = ProductSpacetime::minkowski(0, 1.5, -4, 4);
    const double dx = 8.0 / (nx - 1);
    const int nt = static_cast<int>(std::ceil(1.5 / (0.8 * dx))) + 1;
    const Grid g = Grid::make(nt, nx, 0, 1.5 / (nt - 1), -4, dx);
    auto red = wave_to_first_order(WaveOperator::flat(st));
    auto phi = [](double x) { return bump(x, 0.3, 1.0); };
    auto phi_x = [](double x) { return bump_dx(x, 0.3, 1.0); };
    // psi = Phi' with Phi a bump, so the d'Alembert integral is Phi(x+t) - Phi(x-t)
    auto Phi = [](double x) { return 0.7 * bump(x, -0.4, 0.9); };
    auto psi = [](double x) { return 0.7 * bump_dx(x, -0.4, 0.9); };
    const CauchyData u0 = red.embed_exact(
        g, 0, [&](double, double x) { return phi(x); }, [&](double, double x) { return psi(x); },
        [&](double, double x) { return phi_x(x); });
    const Section v = solve_cauchy(red.system, st, nullptr, u0, g);
    const Section u = red.extract(v);
    return error_vs(u, [&](double t, double x, int) {
        return 0.5 * (phi(x - t) + phi(x + t)) + 0.5 * (Phi(x + t) - Phi(x - t));
    });
}

double klein_gordon_error(int nx, Scheme scheme = Scheme::lax_wendroff)
{
    const double m = 1.5, k = 2.0, w = std::sqrt(k * k + m * m);
    auto st = ProductSpacetime::minkowski_circle(0, 1, 0, 2 * pi);
    const double dx = 2 * pi / nx;
    const int nt = static_cast<int>(std::ceil(1.0 / (0.8 * dx))) + 1;
    const Grid g = Grid::circle(0, 1, nt, 0, 2 * pi, nx);
    auto red = wave_to_first_order(WaveOperator::klein_gordon(st, m));
    const CauchyData u0 = red.embed_exact(
        g, 0, [&](double t, double x) { return std::cos(k * x - w * t); },
        [&](double t, double x) { return w * std::sin(k * x - w * t); },
        [&](double t, double x) { return -k * std::sin(k * x - w * t); });
    SolveOptions opt;
    opt.scheme = scheme;
    const Section v = solve_cauchy(red.system, st, nullptr, u0, g, opt);
    return error_vs(red.extract(v), [&](double t, double x, int) { return std::cos(k * x - w * t); });
}

} // namespace

TEST(Solve, DAlembertFormula)
{
    const double e1 = dalembert_error(161), e2 = dalembert_error(321), e3 = dalembert_error(641);
    EXPECT_LT(e3, 5e-3);
    EXPECT_GE(order(e1, e2), 1.8) << e1 << " " << e2;
    EXPECT_GE(order(e2, e3), 1.8) << e2 << " " << e3;
}

TEST(Solve, KleinGordonPlaneWave)
{
    const double e1 = klein_gordon_error(64), e2 = klein_gordon_error(128), e3 = klein_gordon_error(256);
    EXPECT_LT(e3, 5e-3);
    EXPECT_GE(order(e1, e2), 1.8) << e1 << " " << e2;
    EXPECT_GE(order(e2, e3), 1.8) << e2 << " " << e3;
}

TEST(Solve, SourceResidualIsSecondOrder)
{
    // P u = f for the curved wave reduction: the discrete residual of the
    // solution shrinks at second order in the interior.
    ProductSpacetime st(Topology::line, 0, 1, -3, 3, ScalarField::expression("1 + 0.2*x^2"),
                        ScalarField::expression("1 + 0.1*t"));
    WaveOperator w{st, 0.3, 0.0, -0.5};
    auto red = wave_to_first_order(w);
    double prev = 0;
    for (int nx : {121, 241}) {
        const Grid g = st.grid((nx - 1) / 3 + 1, nx);
        Section f = fill(g, 1, [](double t, double x, int) { return bump(x, 0, 0.8) * bump(t, 0.4, 0.3); });
        Section F = red.source(f);
        SolveOptions opt;
        opt.cfl = 0.9;
        const Section v = solve_cauchy(red.system, st, &F, CauchyData::zeros(g, 0, 3), g, opt);
        const Section r = apply(red.system, v) - F;
        double res = 0;
        for (int i = 2; i < g.nt - 2; ++i)
            for (int j = 2; j < g.nx - 2; ++j)
                for (int k = 0; k < 3; ++k) res = std::max(res, std::abs(r.at(i, j, k)));
        if (prev > 0) {
            EXPECT_GE(order(prev, res), 1.7) << prev << " " << res;
        }
        prev = res;
    }
}

TEST(Solve, BitwiseDeterministic)
{
    ProductSpacetime st(Topology::line, 0, 1, -3, 3, ScalarField::expression("1 + 0.2*x^2"), 1.0);
    auto red = wave_to_first_order(WaveOperator::flat(st));
    const Grid g = st.grid(61, 121);
    Section f = red.source(fill(g, 1, [](double t, double x, int) { return bump(x, 0, 0.5) * bump(t, 0.3, 0.2); }));
    const Section a = solve_cauchy(red.system, st, &f, CauchyData::zeros(g, 0, 3), g);
    const Section b = solve_cauchy(red.system, st, &f, CauchyData::zeros(g, 0, 3), g);
    EXPECT_EQ(a.values, b.values);
}

TEST(Solve, TimeReversalIsBitwise)
{
    // dyadic grid: t values negate exactly
    const double dt = 1.0 / 128, dx = 1.0 / 32;
    const int nt = 129, nx = 193;
    ProductSpacetime st(Topology::line, 0, 1, -3, 3, ScalarField::expression("1 + 0.2*x^2 + 0.1*t"), 1.0);
    ProductSpacetime st_r(Topology::line, -1, 0, -3, 3, ScalarField::expression("1 + 0.2*x^2 - 0.1*t"), 1.0);
    const Grid g = Grid::make(nt, nx, 0, dt, -3, dx);
    const Grid gr = Grid::make(nt, nx, -1, dt, -3, dx);
    auto red = wave_to_first_order(WaveOperator{st, 0.25, ScalarField::expression("0.1*x*t"), -0.5});
    const FirstOrderSystem<> p = red.system;
    // reflected system P_r(tau) = -A0(-tau) d_tau ... written as A0(-tau) d_tau - A1(-tau) dx - B(-tau)
    FirstOrderSystem<> pr = p;
    pr.a0 = MatrixField<double>::function(3, 3, [p](double t, double x) { return MatR(p.a0(-t, x)); });
    pr.a1 = MatrixField<double>::function(3, 3, [p](double t, double x) { return MatR(-p.a1(-t, x)); });
    pr.b = MatrixField<double>::function(3, 3, [p](double t, double x) { return MatR(-p.b(-t, x)); });
    Section f = red.source(fill(g, 1, [](double t, double x, int) { return bump(x, 0.2, 0.6) * bump(t, 0.5, 0.3); }));
    const CauchyData u0 = row_data(g, 0, 3, [](double x, int k) { return k == 0 ? bump(x, -0.3, 0.7) : 0.0; });
    const Section u = solve_cauchy(p, st, &f, u0, g);

    Section fr(gr, 3);
    for (int i = 0; i < nt; ++i)
        for (int j = 0; j < nx; ++j)
            for (int k = 0; k < 3; ++k) fr.at(i, j, k) = -f.at(nt - 1 - i, j, k);
    CauchyData u0r = u0;
    u0r.slice = nt - 1;
    SolveOptions back;
    back.direction = TimeDirection::backward;
    const Section ur = solve_cauchy(pr, st_r, &fr, u0r, gr, back);
    bool same = true;
    for (int i = 0; i < nt; ++i)
        for (int j = 0; j < nx; ++j)
            for (int k = 0; k < 3; ++k) same = same && ur.at(i, j, k) == u.at(nt - 1 - i, j, k);
    EXPECT_TRUE(same);
    EXPECT_GT(l2_norm(u), 1e-3);
}

TEST(Solve, SupportMaskIsSound)
{
    ProductSpacetime st(Topology::line, 0, 2, -4, 4, ScalarField::expression("1/(1 + 0.3*x^2)"), 1.0);
    auto red = wave_to_first_order(WaveOperator::flat(st));
    const Grid g = st.grid(81, 161);
    Section f = red.source(fill(g, 1, [](double t, double x, int) { return bump(x, 0.5, 0.4) * bump(t, 0.5, 0.3); }));
    for (Scheme s : {Scheme::lax_wendroff, Scheme::rk2, Scheme::upwind}) {
        SolveOptions opt;
        opt.scheme = s;
        const Section u = solve_cauchy(red.system, st, &f, CauchyData::zeros(g, 0, 3), g, opt);
        ASSERT_TRUE(u.mask.has_value());
        EXPECT_TRUE(u.nonzero(1e-14).subset_of(*u.mask)) << scheme_name(s);
        EXPECT_TRUE(u.nonzero(0.0).subset_of(*u.mask)) << scheme_name(s);
    }
}

TEST(Solve, Errors)
{
    auto st = ProductSpacetime::minkowski(0, 1, -1, 1);
    auto sys = FirstOrderSystem<>::transport(0.5);
    const Grid coarse_t = st.grid(5, 41); // dt = 0.25, dx = 0.05
    const CauchyData u0 = row_data(coarse_t, 0, 1, [](double x, int) { return bump(x, 0, 0.2); });
    try {
        (void)solve_cauchy(sys, st, nullptr, u0, coarse_t);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::precondition);
        EXPECT_NE(std::string(e.what()).find("CFL"), std::string::npos);
    }
    const Grid g = st.grid(21, 41);
    const CauchyData wide = row_data(g, 0, 1, [](double x, int) { return bump(x, 0.5, 0.4); });
    try {
        (void)solve_cauchy(sys, st, nullptr, wide, g);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("cone escape"), std::string::npos);
    }
    auto fast = FirstOrderSystem<>::transport(1.5);
    try {
        SolveOptions opt;
        opt.cfl = 5;
        (void)solve_cauchy(fast, st, nullptr, row_data(g, 0, 1, [](double, int) { return 0.0; }), g, opt);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("validation"), std::string::npos);
    }
}

TEST(Solve, BackwardSolveOfTransport)
{
    auto st = ProductSpacetime::minkowski(0, 2, -3, 3);
    const Grid g = st.grid(101, 481);
    auto sys = FirstOrderSystem<>::transport(0.5);
    const CauchyData u1 = row_data(g, g.nt - 1, 1, [](double x, int) { return bump(x, 0.0, 0.6); });
    SolveOptions opt;
    opt.direction = TimeDirection::backward;
    const Section u = solve_cauchy(sys, st, nullptr, u1, g, opt);
    EXPECT_LT(error_vs(u, [](double t, double x, int) { return bump(x - 0.5 * (t - 2), 0.0, 0.6); }), 5e-3);
}

TEST(Solve, DirectSumIsBlockwiseBitwise)
{
    auto st = ProductSpacetime::minkowski(0, 1, -3, 3);
    const Grid g = st.grid(41, 121);
    auto red = wave_to_first_order(WaveOperator::klein_gordon(st, 0.7));
    auto tr = FirstOrderSystem<>::transport(-0.3);
    const auto sum = direct_sum(red.system, tr);
    const CauchyData a = row_data(g, 0, 3, [](double x, int k) { return k == 0 ? bump(x, 0, 0.7) : 0.0; });
    const CauchyData b = row_data(g, 0, 1, [](double x, int) { return bump(x, 0.3, 0.5); });
    CauchyData ab = CauchyData::zeros(g, 0, 4);
    for (int j = 0; j < g.nx; ++j) {
        for (int k = 0; k < 3; ++k) ab.at(j, k) = a.at(j, k);
        ab.at(j, 3) = b.at(j, 0);
    }
    const Section ua = solve_cauchy(red.system, st, nullptr, a, g);
    const Section ub = solve_cauchy(tr, st, nullptr, b, g);
    const Section us = solve_cauchy(sum, st, nullptr, ab, g);
    bool same = true;
    for (int i = 0; i < g.nt; ++i)
        for (int j = 0; j < g.nx; ++j) {
            for (int k = 0; k < 3; ++k) same = same && us.at(i, j, k) == ua.at(i, j, k);
            same = same && us.at(i, j, 3) == ub.at(i, j, 0);
        }
    EXPECT_TRUE(same);
}

TEST(Solve, ComplexHermitianSystem)
{
    using C = std::complex<double>;
    auto st = ProductSpacetime::minkowski_circle(0, 1, 0, 2 * pi);
    const int nx = 256;
    const Grid g = Grid::circle(0, 1, 321, 0, 2 * pi, nx);
    MatC a1(2, 2);
    a1 << 0, C(0, 0.5), C(0, -0.5), 0; // eigenvalues +-0.5
    auto sys = FirstOrderSystem<C>::constant("c", MatC::Identity(2, 2), a1, MatC::Zero(2, 2));
    Eigen::SelfAdjointEigenSolver<MatC> es(a1);
    CauchyDataT<C> u0 = CauchyDataT<C>::zeros(g, 0, 2);
    auto init = [](double x) { return Eigen::Vector2cd(C(std::cos(x), 0), C(0, std::sin(2 * x))); };
    for (int j = 0; j < nx; ++j) {
        const auto v = init(g.x(j));
        u0.at(j, 0) = v(0);
        u0.at(j, 1) = v(1);
    }
    const auto u = solve_cauchy(sys, st, nullptr, u0, g);
    // oracle: each characteristic component translates with its eigenvalue
    double err = 0;
    const int i = g.nt - 1;
    const double t = g.t(i);
    for (int j = 0; j < nx; ++j) {
        Eigen::Vector2cd exact = Eigen::Vector2cd::Zero();
        for (int k = 0; k < 2; ++k) {
            const Eigen::Vector2cd vk = es.eigenvectors().col(k);
            exact += vk * (vk.adjoint() * init(g.x(j) - es.eigenvalues()(k) * t))(0);
        }
        err = std::max(err, std::abs(u.at(i, j, 0) - exact(0)) + std::abs(u.at(i, j, 1) - exact(1)));
    }
    EXPECT_LT(err, 1e-3);
}

TEST(Solve, RestrictedDomainZeroesOutside)
{
    auto st = ProductSpacetime::minkowski(0, 2, -3, 3);
    const Grid g = st.grid(81, 121);
    RasterMask dom(g);
    for (int i = 0; i < g.nt; ++i)
        for (int j = 0; j < g.nx; ++j)
            if (std::abs(g.x(j)) <= 1.5) dom.set(i, j);
    SolveOptions opt;
    opt.domain = &dom;
    auto sys = FirstOrderSystem<>::transport(0.5);
    const CauchyData u0 = row_data(g, 0, 1, [](double x, int) { return bump(x, 0, 0.5); });
    const Section u = solve_cauchy(sys, st, nullptr, u0, g, opt);
    EXPECT_TRUE(u.nonzero().subset_of(dom));
}

// ---------------------------------------------------------------- energy

TEST(Energy, NormExamples)
{
    auto st = ProductSpacetime::minkowski_circle(0, 1, 0, 2 * pi);
    const Grid g = Grid::circle(0, 1, 11, 0, 2 * pi, 64);
    auto sys = FirstOrderSystem<>::transport(0.3);
    Section zero(g, 1);
    EXPECT_EQ(energy_norm(sys, st, zero, 3), 0.0);
    Section one = fill(g, 1, [](double, double, int) { return 1.0; });
    EXPECT_NEAR(energy_norm(sys, st, one, 3), 2 * pi, 1e-12);
    // apex restriction: J^-((1, pi)) at t = 0 is [pi - 1, pi + 1]
    EXPECT_NEAR(energy_norm(sys, st, one, 0, Vec2{1.0, pi}), 2.0, 1e-12);
}

TEST(Energy, ApexNormBoundedByFullNorm)
{
    auto st = ProductSpacetime::minkowski(0, 2, -3, 3);
    const Grid g = st.grid(21, 61);
    auto red = wave_to_first_order(WaveOperator::flat(st));
    Rng rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        Section u = fill(g, 3, [&](double, double, int) { return rng.uniform() - 0.5; });
        const int i = rng.integer(0, g.nt - 1);
        const Vec2 apex{g.t(i) + 2 * rng.uniform(), -2 + 4 * rng.uniform()};
        EXPECT_LE(energy_norm(red.system, st, u, i, apex), energy_norm(red.system, st, u, i) + 1e-15);
    }
}

TEST(Energy, IndefiniteRejected)
{
    auto st = ProductSpacetime::minkowski(0, 1, -1, 1);
    const Grid g = st.grid(5, 5);
    auto sys = FirstOrderSystem<>::constant("neg", -MatR::Identity(1, 1), MatR::Zero(1, 1), MatR::Zero(1, 1));
    EXPECT_THROW(energy_norm(sys, st, Section(g, 1), 0), Error);
}

TEST(Energy, ConstantExamples)
{
    auto st = ProductSpacetime::minkowski(0, 1, -4, 4);
    const Grid g = st.grid(11, 161);
    RasterMask all(g);
    for (auto& v : all.on) v = 1;
    MatR a1(2, 2);
    a1 << 0.5, 0.2, 0.2, -0.3;
    auto c0 = FirstOrderSystem<>::constant("c", MatR::Identity(2, 2), a1, MatR::Zero(2, 2));
    EXPECT_EQ(energy_constant(c0, st, all).c1, 0.0);
    auto c2 = FirstOrderSystem<>::constant("b", MatR::Identity(2, 2), a1, MatR::Identity(2, 2));
    EXPECT_NEAR(energy_constant(c2, st, all).c1, 2.0, 1e-14);
    auto var = FirstOrderSystem<>::make("v", MatrixField<double>::identity(2),
                                        MatrixField<double>::expressions(2, 2, {"sin(x)", "0", "0", "-sin(x)"}),
                                        MatrixField<double>::zero(2, 2));
    EXPECT_NEAR(energy_constant(var, st, all).c1, 1.0, 1e-4);
    EXPECT_NEAR(energy_constant(var, st, all).c2, 1.0, 1e-12);
}

namespace {

// Wave system with a bump of Cauchy data and a source, on a curved metric.
struct EnergyCase {
    ProductSpacetime st;
    WaveReduction red;
    Grid g;
    Section f;
    Section v;
};

EnergyCase energy_case(int nx, bool with_source, double m = 0.0)
{
    ProductSpacetime st(Topology::line, 0, 2, -4, 4, ScalarField::expression("1/(1 + 0.1*x^2)"),
                        ScalarField::expression("1 + 0.05*t"));
    WaveOperator w{st, 0.2, ScalarField::expression("0.1*x"), -m * m};
    auto red = wave_to_first_order(w);
    const Grid g = st.grid((nx - 1) / 2 + 1, nx);
    Section f = red.source(fill(g, 1, [&](double t, double x, int) {
        return with_source ? bump(x, 0.4, 0.7) * bump(t, 0.6, 0.4) : 0.0;
    }));
    const CauchyData u0 = red.embed_exact(
        g, 0, [](double, double x) { return bump(x, -0.3, 0.8); }, [](double, double x) { return 0.5 * bump(x, 0, 0.6); },
        [](double, double x) { return bump_dx(x, -0.3, 0.8); });
    SolveOptions opt;
    opt.cfl = 0.9;
    Section v = solve_cauchy(red.system, st, &f, u0, g, opt);
    return {st, red, g, f, v};
}

} // namespace

TEST(Energy, ZeroSolution)
{
    auto st = ProductSpacetime::minkowski(0, 1, -2, 2);
    const Grid g = st.grid(21, 41);
    auto sys = FirstOrderSystem<>::transport(0.2);
    const auto rep = verify_energy_estimate(sys, st, Section(g, 1), nullptr, {1.0, 0.0}, 0, g.nt - 1);
    EXPECT_EQ(rep.lhs, 0.0);
    EXPECT_TRUE(rep.pass);
}

TEST(Energy, HomogeneousConstantCoefficients)
{
    auto st = ProductSpacetime::minkowski(0, 2, -4, 4);
    const Grid g = st.grid(101, 201);
    auto red = wave_to_first_order(WaveOperator::flat(st));
    const CauchyData u0 = red.embed_exact(
        g, 0, [](double, double x) { return bump(x, 0.3, 1.0); }, [](double, double) { return 0.0; },
        [](double, double x) { return bump_dx(x, 0.3, 1.0); });
    const Section v = solve_cauchy(red.system, st, nullptr, u0, g);
    const Section zero(g, 3);
    const auto rep = verify_energy_estimate(red.system, st, v, &zero, {2.0, 0.5}, 0, g.nt - 1);
    EXPECT_GT(rep.constant, 0.0); // the reduction couples u to u_t through B
    EXPECT_TRUE(rep.pass) << rep.lhs << " " << rep.rhs;

    // pure transport: C = 0 and the energy in the shrinking cone cannot grow
    auto tr = FirstOrderSystem<>::transport(0.5);
    const CauchyData w0 = CauchyData::from_row(fill(g, 1, [](double, double x, int) { return bump(x, 0.3, 1.0); }), 0);
    const Section w = solve_cauchy(tr, st, nullptr, w0, g);
    const Section zt(g, 1);
    const auto rt = verify_energy_estimate(tr, st, w, &zt, {2.0, 0.5}, 0, g.nt - 1);
    EXPECT_EQ(rt.constant, 0.0);
    EXPECT_TRUE(rt.pass) << rt.lhs << " " << rt.rhs;
    EXPECT_LT(rt.lhs, 0.9 * rt.h0);
}

TEST(Energy, CurvedWithSourceHolds)
{
    for (bool src : {false, true}) {
        const auto c = energy_case(201, src, 0.8);
        for (Vec2 apex : {Vec2{2.0, 0.0}, Vec2{2.0, 1.0}, Vec2{1.5, -0.5}}) {
            for (int i1 : {c.g.nt / 2, c.g.nt - 1}) {
                if (apex.t < c.g.t(i1)) continue;
                const auto rep = verify_energy_estimate(c.red.system, c.st, c.v, &c.f, apex, 0, i1);
                EXPECT_TRUE(rep.pass) << src << " " << rep.lhs << " " << rep.rhs;
                if (apex.t > c.g.t(i1) + 0.1) {
                    EXPECT_GT(rep.lhs, 0);
                }
            }
        }
    }
}

TEST(Energy, ApexConeMustFitWindow)
{
    auto st = ProductSpacetime::minkowski(0, 2, -2, 2);
    const Grid g = st.grid(21, 41);
    auto sys = FirstOrderSystem<>::transport(0.2);
    EXPECT_THROW(verify_energy_estimate(sys, st, Section(g, 1), nullptr, {2.0, 1.5}, 0, g.nt - 1), Error);
}

// ---------------------------------------------------------------- finite speed

TEST(FiniteSpeed, ExactConeAtUnitRatio)
{
    auto st = ProductSpacetime::minkowski(0, 2, -4, 4);
    const Grid g = st.grid(101, 401); // dx / dt = 1
    auto red = wave_to_first_order(WaveOperator::klein_gordon(st, 1.0));
    Section f = red.source(fill(g, 1, [](double t, double x, int) { return bump(x, 0.5, 0.3) * bump(t, 0.5, 0.2); }));
    CauchyData u0 = red.embed_exact(
        g, 0, [](double, double x) { return bump(x, -0.8, 0.5); }, [](double, double) { return 0.0; },
        [](double, double x) { return bump_dx(x, -0.8, 0.5); });
    SolveOptions opt;
    opt.cfl = 1.0;
    const Section v = solve_cauchy(red.system, st, &f, u0, g, opt);
    const auto rep = finite_speed_report(st, v, &f, u0);
    EXPECT_LE(rep.leakage, 1e-14);
    EXPECT_GT(rep.total, 0);
}

TEST(FiniteSpeed, ZeroData)
{
    auto st = ProductSpacetime::minkowski(0, 1, -1, 1);
    const Grid g = st.grid(11, 11);
    const auto rep = finite_speed_report(st, Section(g, 1), nullptr, CauchyData::zeros(g, 0, 1));
    EXPECT_EQ(rep.leakage, 0.0);
}

TEST(FiniteSpeed, CurvedWithMargin)
{
    // c = 1/sqrt(1 + 0.5 x^2) <= 1; the grid cone moves at dx/dt = 1.25
    ProductSpacetime st(Topology::line, 0, 1.5, -4, 4, ScalarField::expression("1/(1 + 0.5*x^2)"), 1.0);
    const Grid g = Grid::make(121, 321, 0, 1.5 / 120, -4, 8.0 / 320);
    auto red = wave_to_first_order(WaveOperator::flat(st));
    CauchyData u0 = red.embed_exact(
        g, 0, [](double, double x) { return bump(x, 1.0, 0.4); }, [](double, double) { return 0.0; },
        [](double, double x) { return bump_dx(x, 1.0, 0.4); });
    const Section v = solve_cauchy(red.system, st, nullptr, u0, g);
    const double c_min = st.min_speed(g);
    const double c_grid = g.dx / g.dt;
    const double T = g.t_last() - g.t(0);
    const auto tight = finite_speed_report(st, v, nullptr, u0);
    const auto wide = finite_speed_report(st, v, nullptr, u0, (c_grid - c_min) * T + 2 * g.dx);
    EXPECT_LE(wide.leakage, 1e-12);
    EXPECT_LE(tight.leakage, 1e-2); // only dispersion tails between the cones
}

// ---------------------------------------------------------------- stability

TEST(Stability, ZeroAndLinearity)
{
    auto st = ProductSpacetime::minkowski(0, 1, -3, 3);
    const Grid g = st.grid(41, 121);
    auto red = wave_to_first_order(WaveOperator::klein_gordon(st, 0.5));
    const CauchyData zero_u0 = CauchyData::zeros(g, 0, 3);
    Section df = red.source(fill(g, 1, [](double t, double x, int) { return bump(x, 0, 0.5) * bump(t, 0.4, 0.2); }));
    Perturbation<> none{std::nullopt, zero_u0};
    Perturbation<> once{df, zero_u0};
    Perturbation<> twice{2.0 * df, zero_u0};
    const auto table = stability_probe(red.system, st, nullptr, zero_u0, g, {none, once, twice});
    EXPECT_EQ(table.rows[0].ratio, 0.0);
    EXPECT_EQ(table.rows[2].response, 2 * table.rows[1].response);
    EXPECT_DOUBLE_EQ(table.rows[2].ratio, table.rows[1].ratio);
}

TEST(Stability, TransportIsIsometric)
{
    double prev = 0;
    for (int nx : {121, 241}) {
        auto st = ProductSpacetime::minkowski(0, 1.5, -3, 3);
        const Grid g = st.grid((nx - 1) / 4 + 1, nx);
        auto sys = FirstOrderSystem<>::transport(0.5);
        const CauchyData base = row_data(g, 0, 1, [](double x, int) { return bump(x, -0.5, 0.6); });
        std::vector<Perturbation<>> perts;
        for (int k = 0; k < 4; ++k) {
            Perturbation<> p{std::nullopt, row_data(g, 0, 1, [k](double x, int) { return 0.1 * bump(x, -0.8 + 0.4 * k, 0.5); })};
            perts.push_back(p);
        }
        Section df = fill(g, 1, [](double t, double x, int) { return bump(x - 0.5 * t, 0.0, 0.5) * bump(t, 0.5, 0.3); });
        perts.push_back({df, CauchyData::zeros(g, 0, 1)});
        const auto table = stability_probe(sys, st, nullptr, base, g, perts);
        const double c = table.constant();
        EXPECT_NEAR(c, 1.0, 0.05) << nx;
        if (prev > 0) {
            EXPECT_LE(c / prev, 1.2);
        }
        prev = c;
    }
}

// ---------------------------------------------------------------- cutoffs

TEST(Cutoff, Examples)
{
    const Grid g = Grid::window(0, 1, 101, -1, 1, 201);
    EXPECT_THROW(make_cutoff(g, [](double t, double) { return t; }, 0.5, 0.5), Error);
    EXPECT_THROW(make_time_cutoff(g, 0.5, 0.02), Error); // two cells
    const auto c = make_time_cutoff(g, 0.6, 0.2);
    // midpoint of the ramp t = 0.5
    EXPECT_NEAR(c.chi.at(50, 0), 0.5, 1e-12);
    EXPECT_EQ(c.chi.at(60, 7), 1.0);
    EXPECT_EQ(c.chi.at(39, 7), 0.0);
    EXPECT_TRUE(c.plateau.subset_of(c.support));
    EXPECT_DOUBLE_EQ(c.derivative_bound(), 1.875 / 0.2);
}

TEST(Cutoff, DerivativeBoundAndRange)
{
    const Grid g = Grid::window(-2, 2, 201, -2, 2, 201);
    // plateau: the unit diamond |t| + |x| <= 0.5
    const PLSet diamond = PLSet::single({HalfPlane(1, 1, 0.5), HalfPlane(1, -1, 0.5), HalfPlane(-1, 1, 0.5),
                                         HalfPlane(-1, -1, 0.5)});
    const auto c = make_set_cutoff(g, diamond, 0.5);
    double dmax = 0;
    for (int i = 0; i + 1 < g.nt; ++i)
        for (int j = 0; j + 1 < g.nx; ++j) {
            const double v = c.chi.at(i, j);
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
            dmax = std::max(dmax, std::abs(c.chi.at(i + 1, j) - v) / g.dt);
            dmax = std::max(dmax, std::abs(c.chi.at(i, j + 1) - v) / g.dx);
            if (diamond.contains({g.t(i), g.x(j)})) {
                EXPECT_EQ(v, 1.0);
            }
        }
    EXPECT_LE(dmax, c.derivative_bound() * (1 + 1e-9));
    EXPECT_GT(dmax, 0.8 * c.derivative_bound());
    // outside the gap neighbourhood chi vanishes
    EXPECT_EQ(c.chi.at(0, 0), 0.0);
}

// ---------------------------------------------------------------- files

TEST(Files, Gh1RoundTripRealAndComplex)
{
    const Grid g = Grid::circle(0, 1, 3, 0, 2, 4);
    Section u = fill(g, 2, [](double t, double x, int k) { return t + 10 * x + 100 * k + 1e-17; });
    const std::string path = ::testing::TempDir() + "/rt.gh1";
    write_gh1(path, u);
    const Section back = read_gh1(path);
    EXPECT_EQ(back.values, u.values);
    EXPECT_EQ(back.grid.topology, Topology::circle);
    GridSection<std::complex<double>> z(g, 1);
    z.at(1, 2) = {0.25, -3.5};
    write_gh1(path, z);
    EXPECT_EQ(read_gh1<std::complex<double>>(path).values, z.values);
    EXPECT_THROW(read_gh1(path), Error);
    std::remove(path.c_str());
}
