#pragma once

// Cauchy solves for symmetric hyperbolic systems by direct marching, and the
// energy / finite-speed / stability audits built on them.

#include "core.hpp"
#include "grid.hpp"
#include "operators.hpp"
#include "spacetime.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

namespace greenhyp {

enum class Scheme { lax_wendroff, rk2, upwind };
enum class TimeDirection { forward, backward };

inline const char* scheme_name(Scheme s)
{
    switch (s) {
    case Scheme::lax_wendroff: return "lw";
    case Scheme::rk2: return "rk2";
    case Scheme::upwind: return "upwind";
    }
    return "?";
}

inline Scheme parse_scheme(const std::string& s)
{
    if (s == "lw" || s == "lax_wendroff") return Scheme::lax_wendroff;
    if (s == "rk2") return Scheme::rk2;
    if (s == "upwind") return Scheme::upwind;
    throw Error(ErrorKind::invalid_argument, "unknown scheme '" + s + "' (expected lw, rk2 or upwind)");
}

struct SolveOptions {
    Scheme scheme = Scheme::lax_wendroff;
    double cfl = 0.8;
    double dissipation = 1.0; // rk2 only
    TimeDirection direction = TimeDirection::forward;
    bool check_cone = true;
    int cone_margin_cells = 2;
    bool validate = true;
    const RasterMask* domain = nullptr; // restricted solve: nodes outside are zero
};

namespace detail {

// Coefficients of the time-directed system at one point: with sigma = +-1 the
// marched equation is A0 u_tau + sigma A1 u_x + sigma B u = sigma f.
template <class T>
struct PointCoeffs {
    Mat<T> a0inv, m, n;
};

template <class T>
class CoeffSampler {
public:
    CoeffSampler(const FirstOrderSystem<T>& sys, double sigma) : sys_(sys), sigma_(sigma)
    {
        if (sys.is_constant()) cached_ = make(sys.a0.constant_value(), sys.a1.constant_value(), sys.b.constant_value());
    }
    [[nodiscard]] bool constant() const { return cached_.has_value(); }
    [[nodiscard]] PointCoeffs<T> at(double t, double x) const
    {
        if (cached_) return *cached_;
        return make(sys_.a0(t, x), sys_.a1(t, x), sys_.b(t, x));
    }

private:
    [[nodiscard]] PointCoeffs<T> make(const Mat<T>& a0, const Mat<T>& a1, const Mat<T>& b) const
    {
        Eigen::PartialPivLU<Mat<T>> lu(a0);
        PointCoeffs<T> c;
        c.a0inv = lu.inverse();
        c.m = T(sigma_) * (c.a0inv * a1);
        c.n = T(sigma_) * (c.a0inv * b);
        return c;
    }
    const FirstOrderSystem<T>& sys_;
    double sigma_;
    std::optional<PointCoeffs<T>> cached_;
};

// out = A v for an n x n matrix and n-vectors given as raw pointers.
template <class T>
inline void matvec(const Mat<T>& a, const T* v, T* out, int n)
{
    for (int r = 0; r < n; ++r) {
        T acc{};
        for (int c = 0; c < n; ++c) acc += a(r, c) * v[c];
        out[r] = acc;
    }
}

template <class T>
double spectral_radius(const FirstOrderSystem<T>& sys, double t, double x)
{
    const Mat<T> h = sys.fiber_metric;
    const Mat<T> s = h * sys.a0(t, x);
    const Mat<T> k = h * sys.a1(t, x);
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat<T>> es(0.5 * (k + k.adjoint()), 0.5 * (s + s.adjoint()),
                                                        Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) {
        // fall back to the plain eigenvalues of A0^-1 A1
        Eigen::ComplexEigenSolver<Mat<std::complex<double>>> ce(
            (sys.a0(t, x).inverse() * sys.a1(t, x)).template cast<std::complex<double>>());
        return ce.eigenvalues().cwiseAbs().maxCoeff();
    }
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

} // namespace detail

// Maximum over the grid of the spectral radius of A0^-1 A1.
template <class T>
double max_system_speed(const FirstOrderSystem<T>& sys, const Grid& g)
{
    if (sys.is_constant()) return detail::spectral_radius(sys, 0, 0);
    double m = 0;
    for (int i = 0; i < g.nt; ++i)
        for (int j = 0; j < g.nx; ++j) m = std::max(m, detail::spectral_radius(sys, g.t(i), g.x(j)));
    return m;
}

// Seed for the data's causal shadow: nonzero nodes of f within the marched
// rows plus the nonzero part of the Cauchy row.
template <class T>
RasterMask data_support(const Grid& g, const std::type_identity_t<GridSection<T>>* f, const CauchyDataT<T>& u0, int row_lo, int row_hi)
{
    RasterMask seed(g);
    if (f)
        for (int i = row_lo; i <= row_hi; ++i)
            for (int j = 0; j < g.nx; ++j)
                for (int k = 0; k < f->rank; ++k)
                    if (f->at(i, j, k) != T{}) {
                        seed.set(i, j);
                        break;
                    }
    for (int j = 0; j < g.nx; ++j)
        for (int k = 0; k < u0.rank; ++k)
            if (u0.at(j, k) != T{}) {
                seed.set(u0.slice, j);
                break;
            }
    return seed;
}

// Solves P u = f with u = u0 on row u0.slice, marching forward (rows above the
// slice) or backward (rows below). Rows not marched are zero. The result mask
// is the one-cell-dilated grid cone of the data, which contains every nonzero
// node by stencil locality.
// Speed of the numerical domain of dependence: Lax-Wendroff and upwind reach
// one cell per step, rk2 two stages of the radius-2 dissipation stencil.
inline double grid_cone_speed(const Grid& g, Scheme s)
{
    return (s == Scheme::rk2 ? 4.0 : 1.0) * g.dx / g.dt;
}

template <class T>
GridSection<T> solve_cauchy(const FirstOrderSystem<T>& sys, const ProductSpacetime& st, const std::type_identity_t<GridSection<T>>* f,
                            const CauchyDataT<T>& u0, const Grid& g, const SolveOptions& opt = {})
{
    const int n = sys.rank();
    require(u0.rank == n && static_cast<int>(u0.values.size()) == g.nx * n, "Cauchy data shape mismatch",
            ErrorKind::invalid_argument);
    require(u0.slice >= 0 && u0.slice < g.nt, "Cauchy slice outside the grid", ErrorKind::invalid_argument);
    if (f) {
        require(f->rank == n, "source rank differs from the system", ErrorKind::invalid_argument);
        require(f->grid.same_as(g), "source grid differs from the solve grid", ErrorKind::invalid_argument);
    }
    require((g.topology == Topology::circle) == (st.topology() == Topology::circle), "grid and spacetime topology differ",
            ErrorKind::invalid_argument);
    require(g.nx >= 3, "need at least three columns", ErrorKind::invalid_argument);
    if (opt.domain) require(opt.domain->grid.same_as(g), "domain mask grid mismatch", ErrorKind::invalid_argument);

    const bool forward = opt.direction == TimeDirection::forward;
    const int step = forward ? 1 : -1;
    const int first = u0.slice;
    const int last = forward ? g.nt - 1 : 0;
    const int lo = std::min(first, last), hi = std::max(first, last);

    if (opt.validate) {
        const int stride = std::max(1, std::max(g.nt, g.nx) / 16);
        const auto rep = validate_symmetric_hyperbolic(sys, st, g, stride);
        require(rep.valid, "validation failure: " + rep.message + " at (t,x) = (" + format_short(rep.fail_t) + ", " +
                               format_short(rep.fail_x) + ")",
                ErrorKind::precondition);
    }
    const double speed = max_system_speed(sys, g);
    const double ratio = g.dt * speed / g.dx;
    require(ratio <= opt.cfl * (1 + 1e-12), "CFL violation: dt * max speed / dx = " + format_short(ratio) + " > " +
                                                format_short(opt.cfl) + "; refine the time step",
            ErrorKind::precondition);

    const RasterMask seed = data_support(g, f, u0, lo, hi);
    const Direction dir = forward ? Direction::future : Direction::past;
    if (opt.check_cone && g.topology == Topology::line && seed.any()) {
        ConeOptions co;
        co.dilation_cells = 0;
        const auto cone = raster_j(st, seed, dir, co);
        const double edge_lo = g.x(0) + opt.cone_margin_cells * g.dx;
        const double edge_hi = g.x_last() - opt.cone_margin_cells * g.dx;
        for (int i = lo; i <= hi; ++i)
            for (const Interval& iv : cone.rows[i])
                if (iv.lo < edge_lo - 1e-12 || iv.hi > edge_hi + 1e-12)
                    throw Error(ErrorKind::precondition,
                                "cone escape: the causal shadow of the data reaches within " +
                                    std::to_string(opt.cone_margin_cells) + " cells of the window edge at t = " +
                                    format_short(g.t(i)) + "; enlarge the window");
    }

    GridSection<T> u(g, n);
    std::copy(u0.values.begin(), u0.values.end(), u.row(first));
    const double sigma = forward ? 1.0 : -1.0;
    const detail::CoeffSampler<T> coeff(sys, sigma);
    const bool circle = g.topology == Topology::circle;
    const int nx = g.nx;
    const double dtau = g.dt;
    auto fval = [&](int i, int j, int k) -> T { return f ? T(sigma) * f->at(i, j, k) : T{}; };
    auto apply_domain = [&](int i) {
        if (!opt.domain) return;
        for (int j = 0; j < nx; ++j)
            if (!(*opt.domain)(i, j))
                for (int k = 0; k < n; ++k) u.at(i, j, k) = T{};
    };
    apply_domain(first);

    std::vector<T> half(static_cast<std::size_t>(nx) * n), tmp(n), tmp2(n), avg(n), src(n);
    std::vector<T> stage(static_cast<std::size_t>(nx) * n), lbuf(static_cast<std::size_t>(nx) * n);
    const int jlo = circle ? 0 : 1, jhi = circle ? nx - 1 : nx - 2;

    // L(v) = -M Dx v - N v + A0^-1 f at row time t (rk2 only)
    auto mol_rhs = [&](const T* v, double t, int frow_a, int frow_b, double wf, T* out) {
        for (int j = 0; j < nx; ++j)
            for (int k = 0; k < n; ++k) out[j * n + k] = T{};
        for (int j = jlo; j <= jhi; ++j) {
            const int jm = circle ? g.wrap(j - 1) : j - 1, jp = circle ? g.wrap(j + 1) : j + 1;
            const auto c = coeff.at(t, g.x(j));
            for (int k = 0; k < n; ++k) tmp[k] = (v[jp * n + k] - v[jm * n + k]) / (2 * g.dx);
            detail::matvec(c.m, tmp.data(), tmp2.data(), n);
            detail::matvec(c.n, v + j * n, avg.data(), n);
            for (int k = 0; k < n; ++k) src[k] = (1 - wf) * fval(frow_a, j, k) + wf * fval(frow_b, j, k);
            detail::matvec(c.a0inv, src.data(), tmp.data(), n);
            for (int k = 0; k < n; ++k) out[j * n + k] = -tmp2[k] - avg[k] + tmp[k];
            if (opt.dissipation != 0.0) {
                const bool room = circle || (j >= 2 && j <= nx - 3);
                if (room) {
                    const int jmm = circle ? g.wrap(j - 2) : j - 2, jpp = circle ? g.wrap(j + 2) : j + 2;
                    for (int k = 0; k < n; ++k) {
                        const T d4 = v[jpp * n + k] - T(4) * v[jp * n + k] + T(6) * v[j * n + k] -
                                     T(4) * v[jm * n + k] + v[jmm * n + k];
                        out[j * n + k] -= T(opt.dissipation / (16 * dtau)) * d4;
                    }
                }
            }
        }
    };

    for (int i = first; i != last; i += step) {
        const int ib = i + step;
        const double ta = g.t(i), tb = g.t(ib);
        const double tm = 0.5 * (ta + tb);
        const T* ua = u.row(i);
        T* ub = u.row(ib);
        switch (opt.scheme) {
        case Scheme::lax_wendroff: {
            // half step to (t_i, x_{j+1/2}) in tau-time dtau/2
            const int hcount = circle ? nx : nx - 1;
            for (int h = 0; h < hcount; ++h) {
                const int j1 = circle ? g.wrap(h + 1) : h + 1;
                const double xh = g.x(h) + 0.5 * g.dx;
                const auto c = coeff.at(ta, xh);
                for (int k = 0; k < n; ++k) {
                    avg[k] = T(0.5) * (ua[h * n + k] + ua[j1 * n + k]);
                    tmp[k] = (ua[j1 * n + k] - ua[h * n + k]) / g.dx;
                    src[k] = T(0.5) * (fval(i, h, k) + fval(i, j1, k));
                }
                detail::matvec(c.m, tmp.data(), tmp2.data(), n);
                detail::matvec(c.n, avg.data(), tmp.data(), n);
                T* out = half.data() + static_cast<std::size_t>(h) * n;
                for (int k = 0; k < n; ++k) out[k] = avg[k] - T(0.5 * dtau) * (tmp2[k] + tmp[k]);
                detail::matvec(c.a0inv, src.data(), tmp.data(), n);
                for (int k = 0; k < n; ++k) out[k] += T(0.5 * dtau) * tmp[k];
            }
            for (int j = 0; j < nx; ++j)
                for (int k = 0; k < n; ++k) ub[j * n + k] = T{};
            for (int j = jlo; j <= jhi; ++j) {
                const int hm = circle ? g.wrap(j - 1) : j - 1;
                const T* hp_v = half.data() + static_cast<std::size_t>(j) * n;
                const T* hm_v = half.data() + static_cast<std::size_t>(hm) * n;
                const auto c = coeff.at(tm, g.x(j));
                for (int k = 0; k < n; ++k) {
                    tmp[k] = (hp_v[k] - hm_v[k]) / g.dx;
                    avg[k] = T(0.5) * (hp_v[k] + hm_v[k]);
                    src[k] = T(0.5) * (fval(i, j, k) + fval(ib, j, k));
                }
                detail::matvec(c.m, tmp.data(), tmp2.data(), n);
                detail::matvec(c.n, avg.data(), tmp.data(), n);
                for (int k = 0; k < n; ++k) ub[j * n + k] = ua[j * n + k] - T(dtau) * (tmp2[k] + tmp[k]);
                detail::matvec(c.a0inv, src.data(), tmp.data(), n);
                for (int k = 0; k < n; ++k) ub[j * n + k] += T(dtau) * tmp[k];
            }
            break;
        }
        case Scheme::rk2: {
            mol_rhs(ua, ta, i, ib, 0.0, lbuf.data());
            for (std::size_t q = 0; q < stage.size(); ++q) stage[q] = ua[q] + T(dtau) * lbuf[q];
            if (opt.domain)
                for (int j = 0; j < nx; ++j)
                    if (!(*opt.domain)(ib, j))
                        for (int k = 0; k < n; ++k) stage[j * n + k] = T{};
            std::vector<T> l2(stage.size());
            mol_rhs(stage.data(), tb, i, ib, 1.0, l2.data());
            for (std::size_t q = 0; q < stage.size(); ++q)
                ub[q] = T(0.5) * (ua[q] + stage[q] + T(dtau) * l2[q]);
            if (!circle)
                for (int k = 0; k < n; ++k) {
                    ub[k] = T{};
                    ub[(nx - 1) * n + k] = T{};
                }
            break;
        }
        case Scheme::upwind: {
            for (int j = 0; j < nx; ++j)
                for (int k = 0; k < n; ++k) ub[j * n + k] = T{};
            for (int j = jlo; j <= jhi; ++j) {
                const int jm = circle ? g.wrap(j - 1) : j - 1, jp = circle ? g.wrap(j + 1) : j + 1;
                const double x = g.x(j);
                const Mat<T> h = sys.fiber_metric;
                const Mat<T> s0 = h * sys.a0(ta, x);
                const Mat<T> k1 = T(sigma) * (h * sys.a1(ta, x));
                Eigen::GeneralizedSelfAdjointEigenSolver<Mat<T>> es(0.5 * (k1 + k1.adjoint()),
                                                                    0.5 * (s0 + s0.adjoint()));
                require(es.info() == Eigen::Success, "upwind: characteristic decomposition failed");
                const Mat<T>& v = es.eigenvectors(); // v* S v = I
                const Mat<T> vinv = v.adjoint() * (0.5 * (s0 + s0.adjoint()));
                Mat<T> lp = Mat<T>::Zero(n, n), lm = Mat<T>::Zero(n, n);
                for (int k = 0; k < n; ++k) {
                    const double l = es.eigenvalues()(k);
                    if (l > 0) lp(k, k) = l;
                    else lm(k, k) = l;
                }
                const Mat<T> mp = v * lp * vinv, mm = v * lm * vinv;
                const auto c = coeff.at(ta, x);
                for (int k = 0; k < n; ++k) {
                    tmp[k] = (ua[j * n + k] - ua[jm * n + k]) / g.dx;
                    tmp2[k] = (ua[jp * n + k] - ua[j * n + k]) / g.dx;
                    src[k] = fval(i, j, k);
                }
                std::vector<T> a(n), b(n), cc(n), d(n);
                detail::matvec(mp, tmp.data(), a.data(), n);
                detail::matvec(mm, tmp2.data(), b.data(), n);
                detail::matvec(c.n, ua + j * n, cc.data(), n);
                detail::matvec(c.a0inv, src.data(), d.data(), n);
                for (int k = 0; k < n; ++k) ub[j * n + k] = ua[j * n + k] - T(dtau) * (a[k] + b[k] + cc[k] - d[k]);
            }
            break;
        }
        }
        apply_domain(ib);
    }

    ConeOptions grid_cone;
    grid_cone.speed_floor = grid_cone_speed(g, opt.scheme);
    RasterMask m = raster_j(st, seed, dir, grid_cone).mask;
    for (int i = 0; i < g.nt; ++i)
        if (i < lo || i > hi)
            for (int j = 0; j < g.nx; ++j) m.on[g.index(i, j)] = 0;
    if (opt.domain) m = m.intersect(*opt.domain);
    u.mask = m;
    return u;
}

// ---------------------------------------------------------------- energy

// |u|_0^2 sqrt(gamma) = sqrt(beta gamma) <H A0 u, u> at a node.
template <class T>
double energy_density(const FirstOrderSystem<T>& sys, const ProductSpacetime& st, const T* u, double t, double x)
{
    const int n = sys.rank();
    const Mat<T> s = sys.fiber_metric * sys.a0(t, x);
    T acc{};
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) acc += Eigen::numext::conj(u[r]) * s(r, c) * u[c];
    return st.volume_density(t, x) * std::real(acc);
}

namespace detail {

// Exact integral over [a, b] of the piecewise-linear interpolant of q on the
// grid row (periodic on the circle, zero outside the window on the line).
inline double pl_integral(const Grid& g, const std::vector<double>& q, double a, double b)
{
    if (b <= a) return 0.0;
    const bool circle = g.topology == Topology::circle;
    const double L = g.circumference();
    if (circle && b - a >= L) {
        double full = 0;
        for (double v : q) full += v;
        full *= g.dx;
        const double reps = std::floor((b - a) / L);
        return reps * full + pl_integral(g, q, a + reps * L, b);
    }
    auto value = [&](int j) {
        if (circle) return q[g.wrap(j)];
        return (j >= 0 && j < g.nx) ? q[j] : 0.0;
    };
    const double x0 = g.x(0);
    const double sa = (a - x0) / g.dx, sb = (b - x0) / g.dx;
    double total = 0;
    int j = static_cast<int>(std::floor(sa));
    while (j < sb) {
        const double lo = std::max(sa, static_cast<double>(j)), hi = std::min(sb, static_cast<double>(j + 1));
        if (hi > lo) {
            const double v0 = value(j), v1 = value(j + 1);
            // integrate v0 + (v1 - v0)(s - j) over [lo, hi]
            const double l = lo - j, h = hi - j;
            total += v0 * (h - l) + 0.5 * (v1 - v0) * (h * h - l * l);
        }
        ++j;
    }
    return total * g.dx;
}

} // namespace detail

// Slice interval of J^-(apex) at time t (continuous), or nothing when the
// slice lies above the apex.
inline std::optional<Interval> past_slice(const ProductSpacetime& st, Vec2 apex, double t)
{
    if (t > apex.t + 1e-12) return std::nullopt;
    const double h = std::max(1e-3, (apex.t - t) / 64);
    return Interval{st.null_curve(apex.t, apex.x, t, +1, 0.0, h), st.null_curve(apex.t, apex.x, t, -1, 0.0, h)};
}

template <class T>
std::vector<double> energy_row(const FirstOrderSystem<T>& sys, const ProductSpacetime& st, const GridSection<T>& u,
                               int i)
{
    std::vector<double> q(u.grid.nx);
    for (int j = 0; j < u.grid.nx; ++j) q[j] = energy_density(sys, st, &u.at(i, j, 0), u.grid.t(i), u.grid.x(j));
    return q;
}

// h(s) = integral over the slice (or its part inside J^-(apex)) of |u|_0^2 dA.
template <class T>
double energy_norm(const FirstOrderSystem<T>& sys, const ProductSpacetime& st, const GridSection<T>& u, int slice,
                   std::optional<Vec2> apex = std::nullopt)
{
    const Grid& g = u.grid;
    require(slice >= 0 && slice < g.nt, "slice outside the grid", ErrorKind::invalid_argument);
    const double t = g.t(slice);
    for (int j = 0; j < g.nx; ++j) {
        const Mat<T> s = sys.fiber_metric * sys.a0(t, g.x(j));
        Eigen::SelfAdjointEigenSolver<Mat<T>> es(0.5 * (s + s.adjoint()), Eigen::EigenvaluesOnly);
        require(es.eigenvalues().minCoeff() > 0, "indefinite H A0 on the slice", ErrorKind::precondition);
        if (sys.is_constant()) break;
    }
    const std::vector<double> q = energy_row(sys, st, u, slice);
    if (!apex) {
        if (g.topology == Topology::circle) {
            double s = 0;
            for (double v : q) s += v;
            return s * g.dx;
        }
        double s = 0;
        for (int j = 0; j < g.nx; ++j) s += (j == 0 || j == g.nx - 1 ? 0.5 : 1.0) * q[j];
        return s * g.dx;
    }
    const auto iv = past_slice(st, *apex, t);
    if (!iv) return 0.0;
    double a = iv->lo, b = iv->hi;
    if (g.topology == Topology::line) {
        a = std::max(a, g.x(0));
        b = std::min(b, g.x_last());
    }
    return detail::pl_integral(g, q, a, b);
}

struct EnergyConstant {
    double c1 = 0; // sup |H(B~ - 2B)| against H A0
    double c2 = 0; // source cross-term bound
    [[nodiscard]] double value(bool source) const { return c1 + (source ? c2 : 0.0); }
};

// B~ = dt A0 + dx A1 + (w_t A0 + w_x A1)/w with w = sqrt(beta gamma) (finite
// differences), and C1 = max |lambda| of the pencil (sym H(B~ - 2B), H A0) over
// the region's nodes. C2 = || (H A0)^{-1/2} H (H A0)^{-1/2} ||.
template <class T>
EnergyConstant energy_constant(const FirstOrderSystem<T>& sys, const ProductSpacetime& st, const RasterMask& region)
{
    require(region.any(), "energy_constant: empty region", ErrorKind::invalid_argument);
    const Grid& g = region.grid;
    const Mat<T>& h = sys.fiber_metric;
    const bool constant = sys.is_constant() && st.constant_metric();
    EnergyConstant out;
    const double fd = 1e-5;
    for (int i = 0; i < g.nt; ++i)
        for (int j = 0; j < g.nx; ++j) {
            if (!region(i, j)) continue;
            const double t = g.t(i), x = g.x(j);
            const Mat<T> a0 = sys.a0(t, x), a1 = sys.a1(t, x), b = sys.b(t, x);
            Mat<T> bt = sys.a0.d_dt(t, x, fd) + sys.a1.d_dx(t, x, fd);
            if (!st.constant_metric()) {
                const double w = st.volume_density(t, x);
                const double wt = (st.volume_density(t + fd, x) - st.volume_density(t - fd, x)) / (2 * fd);
                const double wx = (st.volume_density(t, x + fd) - st.volume_density(t, x - fd)) / (2 * fd);
                bt += (T(wt) * a0 + T(wx) * a1) / T(w);
            }
            const Mat<T> hb = h * b;
            Mat<T> k = h * bt - hb - hb.adjoint();
            k = 0.5 * (k + k.adjoint());
            Mat<T> s = h * a0;
            s = 0.5 * (s + s.adjoint());
            Eigen::GeneralizedSelfAdjointEigenSolver<Mat<T>> es(k, s, Eigen::EigenvaluesOnly);
            require(es.info() == Eigen::Success, "energy_constant: H A0 not positive definite", ErrorKind::precondition);
            out.c1 = std::max(out.c1, es.eigenvalues().cwiseAbs().maxCoeff());
            const Mat<T> hh = 0.5 * (h + h.adjoint());
            Eigen::GeneralizedSelfAdjointEigenSolver<Mat<T>> es2(hh * s.inverse() * hh, s, Eigen::EigenvaluesOnly);
            out.c2 = std::max(out.c2, std::sqrt(std::max(0.0, es2.eigenvalues().maxCoeff())));
            if (constant) return out;
        }
    return out;
}

struct EnergyReport {
    double lhs = 0;   // h(t1)
    double rhs = 0;   // Groenwall bound plus slack
    double slack = 0;
    double ratio = 0; // lhs / rhs (0 when both vanish)
    double h0 = 0;
    double source_integral = 0;
    double constant = 0;
    bool pass = true;
};

// h(t1) <= [C int_{t0}^{t1} int |Pu|_0^2 + h(t0)] e^{C (t1 - t0)} + slack on the
// past cone of the apex. Pu is taken from pu when given, otherwise from apply.
template <class T>
EnergyReport verify_energy_estimate(const FirstOrderSystem<T>& sys, const ProductSpacetime& st, const GridSection<T>& u,
                                    const std::type_identity_t<GridSection<T>>* pu, Vec2 apex, int i0, int i1, double kappa = 10.0)
{
    const Grid& g = u.grid;
    require(0 <= i0 && i0 <= i1 && i1 < g.nt, "energy estimate rows outside the grid", ErrorKind::invalid_argument);
    require(apex.t >= g.t(i1) - 1e-12, "apex must lie above the final slice", ErrorKind::invalid_argument);
    GridSection<T> residual;
    if (!pu) {
        residual = apply(sys, u);
        pu = &residual;
    }
    // region: the past cone of the apex between the two slices
    RasterMask region(g);
    std::vector<Interval> slices(g.nt);
    for (int i = i0; i <= i1; ++i) {
        const auto iv = past_slice(st, apex, g.t(i));
        require(iv.has_value(), "apex below a slice");
        slices[i] = *iv;
        if (g.topology == Topology::line)
            require(iv->lo >= g.x(0) - 1e-12 && iv->hi <= g.x_last() + 1e-12,
                    "apex cone leaves the window at t = " + format_short(g.t(i)), ErrorKind::precondition);
        for (int j = 0; j < g.nx; ++j) {
            const double x = g.x(j);
            if (x >= iv->lo - g.dx && x <= iv->hi + g.dx) region.set(i, j);
        }
    }
    bool has_source = false;
    for (int i = i0; i <= i1 && !has_source; ++i)
        for (int j = 0; j < g.nx && !has_source; ++j)
            for (int k = 0; k < pu->rank; ++k)
                if (pu->at(i, j, k) != T{} && slices[i].lo <= g.x(j) + g.dx && g.x(j) - g.dx <= slices[i].hi) {
                    has_source = true;
                    break;
                }
    const auto ec = energy_constant(sys, st, region);
    EnergyReport rep;
    rep.constant = ec.value(has_source);
    double hmax = 0;
    for (int i = i0; i <= i1; ++i) hmax = std::max(hmax, energy_norm(sys, st, u, i, apex));
    rep.h0 = energy_norm(sys, st, u, i0, apex);
    rep.lhs = energy_norm(sys, st, u, i1, apex);
    if (has_source) {
        std::vector<double> rows;
        for (int i = i0; i <= i1; ++i) {
            double a = slices[i].lo, b = slices[i].hi;
            if (g.topology == Topology::line) {
                a = std::max(a, g.x(0));
                b = std::min(b, g.x_last());
            }
            rows.push_back(detail::pl_integral(g, energy_row(sys, st, *pu, i), a, b));
        }
        for (std::size_t k = 0; k + 1 < rows.size(); ++k) rep.source_integral += 0.5 * (rows[k] + rows[k + 1]) * g.dt;
    }
    rep.slack = kappa * (g.dx * g.dx + g.dt * g.dt) * hmax;
    const double T_ = g.t(i1) - g.t(i0);
    rep.rhs = (rep.constant * rep.source_integral + rep.h0) * std::exp(rep.constant * T_) + rep.slack;
    rep.pass = rep.lhs <= rep.rhs;
    rep.ratio = rep.rhs > 0 ? rep.lhs / rep.rhs : 0.0;
    return rep;
}

// ---------------------------------------------------------------- finite speed

struct LeakageReport {
    double leakage = 0;   // L2 mass outside the cone / total mass
    double outside = 0;   // absolute L2 mass outside
    double total = 0;
    std::size_t cone_nodes = 0;
};

// Mass of u outside the one-cell-dilated rasterized J(supp f cup supp u0),
// optionally widened by `margin` on both sides.
template <class T>
LeakageReport finite_speed_report(const ProductSpacetime& st, const GridSection<T>& u, const std::type_identity_t<GridSection<T>>* f,
                                  const CauchyDataT<T>& u0, double margin = 0.0)
{
    const Grid& g = u.grid;
    const RasterMask seed = data_support(g, f, u0, 0, g.nt - 1);
    LeakageReport rep;
    rep.total = l2_norm(u);
    if (!seed.any() || rep.total == 0.0) return rep;
    ConeOptions co;
    co.margin = margin;
    const RasterMask cone = raster_j_both(st, seed, co);
    rep.cone_nodes = cone.count();
    RasterMask outside(g);
    for (std::size_t k = 0; k < cone.on.size(); ++k) outside.on[k] = cone.on[k] ? 0 : 1;
    rep.outside = l2_norm(u, &outside);
    rep.leakage = rep.outside / rep.total;
    return rep;
}

// ---------------------------------------------------------------- stability

template <class T = double>
struct Perturbation {
    std::optional<GridSection<T>> df;
    CauchyDataT<T> du0;
};

struct StabilityRow {
    double response = 0; // ||du||
    double data = 0;     // ||(df, du0)||
    double ratio = 0;
};

struct StabilityTable {
    std::vector<StabilityRow> rows;
    [[nodiscard]] double constant() const
    {
        double m = 0;
        for (const auto& r : rows) m = std::max(m, r.ratio);
        return m;
    }
};

template <class T>
double slice_l2(const GridSection<T>& u, int i)
{
    double s = 0;
    for (int j = 0; j < u.grid.nx; ++j)
        for (int k = 0; k < u.rank; ++k) s += std::norm(u.at(i, j, k));
    return std::sqrt(s * u.grid.dx);
}

template <class T>
double cauchy_l2(const CauchyDataT<T>& d, double dx)
{
    double s = 0;
    for (const T& v : d.values) s += std::norm(v);
    return std::sqrt(s * dx);
}

// ||du|| = max_s ||du(s)||_L2, ||(df, du0)|| = ||du0||_L2 + int ||df(s)||_L2 ds.
template <class T>
StabilityTable stability_probe(const FirstOrderSystem<T>& sys, const ProductSpacetime& st,
                               const std::type_identity_t<GridSection<T>>* base_f, const CauchyDataT<T>& base_u0, const Grid& g,
                               const std::vector<Perturbation<T>>& perts, const SolveOptions& opt = {})
{
    const GridSection<T> base = solve_cauchy(sys, st, base_f, base_u0, g, opt);
    StabilityTable table;
    for (const auto& p : perts) {
        CauchyDataT<T> u0 = base_u0;
        require(p.du0.values.size() == u0.values.size() && p.du0.slice == u0.slice, "perturbation shape mismatch",
                ErrorKind::invalid_argument);
        for (std::size_t k = 0; k < u0.values.size(); ++k) u0.values[k] += p.du0.values[k];
        std::optional<GridSection<T>> f;
        if (base_f) f = *base_f;
        if (p.df) f = f ? *f + *p.df : *p.df;
        const GridSection<T> pert = solve_cauchy(sys, st, f ? &*f : nullptr, u0, g, opt);
        StabilityRow row;
        for (int i = 0; i < g.nt; ++i) {
            double s = 0;
            for (int j = 0; j < g.nx; ++j)
                for (int k = 0; k < pert.rank; ++k) s += std::norm(pert.at(i, j, k) - base.at(i, j, k));
            row.response = std::max(row.response, std::sqrt(s * g.dx));
        }
        row.data = cauchy_l2(p.du0, g.dx);
        if (p.df) {
            const int lo = opt.direction == TimeDirection::forward ? base_u0.slice : 0;
            const int hi = opt.direction == TimeDirection::forward ? g.nt - 1 : base_u0.slice;
            for (int i = lo; i < hi; ++i) row.data += 0.5 * (slice_l2(*p.df, i) + slice_l2(*p.df, i + 1)) * g.dt;
        }
        row.ratio = row.data > 0 ? row.response / row.data : 0.0;
        table.rows.push_back(row);
    }
    return table;
}

// ---------------------------------------------------------------- cutoffs

struct CutoffFunction {
    Section chi;        // rank 1 samples
    RasterMask plateau; // chi == 1
    RasterMask support; // chi != 0 possible
    double gap = 0;
    [[nodiscard]] double derivative_bound() const { return 1.875 / gap; }
};

// chi = 1 - s((phi - a) / (b - a)) for a 1-Lipschitz level function phi:
// plateau {phi <= a}, support {phi < b}. The gap b - a must span >= 3 cells.
inline CutoffFunction make_cutoff(const Grid& g, const std::function<double(double, double)>& phi, double a, double b)
{
    require(b > a, "cutoff: plateau must lie strictly inside the support", ErrorKind::invalid_argument);
    const double gap = b - a;
    require(gap >= 3 * std::max(g.dt, g.dx) * (1 - 1e-12), "cutoff: gap " + format_short(gap) +
                                                               " thinner than three cells",
            ErrorKind::invalid_argument);
    CutoffFunction c{Section(g, 1), RasterMask(g), RasterMask(g), gap};
    for (int i = 0; i < g.nt; ++i)
        for (int j = 0; j < g.nx; ++j) {
            const double p = phi(g.t(i), g.x(j));
            const double v = 1.0 - smoothstep5((p - a) / gap);
            c.chi.at(i, j) = v;
            if (p <= a) c.plateau.set(i, j);
            if (p < b) c.support.set(i, j);
        }
    return c;
}

// Time cutoff: chi = 1 for t >= t_plateau, 0 for t <= t_plateau - gap.
inline CutoffFunction make_time_cutoff(const Grid& g, double t_plateau, double gap)
{
    return make_cutoff(g, [t_plateau](double t, double) { return t_plateau - t; }, 0.0, gap);
}

namespace detail {

// Euclidean distance from p to a convex piece (0 inside).
inline double distance_to_piece(const ConvexPiece& c, Vec2 p)
{
    if (c.contains(p)) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (Vec2 v : c.vertices()) best = std::min(best, norm(p - v));
    for (const HalfPlane& h0 : c.halfplanes()) {
        const HalfPlane h = h0.normalized();
        const double e = h.excess(p);
        const Vec2 q{p.t - e * h.a, p.x - e * h.b};
        if (c.contains(q, 1e-9)) best = std::min(best, std::abs(e));
    }
    return best;
}

} // namespace detail

// Cutoff with plateau the PL set and support its open gap-neighbourhood.
inline CutoffFunction make_set_cutoff(const Grid& g, const PLSet& plateau, double gap)
{
    return make_cutoff(
        g,
        [&plateau](double t, double x) {
            double d = std::numeric_limits<double>::infinity();
            for (const ConvexPiece& c : plateau.pieces()) d = std::min(d, detail::distance_to_piece(c, {t, x}));
            return d;
        },
        0.0, gap);
}

} // namespace greenhyp
