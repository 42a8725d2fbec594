#pragma once

// Green's operators: exact kernels of the flat 1+1 d'Alembertian, operators
// built from Cauchy solves, and the constructions that combine them
// (propagator, composition, square roots, P*P blocks, extension to
// past-compact sources), plus the structural checks built on top.
//
// An advanced operator G+ satisfies P G+ f = f, G+ P f = f and
// supp G+ f in J+(supp f); retarded operators mirror this with J-.

#include "core.hpp"
#include "grid.hpp"
#include "operators.hpp"
#include "solver.hpp"
#include "spacetime.hpp"
#include "support_sets.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace greenhyp {

enum class Side { advanced, retarded, causal };

inline const char* side_name(Side s)
{
    switch (s) {
    case Side::advanced: return "adv";
    case Side::retarded: return "ret";
    case Side::causal: return "causal";
    }
    return "?";
}

inline Side parse_side(const std::string& s)
{
    if (s == "adv" || s == "advanced") return Side::advanced;
    if (s == "ret" || s == "retarded") return Side::retarded;
    throw Error(ErrorKind::parse, "unknown side '" + s + "' (expected adv or ret)");
}

inline Side opposite(Side s)
{
    require(s != Side::causal, "the propagator has no opposite side", ErrorKind::invalid_argument);
    return s == Side::advanced ? Side::retarded : Side::advanced;
}

enum class GreenStrategy { exact_kernel, cauchy_solve, composed, sqrt, direct_sum, dual_transport };

inline const char* strategy_name(GreenStrategy s)
{
    switch (s) {
    case GreenStrategy::exact_kernel: return "kernel";
    case GreenStrategy::cauchy_solve: return "cauchy";
    case GreenStrategy::composed: return "compose";
    case GreenStrategy::sqrt: return "sqrt";
    case GreenStrategy::direct_sum: return "direct_sum";
    case GreenStrategy::dual_transport: return "dual";
    }
    return "?";
}

// One verification result; pass is recomputable from value, cmp and threshold.
struct CheckRow {
    std::string name;
    double value = 0;
    double threshold = 0;
    bool at_least = false; // value >= threshold instead of <=
    bool pass = false;

    static CheckRow upper(std::string name, double value, double threshold)
    {
        return {std::move(name), value, threshold, false, value <= threshold};
    }
    static CheckRow lower(std::string name, double value, double threshold)
    {
        return {std::move(name), value, threshold, true, value >= threshold};
    }
    [[nodiscard]] const char* cmp() const { return at_least ? ">=" : "<="; }
};

inline bool all_pass(const std::vector<CheckRow>& rows)
{
    return std::all_of(rows.begin(), rows.end(), [](const CheckRow& r) { return r.pass; });
}

// Immutable handle: applications are pure functions of the source.
struct GreenOperator {
    using Apply = std::function<Section(const Section& f, const RasterMask* eval)>;
    using Op = std::function<Section(const Section& u)>;
    using Cone = std::function<RasterMask(const RasterMask& nodes)>;

    std::string name; // label of the differential operator
    Side side;
    GreenStrategy strategy;
    ProductSpacetime spacetime;
    int rank_in;  // rank of the source f
    int rank_out; // rank of G f
    // With eval set, only the nodes of eval are required to be correct.
    Apply impl;
    Op op; // P: rank_out sections to rank_in sections
    // Rasterized causal shadow of a source support; contains supp G f.
    Cone shadow;
    // Source nodes that G f on the given nodes depends on.
    Cone dependence;
    std::vector<GreenOperator> parts;
    // Green's operator of the formal dual for the requested side.
    std::function<GreenOperator(Side)> dual;

    GreenOperator(std::string n, Side s, GreenStrategy strat, ProductSpacetime st, int rin, int rout)
        : name(std::move(n)), side(s), strategy(strat), spacetime(std::move(st)), rank_in(rin), rank_out(rout)
    {
    }

    [[nodiscard]] Section operator()(const Section& f) const
    {
        check_source(f);
        return impl(f, nullptr);
    }

    [[nodiscard]] Section apply_on(const Section& f, const RasterMask& eval) const
    {
        check_source(f);
        require(eval.grid.same_as(f.grid), "evaluation mask grid differs from the source grid",
                ErrorKind::invalid_argument);
        return impl(f, &eval);
    }

    [[nodiscard]] Section apply_op(const Section& u) const
    {
        require(u.rank == rank_out, "operator input rank mismatch", ErrorKind::invalid_argument);
        return op(u);
    }

    [[nodiscard]] RasterMask support_bound(const RasterMask& supp) const { return shadow(supp); }

    [[nodiscard]] std::string label() const
    {
        return name + "/" + side_name(side) + "/" + strategy_name(strategy);
    }

private:
    void check_source(const Section& f) const
    {
        require(f.rank == rank_in, "source rank " + std::to_string(f.rank) + " differs from " + std::to_string(rank_in),
                ErrorKind::invalid_argument);
        require(f.grid.topology == spacetime.topology(), "source grid topology differs from the spacetime",
                ErrorKind::invalid_argument);
    }
};

// ---------------------------------------------------------------- helpers

namespace detail {

inline Section restrict_section(const Section& u, const Grid& sub)
{
    Section out(sub, u.rank);
    const int di = sub.it0 - u.grid.it0, dj = sub.ix0 - u.grid.ix0;
    for (int i = 0; i < sub.nt; ++i)
        for (int j = 0; j < sub.nx; ++j)
            for (int k = 0; k < u.rank; ++k) out.at(i, j, k) = u.at(i + di, j + dj, k);
    return out;
}

// Copy the nodes of `only` from the sub-grid section into the parent section.
inline void place_section(Section& parent, const Section& sub, const RasterMask& only)
{
    const int di = sub.grid.it0 - parent.grid.it0, dj = sub.grid.ix0 - parent.grid.ix0;
    for (int i = 0; i < sub.grid.nt; ++i)
        for (int j = 0; j < sub.grid.nx; ++j)
            if (only(i + di, j + dj))
                for (int k = 0; k < parent.rank; ++k) parent.at(i + di, j + dj, k) = sub.at(i, j, k);
}

inline Section masked(const Section& u, const RasterMask* only)
{
    if (!only) return u;
    Section out(u.grid, u.rank);
    for (int i = 0; i < u.grid.nt; ++i)
        for (int j = 0; j < u.grid.nx; ++j)
            if ((*only)(i, j))
                for (int k = 0; k < u.rank; ++k) out.at(i, j, k) = u.at(i, j, k);
    return out;
}

inline Section components(const Section& u, int from, int count)
{
    Section out(u.grid, count);
    for (std::size_t n = 0; n < u.grid.nodes(); ++n)
        for (int k = 0; k < count; ++k) out.values[n * count + k] = u.values[n * u.rank + from + k];
    return out;
}

inline void set_components(Section& u, int from, const Section& c)
{
    require(c.grid.same_as(u.grid) && from + c.rank <= u.rank, "component block mismatch");
    for (std::size_t n = 0; n < u.grid.nodes(); ++n)
        for (int k = 0; k < c.rank; ++k) u.values[n * u.rank + from + k] = c.values[n * c.rank + k];
}

// Nodes within `cells` steps (in both directions) of the mask.
inline RasterMask dilate(const RasterMask& m, int cells)
{
    const Grid& g = m.grid;
    RasterMask out(g);
    const bool circle = g.topology == Topology::circle;
    for (int i = 0; i < g.nt; ++i)
        for (int j = 0; j < g.nx; ++j) {
            if (!m(i, j)) continue;
            for (int a = std::max(0, i - cells); a <= std::min(g.nt - 1, i + cells); ++a)
                for (int b = j - cells; b <= j + cells; ++b) {
                    if (!circle && (b < 0 || b >= g.nx)) continue;
                    out.set(a, circle ? g.wrap(b) : b);
                }
        }
    return out;
}

inline std::pair<int, int> nonzero_rows(const Section& f)
{
    int first = -1, last = -1;
    for (int i = 0; i < f.grid.nt; ++i) {
        const double* r = f.row(i);
        const bool any = std::any_of(r, r + static_cast<std::ptrdiff_t>(f.grid.nx) * f.rank,
                                     [](double v) { return v != 0.0; });
        if (any) {
            if (first < 0) first = i;
            last = i;
        }
    }
    return {first, last};
}

// Squared distance transform along one axis with node spacing h (lower
// envelope of parabolas).
inline void edt_1d(const std::vector<double>& f, std::vector<double>& d, double h)
{
    const int n = static_cast<int>(f.size());
    d.assign(n, 0.0);
    if (n == 0) return;
    std::vector<int> v(n);
    std::vector<double> z(n + 1);
    const double inf = std::numeric_limits<double>::infinity();
    int k = 0;
    v[0] = 0;
    z[0] = -inf;
    z[1] = inf;
    auto cross = [&](int q, int p) {
        return ((f[q] + sqr(h * q)) - (f[p] + sqr(h * p))) / (2 * h * h * (q - p));
    };
    for (int q = 1; q < n; ++q) {
        double s = cross(q, v[k]);
        while (s <= z[k]) {
            --k;
            s = cross(q, v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = inf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        d[q] = sqr(h * (q - v[k])) + f[v[k]];
    }
}

// Euclidean distance in (t, x) from every node to the nearest marked node.
inline std::vector<double> distance_to_mask(const RasterMask& m)
{
    const Grid& g = m.grid;
    const double big = 1e30;
    std::vector<double> d2(g.nodes(), big);
    const bool circle = g.topology == Topology::circle;
    std::vector<double> f, out;
    for (int i = 0; i < g.nt; ++i) {
        const int reps = circle ? 3 : 1;
        f.assign(static_cast<std::size_t>(g.nx) * reps, big);
        for (int r = 0; r < reps; ++r)
            for (int j = 0; j < g.nx; ++j)
                if (m(i, j)) f[static_cast<std::size_t>(r) * g.nx + j] = 0.0;
        edt_1d(f, out, g.dx);
        const int off = circle ? g.nx : 0;
        for (int j = 0; j < g.nx; ++j) d2[g.index(i, j)] = out[off + j];
    }
    for (int j = 0; j < g.nx; ++j) {
        f.resize(g.nt);
        for (int i = 0; i < g.nt; ++i) f[i] = d2[g.index(i, j)];
        edt_1d(f, out, g.dt);
        for (int i = 0; i < g.nt; ++i) d2[g.index(i, j)] = out[i];
    }
    for (double& v : d2) v = v >= big ? std::numeric_limits<double>::infinity() : std::sqrt(v);
    return d2;
}

// Cone sets used by the strategies: the physical cone with one cell of
// dilation (exact kernels) or the grid cone of the scheme (Cauchy solves).
inline RasterMask cone_of(const ProductSpacetime& st, const RasterMask& seed, Direction dir, double speed_floor,
                          int dilation = 1)
{
    if (!seed.any()) return RasterMask(seed.grid);
    ConeOptions co;
    co.dilation_cells = dilation;
    co.speed_floor = speed_floor;
    return raster_j(st, seed, dir, co).mask;
}

inline Direction shadow_direction(Side s) { return s == Side::advanced ? Direction::future : Direction::past; }
inline Direction dependence_direction(Side s) { return s == Side::advanced ? Direction::past : Direction::future; }

inline FirstOrderSystem<double> negated(const FirstOrderSystem<double>& sys, bool flip_metric)
{
    FirstOrderSystem<double> n = sys;
    if (sys.is_constant()) {
        n.a0 = MatrixField<double>::constant(-sys.a0.constant_value());
        n.a1 = MatrixField<double>::constant(-sys.a1.constant_value());
        n.b = MatrixField<double>::constant(-sys.b.constant_value());
    } else {
        const int r = sys.rank_out(), c = sys.rank_in();
        n.a0 = MatrixField<double>::function(r, c, [s = sys](double t, double x) { return MatR(-s.a0(t, x)); });
        n.a1 = MatrixField<double>::function(r, c, [s = sys](double t, double x) { return MatR(-s.a1(t, x)); });
        n.b = MatrixField<double>::function(r, c, [s = sys](double t, double x) { return MatR(-s.b(t, x)); });
    }
    if (flip_metric) n.fiber_metric = -sys.fiber_metric;
    n.name = "-" + sys.name;
    return n;
}

} // namespace detail

// ---------------------------------------------------------------- exact kernels

namespace detail {

// Prefix integrals of x^m times the piecewise-linear interpolant of one row,
// m = 0..moments-1. Outside the window the interpolant is zero.
class RowIntegrals {
public:
    RowIntegrals(const Grid& g, const double* q, int stride, int moments) : g_(g), moments_(moments)
    {
        q_.resize(g.nx);
        for (int j = 0; j < g.nx; ++j) q_[j] = q[static_cast<std::size_t>(j) * stride];
        prefix_.assign(static_cast<std::size_t>(moments) * g.nx, 0.0);
        for (int m = 0; m < moments; ++m)
            for (int j = 1; j < g.nx; ++j) prefix_[m * g.nx + j] = prefix_[m * g.nx + j - 1] + partial(m, j - 1, 1.0);
    }

    [[nodiscard]] double integral(double a, double b, int m) const
    {
        if (b <= a) return 0.0;
        return cumulative(b, m) - cumulative(a, m);
    }

private:
    // integral over [x_j, x_j + s dx] of x^m (q_j + (q_{j+1} - q_j) s')
    [[nodiscard]] double partial(int m, int j, double s) const
    {
        const double h = g_.dx, c = g_.x(j), a = q_[j], d = q_[j + 1] - q_[j];
        const double s2 = s * s, s3 = s2 * s;
        switch (m) {
        case 0: return h * (a * s + d * s2 / 2);
        case 1: return h * (c * a * s + (c * d + h * a) * s2 / 2 + h * d * s3 / 3);
        default:
            return h * (c * c * a * s + (c * c * d + 2 * c * h * a) * s2 / 2 + (2 * c * h * d + h * h * a) * s3 / 3 +
                        h * h * d * s3 * s / 4);
        }
    }

    [[nodiscard]] double cumulative(double x, int m) const
    {
        const int nx = g_.nx;
        if (x <= g_.x(0)) return 0.0;
        if (x >= g_.x_last()) return prefix_[m * nx + nx - 1];
        int j = static_cast<int>(std::floor((x - g_.x(0)) / g_.dx));
        j = std::clamp(j, 0, nx - 2);
        const double s = (x - g_.x(j)) / g_.dx;
        return prefix_[m * nx + j] + partial(m, j, s);
    }

    Grid g_;
    int moments_;
    std::vector<double> q_;
    std::vector<double> prefix_;
};

inline void require_kernel_source(const Section& f, Side side)
{
    const Grid& g = f.grid;
    require(f.rank == 1, "exact kernels act on scalar sources", ErrorKind::invalid_argument);
    require(g.topology == Topology::line, "exact kernels need the flat line window", ErrorKind::invalid_argument);
    require(side != Side::causal, "exact kernels need a definite side", ErrorKind::invalid_argument);
    const int edge_row = side == Side::advanced ? 0 : g.nt - 1;
    for (int j = 0; j < g.nx; ++j)
        require(f.at(edge_row, j) == 0.0, "source support touches the window edge (first row)",
                ErrorKind::precondition);
    for (int i = 0; i < g.nt; ++i)
        require(f.at(i, 0) == 0.0 && f.at(i, g.nx - 1) == 0.0, "source support touches the window edge (side)",
                ErrorKind::precondition);
}

// order 1: -1/2 times the integral over the cone; order 2: the Box^2 kernel
// ((t-s)^2 - (x-y)^2)/8 over the cone. Each slice is integrated exactly on
// the piecewise-linear interpolant, clipped at the cone; slices are combined
// with the trapezoid rule.
inline Section box_kernel(const Section& f, Side side, int order, const RasterMask* eval)
{
    require_kernel_source(f, side);
    const Grid& g = f.grid;
    const int moments = order == 1 ? 1 : 3;
    std::vector<std::optional<RowIntegrals>> rows(g.nt);
    std::vector<double> lo(g.nt), hi(g.nt);
    for (int k = 0; k < g.nt; ++k) {
        int a = -1, b = -1;
        for (int j = 0; j < g.nx; ++j)
            if (f.at(k, j) != 0.0) {
                if (a < 0) a = j;
                b = j;
            }
        if (a < 0) continue;
        rows[k].emplace(g, f.row(k), 1, moments);
        lo[k] = g.x(std::max(0, a - 1));
        hi[k] = g.x(std::min(g.nx - 1, b + 1));
    }
    const bool adv = side == Side::advanced;
    Section out(g, 1);
    for (int i = 0; i < g.nt; ++i) {
        const int kb = adv ? 0 : i, ke = adv ? i : g.nt - 1;
        if (kb == ke) continue;
        for (int j = 0; j < g.nx; ++j) {
            if (eval && !(*eval)(i, j)) continue;
            const double x = g.x(j);
            double s = 0;
            for (int k = kb; k <= ke; ++k) {
                if (!rows[k]) continue;
                const double delta = std::abs(g.t(i) - g.t(k));
                const double a = x - delta, b = x + delta;
                if (b <= lo[k] || a >= hi[k]) continue;
                const double w = (k == kb || k == ke) ? 0.5 : 1.0;
                double v;
                if (order == 1) {
                    v = rows[k]->integral(a, b, 0);
                } else {
                    const double i0 = rows[k]->integral(a, b, 0), i1 = rows[k]->integral(a, b, 1),
                                 i2 = rows[k]->integral(a, b, 2);
                    v = ((delta * delta - x * x) * i0 + 2 * x * i1 - i2) / 8.0;
                }
                s += w * v;
            }
            out.at(i, j) = (order == 1 ? -0.5 : 1.0) * s * g.dt;
        }
    }
    return out;
}

inline void require_flat_line(const ProductSpacetime& st)
{
    require(st.is_flat() && st.topology() == Topology::line, "exact kernels need the flat Minkowski line preset",
            ErrorKind::precondition);
}

} // namespace detail

// (G f)(t,x) = -1/2 times the integral of f over J-(t,x) (advanced) or J+(t,x).
inline Section green_box_exact(const Section& f, Side side, const RasterMask* eval = nullptr)
{
    return detail::box_kernel(f, side, 1, eval);
}

// Green's operator of Box^2 with kernel ((t-s)^2 - (x-y)^2)/8 on the cone.
inline Section green_box2_exact(const Section& f, Side side, const RasterMask* eval = nullptr)
{
    return detail::box_kernel(f, side, 2, eval);
}

inline GreenOperator box_green(const ProductSpacetime& st, Side side)
{
    detail::require_flat_line(st);
    GreenOperator g("box", side, GreenStrategy::exact_kernel, st, 1, 1);
    g.impl = [side](const Section& f, const RasterMask* eval) { return green_box_exact(f, side, eval); };
    const WaveOperator w = WaveOperator::flat(st);
    g.op = [w](const Section& u) { return apply_wave(w, u); };
    g.shadow = [st, side](const RasterMask& m) { return detail::cone_of(st, m, detail::shadow_direction(side), 0.0); };
    g.dependence = [st, side](const RasterMask& m) {
        return detail::cone_of(st, m, detail::dependence_direction(side), 0.0);
    };
    g.dual = [st](Side s) { return box_green(st, s); };
    return g;
}

inline GreenOperator box2_green(const ProductSpacetime& st, Side side)
{
    detail::require_flat_line(st);
    GreenOperator g("box2", side, GreenStrategy::exact_kernel, st, 1, 1);
    g.impl = [side](const Section& f, const RasterMask* eval) { return green_box2_exact(f, side, eval); };
    const WaveOperator w = WaveOperator::flat(st);
    g.op = [w](const Section& u) { return apply_wave(w, apply_wave(w, u)); };
    g.shadow = [st, side](const RasterMask& m) { return detail::cone_of(st, m, detail::shadow_direction(side), 0.0); };
    g.dependence = [st, side](const RasterMask& m) {
        return detail::cone_of(st, m, detail::dependence_direction(side), 0.0);
    };
    g.dual = [st](Side s) { return box2_green(st, s); };
    return g;
}

// Trivial Green's operator of the identity.
inline GreenOperator identity_green(const ProductSpacetime& st, int rank, Side side)
{
    GreenOperator g("identity", side, GreenStrategy::exact_kernel, st, rank, rank);
    g.impl = [](const Section& f, const RasterMask* eval) { return detail::masked(f, eval); };
    g.op = [](const Section& u) { return u; };
    g.shadow = [](const RasterMask& m) { return m; };
    g.dependence = [](const RasterMask& m) { return m; };
    g.dual = [st, rank](Side s) { return identity_green(st, rank, s); };
    return g;
}

// ---------------------------------------------------------------- Cauchy solves

struct GreenSolveOptions {
    SolveOptions solve;
    int t0_row = -1; // Cauchy slice; -1 picks the row just outside supp f
};

// G+ f solves P u = f with u = 0 on a slice below supp f (above it for G-).
// When P is symmetric hyperbolic only up to sign (A0 negative, as for formal
// duals), -P is solved with -f.
inline GreenOperator green_from_cauchy(const FirstOrderSystem<double>& sys, const ProductSpacetime& st, Side side,
                                       GreenSolveOptions opt = {})
{
    require(side != Side::causal, "green_from_cauchy needs a definite side", ErrorKind::invalid_argument);
    const int n = sys.rank();
    const Grid probe = Grid::window(st.t_min(), st.t_max(), 17, st.x_min(),
                                    st.topology() == Topology::circle ? st.x_max() - st.circumference() / 17 : st.x_max(),
                                    17);
    FirstOrderSystem<double> s = sys;
    double sign = 1.0;
    auto rep = validate_symmetric_hyperbolic(sys, st, probe, 1);
    if (!rep.valid) {
        for (bool flip : {false, true}) {
            auto cand = detail::negated(sys, flip);
            if (validate_symmetric_hyperbolic(cand, st, probe, 1).valid) {
                s = cand;
                sign = -1.0;
                break;
            }
        }
        require(sign < 0, "validation failure: " + rep.message, ErrorKind::precondition);
    }
    const bool adv = side == Side::advanced;
    const double speed_scale = opt.solve.scheme == Scheme::rk2 ? 4.0 : 1.0;
    const int radius = opt.solve.scheme == Scheme::rk2 ? 4 : 1;

    GreenOperator g(sys.name, side, GreenStrategy::cauchy_solve, st, n, n);
    auto cone = [st, speed_scale](const RasterMask& m, Direction dir) {
        return detail::cone_of(st, m, dir, speed_scale * m.grid.dx / m.grid.dt);
    };
    g.shadow = [cone, side](const RasterMask& m) { return cone(m, detail::shadow_direction(side)); };
    g.dependence = [cone, side](const RasterMask& m) { return cone(m, detail::dependence_direction(side)); };
    const GreenOperator::Cone dependence = g.dependence;
    const GreenOperator::Cone shadow = g.shadow;

    g.impl = [s, st, sign, adv, opt, dependence, shadow, radius](const Section& f, const RasterMask* eval) {
        const Grid& grid = f.grid;
        const int nr = f.rank;
        Section out(grid, nr);
        const auto [r0, r1] = detail::nonzero_rows(f);
        if (r0 < 0) return out;
        int t0 = adv ? r0 - 1 : r1 + 1;
        require(t0 >= 0 && t0 < grid.nt, "no admissible t0 inside the grid: the source reaches the initial row",
                ErrorKind::precondition);
        if (opt.t0_row >= 0) {
            require(adv ? opt.t0_row <= t0 : opt.t0_row >= t0,
                    "t0 row " + std::to_string(opt.t0_row) + " is not outside the source support",
                    ErrorKind::invalid_argument);
            t0 = opt.t0_row;
        }
        SolveOptions so = opt.solve;
        so.direction = adv ? TimeDirection::forward : TimeDirection::backward;
        const Section fs = sign > 0 ? f : (-1.0) * f;
        if (!eval) return solve_cauchy(s, st, &fs, CauchyData::zeros(grid, t0, nr), grid, so);

        // march only over the numerical domain of dependence of eval
        int e0 = grid.nt, e1 = -1;
        for (int i = 0; i < grid.nt; ++i)
            for (int j = 0; j < grid.nx; ++j)
                if ((*eval)(i, j)) {
                    e0 = std::min(e0, i);
                    e1 = std::max(e1, i);
                }
        if (e1 < 0 || (adv && e1 <= t0) || (!adv && e0 >= t0)) return out;
        const int row_lo = adv ? t0 : e0, row_hi = adv ? e1 : t0;
        // nodes outside the shadow of supp f stay exactly zero, so the
        // sub-grid only has to cover the part of the dependence set inside it
        const RasterMask dep = dependence(*eval).intersect(shadow(f.nonzero()));
        int jlo = grid.nx, jhi = -1;
        for (int i = row_lo; i <= row_hi; ++i)
            for (int j = 0; j < grid.nx; ++j)
                if (dep(i, j)) {
                    jlo = std::min(jlo, j);
                    jhi = std::max(jhi, j);
                }
        if (jhi < 0) return out;
        Grid sub;
        if (grid.topology == Topology::line) {
            const int margin = radius + 1;
            jlo -= margin;
            jhi += margin;
            require(jlo >= 0 && jhi < grid.nx,
                    "cone escape: the domain of dependence of the evaluation region leaves the window",
                    ErrorKind::precondition);
            sub = grid.sub(row_lo, row_hi - row_lo + 1, jlo, jhi - jlo + 1);
        } else {
            sub = grid.sub(row_lo, row_hi - row_lo + 1, 0, grid.nx);
        }
        const Section fsub = detail::restrict_section(fs, sub);
        so.check_cone = false;
        const Section usub =
            solve_cauchy(s, st, &fsub, CauchyData::zeros(sub, adv ? 0 : sub.nt - 1, nr), sub, so);
        detail::place_section(out, usub, *eval);
        return out;
    };
    g.op = [sys](const Section& u) { return apply(sys, u); };
    g.dual = [sys, st, opt](Side sd) {
        GreenOperator d = green_from_cauchy(formal_dual(sys, st), st, sd, opt);
        d.strategy = GreenStrategy::dual_transport;
        return d;
    };
    return g;
}

// Scalar wave operator through its first-order reduction.
inline GreenOperator wave_green(const WaveOperator& w, Side side, GreenSolveOptions opt = {})
{
    const WaveReduction red = wave_to_first_order(w);
    const GreenOperator inner = green_from_cauchy(red.system, w.spacetime, side, opt);
    const bool flat_box = w.spacetime.is_flat() && w.b0.is_constant() && w.b0.constant_value() == 0.0 &&
                          w.b1.is_constant() && w.b1.constant_value() == 0.0 && w.potential.is_constant() &&
                          w.potential.constant_value() == 0.0;
    GreenOperator g(flat_box ? "box" : "wave", side, GreenStrategy::cauchy_solve, w.spacetime, 1, 1);
    g.impl = [inner, red](const Section& f, const RasterMask* eval) {
        const Section F = red.source(f);
        return red.extract(eval ? inner.apply_on(F, *eval) : inner(F));
    };
    g.op = [w](const Section& u) { return apply_wave(w, u); };
    g.shadow = inner.shadow;
    g.dependence = inner.dependence;
    g.parts = {inner};
    const bool self_dual = w.b0.is_constant() && w.b0.constant_value() == 0.0 && w.b1.is_constant() &&
                           w.b1.constant_value() == 0.0;
    g.dual = [w, opt, self_dual](Side sd) {
        require(self_dual, "dual of a wave operator with first-order terms is not implemented",
                ErrorKind::invalid_argument);
        GreenOperator d = wave_green(w, sd, opt);
        d.strategy = GreenStrategy::dual_transport;
        return d;
    };
    return g;
}

inline GreenOperator dual_green(const GreenOperator& g, Side side)
{
    require(static_cast<bool>(g.dual), g.label() + " has no dual construction", ErrorKind::invalid_argument);
    GreenOperator d = g.dual(side);
    d.strategy = GreenStrategy::dual_transport;
    d.parts = {g};
    return d;
}

// ---------------------------------------------------------------- sums, propagator

inline GreenOperator direct_sum_green(const std::vector<GreenOperator>& ops)
{
    require(!ops.empty(), "direct sum of no operators", ErrorKind::invalid_argument);
    const Side side = ops.front().side;
    std::string name = "sum(";
    int rin = 0, rout = 0;
    for (const auto& o : ops) {
        require(o.side == side, "direct sum mixes sides", ErrorKind::invalid_argument);
        name += (rin ? "," : "") + o.name;
        rin += o.rank_in;
        rout += o.rank_out;
    }
    name += ")";
    GreenOperator g(name, side, GreenStrategy::direct_sum, ops.front().spacetime, rin, rout);
    g.impl = [ops, rout](const Section& f, const RasterMask* eval) {
        Section out(f.grid, rout);
        int ci = 0, co = 0;
        for (const auto& o : ops) {
            const Section part = detail::components(f, ci, o.rank_in);
            detail::set_components(out, co, eval ? o.apply_on(part, *eval) : o(part));
            ci += o.rank_in;
            co += o.rank_out;
        }
        return out;
    };
    g.op = [ops, rin](const Section& u) {
        Section out(u.grid, rin);
        int ci = 0, co = 0;
        for (const auto& o : ops) {
            detail::set_components(out, ci, o.apply_op(detail::components(u, co, o.rank_out)));
            ci += o.rank_in;
            co += o.rank_out;
        }
        return out;
    };
    g.shadow = [ops](const RasterMask& m) {
        RasterMask r(m.grid);
        for (const auto& o : ops) r = r.unite(o.shadow(m));
        return r;
    };
    g.dependence = [ops](const RasterMask& m) {
        RasterMask r(m.grid);
        for (const auto& o : ops) r = r.unite(o.dependence(m));
        return r;
    };
    g.parts = ops;
    return g;
}

// G = G+ - G-.
inline GreenOperator causal_propagator(const GreenOperator& gp, const GreenOperator& gm)
{
    require(gp.side == Side::advanced && gm.side == Side::retarded,
            "causal_propagator needs an advanced and a retarded operator", ErrorKind::invalid_argument);
    require(gp.name == gm.name && gp.rank_in == gm.rank_in && gp.rank_out == gm.rank_out,
            "operator mismatch: " + gp.label() + " vs " + gm.label(), ErrorKind::invalid_argument);
    GreenOperator g(gp.name, Side::causal, gp.strategy, gp.spacetime, gp.rank_in, gp.rank_out);
    g.impl = [gp, gm](const Section& f, const RasterMask* eval) {
        return eval ? gp.apply_on(f, *eval) - gm.apply_on(f, *eval) : gp(f) - gm(f);
    };
    g.op = gp.op;
    g.shadow = [gp, gm](const RasterMask& m) { return gp.shadow(m).unite(gm.shadow(m)); };
    g.dependence = [gp, gm](const RasterMask& m) { return gp.dependence(m).unite(gm.dependence(m)); };
    g.parts = {gp, gm};
    return g;
}

// ---------------------------------------------------------------- tagged sources

enum class SupportTag { compact, past_compact, future_compact, strictly_past_compact, strictly_future_compact };

inline const char* tag_name(SupportTag t)
{
    switch (t) {
    case SupportTag::compact: return "compact";
    case SupportTag::past_compact: return "pc";
    case SupportTag::future_compact: return "fc";
    case SupportTag::strictly_past_compact: return "spc";
    case SupportTag::strictly_future_compact: return "sfc";
    }
    return "?";
}

inline bool tag_flag(const SupportClass& c, SupportTag t)
{
    switch (t) {
    case SupportTag::compact: return c.compact;
    case SupportTag::past_compact: return c.pc;
    case SupportTag::future_compact: return c.fc;
    case SupportTag::strictly_past_compact: return c.spc;
    case SupportTag::strictly_future_compact: return c.sfc;
    }
    return false;
}

// On a finite window every support is compact, so the tag records the
// intended class of the idealized support; a witness set, when given, must
// carry that class and cover the support mask.
struct SupportTaggedSource {
    Section f;
    SupportTag tag = SupportTag::compact;
    std::optional<PLSet> witness;
};

inline SupportTaggedSource make_tagged(Section f, SupportTag tag, std::optional<PLSet> witness = std::nullopt)
{
    const Grid& g = f.grid;
    if (witness) {
        require(tag_flag(classify(*witness), tag),
                std::string("witness set is not classified ") + tag_name(tag), ErrorKind::invalid_argument);
        const RasterMask cover = detail::dilate(RasterMask::from_set(g, *witness), 1);
        require(f.nonzero().subset_of(cover), "source support leaves its witness set", ErrorKind::invalid_argument);
    } else if (tag == SupportTag::compact && g.topology == Topology::line) {
        const RasterMask nz = f.nonzero();
        for (int i = 0; i < g.nt; ++i)
            require(!nz(i, 0) && !nz(i, g.nx - 1), "compact tag but the support touches the window side",
                    ErrorKind::invalid_argument);
    }
    return {std::move(f), tag, std::move(witness)};
}

// ---------------------------------------------------------------- extension

struct ExtendOptions {
    int region_cells = 16; // smallest region
    double gap = 0.0; // cutoff ramp width; 0 picks four cells
    double pad = 0.0; // plateau reaches this far beyond the dependence set; 0 picks one cell
    bool force_regionwise = false;
};

// (G f)(x) := (G (chi f))(x) with chi = 1 near the part of supp f that the
// region depends on. Evaluated per region with its own cutoff, starting from
// one region (fixed tiles with force_regionwise).
inline Section extend_pc_apply(const GreenOperator& G, const SupportTaggedSource& src, const RasterMask& eval,
                               const ExtendOptions& opt = {})
{
    require(G.side != Side::causal, "extension needs an advanced or retarded operator", ErrorKind::invalid_argument);
    const bool adv = G.side == Side::advanced;
    const SupportTag t = src.tag;
    const bool ok = t == SupportTag::compact ||
                    (adv ? (t == SupportTag::past_compact || t == SupportTag::strictly_past_compact)
                         : (t == SupportTag::future_compact || t == SupportTag::strictly_future_compact));
    require(ok, std::string("source tagged ") + tag_name(t) + " cannot be extended on the " + side_name(G.side) +
                    " side",
            ErrorKind::invalid_argument);
    const Section& f = src.f;
    const Grid& g = f.grid;
    require(eval.grid.same_as(g), "evaluation mask grid differs from the source grid", ErrorKind::invalid_argument);
    if (t == SupportTag::compact && !opt.force_regionwise) return detail::masked(G(f), &eval);

    const double cell = std::max(g.dt, g.dx);
    const double gap = opt.gap > 0 ? opt.gap : 4 * cell;
    const double pad = opt.pad > 0 ? opt.pad : cell;
    const RasterMask nz = f.nonzero();
    const int rc = std::max(1, opt.region_cells);
    const int edge_row = adv ? 0 : g.nt - 1;
    Section out(g, G.rank_out);
    // Regions are rows [i0, i1) x columns [j0, j1). A region whose cut-off
    // source is not admissible is split until it is region_cells wide.
    std::function<void(int, int, int, int)> visit = [&](int i0, int i1, int j0, int j1) {
        RasterMask region(g);
        bool any = false;
        for (int i = i0; i < i1; ++i)
            for (int j = j0; j < j1; ++j)
                if (eval(i, j)) {
                    region.set(i, j);
                    any = true;
                }
        if (!any) return;
        const RasterMask s = G.dependence(region).intersect(nz);
        if (!s.any()) return;
        const std::vector<double> dist = detail::distance_to_mask(s);
        auto phi = [&](double tt, double xx) {
            const int i = static_cast<int>(std::lround((tt - g.t(0)) / g.dt));
            const int j = static_cast<int>(std::lround((xx - g.x(0)) / g.dx));
            return dist[g.index(i, j)];
        };
        const CutoffFunction chi = make_cutoff(g, phi, pad, pad + gap);
        Section fc(g, f.rank);
        for (int i = 0; i < g.nt; ++i)
            for (int j = 0; j < g.nx; ++j) {
                const double c = chi.chi.at(i, j);
                if (c == 0.0) continue;
                for (int k = 0; k < f.rank; ++k) fc.at(i, j, k) = c * f.at(i, j, k);
            }
        const RasterMask cut = fc.nonzero();
        std::string why;
        for (int j = 0; j < g.nx && why.empty(); ++j)
            if (cut(edge_row, j)) why = "the cut-off source reaches the initial row";
        if (g.topology == Topology::line)
            for (int i = 0; i < g.nt && why.empty(); ++i)
                if (cut(i, 0) || cut(i, g.nx - 1)) why = "the cut-off source reaches the window side";
        if (why.empty()) {
            try {
                detail::place_section(out, G.apply_on(fc, region), region);
                return;
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::precondition) throw;
                why = e.what();
            }
        }
        const bool split_rows = i1 - i0 > rc, split_cols = j1 - j0 > rc;
        if (!split_rows && !split_cols) throw Error(ErrorKind::precondition, "cutoff gap infeasible: " + why);
        const int im = split_rows ? (i0 + i1) / 2 : i1, jm = split_cols ? (j0 + j1) / 2 : j1;
        visit(i0, im, j0, jm);
        if (split_cols) visit(i0, im, jm, j1);
        if (split_rows) visit(im, i1, j0, jm);
        if (split_rows && split_cols) visit(im, i1, jm, j1);
    };
    if (opt.force_regionwise) {
        for (int bi = 0; bi < g.nt; bi += rc)
            for (int bj = 0; bj < g.nx; bj += rc) visit(bi, std::min(g.nt, bi + rc), bj, std::min(g.nx, bj + rc));
    } else {
        visit(0, g.nt, 0, g.nx);
    }
    return out;
}

// Green's operator of P2 o P1 as G1 o extended G2, where G1 inverts P1 and
// G2 inverts P2.
inline GreenOperator compose_green(const GreenOperator& g1, const GreenOperator& g2, ExtendOptions ext = {})
{
    require(g1.side == g2.side && g1.side != Side::causal, "composition needs two operators of the same side",
            ErrorKind::invalid_argument);
    require(g2.rank_out == g1.rank_in, "chain mismatch: " + g2.label() + " does not feed " + g1.label(),
            ErrorKind::invalid_argument);
    GreenOperator g(g2.name + "*" + g1.name, g1.side, GreenStrategy::composed, g1.spacetime, g2.rank_in, g1.rank_out);
    if (g1.name == g2.name) g.name = g1.name + "^2";
    const SupportTag tag =
        g1.side == Side::advanced ? SupportTag::strictly_past_compact : SupportTag::strictly_future_compact;
    g.impl = [g1, g2, ext, tag](const Section& f, const RasterMask* eval) {
        const Section inner = eval ? g2.apply_on(f, g1.dependence(*eval)) : g2(f);
        const RasterMask all(f.grid, true);
        return extend_pc_apply(g1, {inner, tag, std::nullopt}, eval ? *eval : all, ext);
    };
    g.op = [g1, g2](const Section& u) { return g2.apply_op(g1.apply_op(u)); };
    g.shadow = [g1, g2](const RasterMask& m) { return g1.shadow(g2.shadow(m)); };
    g.dependence = [g1, g2](const RasterMask& m) { return g2.dependence(g1.dependence(m)); };
    g.parts = {g1, g2};
    return g;
}

// ---------------------------------------------------------------- square roots

struct SquareCertificate {
    bool ok = false;
    std::string reason;
};

inline SquareCertificate certify(const DiracCertificate& c)
{
    return {c.ok, c.ok ? "gamma matrices satisfy the Clifford relations" : "Clifford relations fail"};
}

// G_D f := D (G_{D^2} f).
inline GreenOperator sqrt_green(const FirstOrderSystem<double>& d, const GreenOperator& g_sq,
                                const SquareCertificate& cert)
{
    require(cert.ok, "certificate failure: " + cert.reason, ErrorKind::precondition);
    require(d.rank() == g_sq.rank_in && g_sq.rank_in == g_sq.rank_out, "square root rank mismatch",
            ErrorKind::invalid_argument);
    GreenOperator g(d.name, g_sq.side, GreenStrategy::sqrt, g_sq.spacetime, d.rank(), d.rank());
    g.impl = [d, g_sq](const Section& f, const RasterMask* eval) {
        if (!eval) return apply(d, g_sq(f));
        const Section u = g_sq.apply_on(f, detail::dilate(*eval, 1));
        return detail::masked(apply(d, u), eval);
    };
    g.op = [d](const Section& u) { return apply(d, u); };
    g.shadow = [g_sq](const RasterMask& m) { return detail::dilate(g_sq.shadow(m), 1); };
    g.dependence = [g_sq](const RasterMask& m) { return g_sq.dependence(detail::dilate(m, 1)); };
    g.parts = {g_sq};
    return g;
}

inline GreenOperator sqrt_green(const DiracOperator& dir, const GreenOperator& g_sq)
{
    return sqrt_green(dir.d, g_sq, certify(dir.certificate));
}

struct PStarPGreen {
    GreenOperator block;     // Green's operator of [[0, P*], [P, 0]]
    GreenOperator for_p;     // E2 -> E1 block
    GreenOperator for_pstar; // E1 -> E2 block
};

inline PStarPGreen pstarp_green(const OperatorPair<double>& pair, const GreenOperator& g_pstarp,
                                const GreenOperator& g_ppstar)
{
    const int n1 = pair.op.rank_in(), n2 = pair.op.rank_out();
    require(g_pstarp.rank_in == n1 && g_pstarp.rank_out == n1 && g_ppstar.rank_in == n2 && g_ppstar.rank_out == n2,
            "block shape mismatch", ErrorKind::invalid_argument);
    require(g_pstarp.side == g_ppstar.side, "block Green's operators of different sides", ErrorKind::invalid_argument);
    const ProductSpacetime& st = g_pstarp.spacetime;
    const OperatorPair<double> adj = formal_adjoint(pair, st);
    const FirstOrderSystem<double> blk = block_operator(pair, adj);
    const GreenOperator big =
        sqrt_green(blk, direct_sum_green({g_pstarp, g_ppstar}),
                   {true, "block algebra: [[0, P*], [P, 0]] squared is diag(P*P, PP*)"});
    const Side side = big.side;

    GreenOperator for_p(pair.op.name, side, GreenStrategy::sqrt, st, n2, n1);
    for_p.impl = [big, n1, n2](const Section& f2, const RasterMask* eval) {
        Section F(f2.grid, n1 + n2);
        detail::set_components(F, n1, f2);
        return detail::components(eval ? big.apply_on(F, *eval) : big(F), 0, n1);
    };
    for_p.op = [p = pair.op](const Section& u) { return apply(p, u); };
    for_p.shadow = big.shadow;
    for_p.dependence = big.dependence;
    for_p.parts = {big};

    GreenOperator for_pstar(adj.op.name, side, GreenStrategy::sqrt, st, n1, n2);
    for_pstar.impl = [big, n1, n2](const Section& f1, const RasterMask* eval) {
        Section F(f1.grid, n1 + n2);
        detail::set_components(F, 0, f1);
        return detail::components(eval ? big.apply_on(F, *eval) : big(F), n1, n2);
    };
    for_pstar.op = [q = adj.op](const Section& u) { return apply(q, u); };
    for_pstar.shadow = big.shadow;
    for_pstar.dependence = big.dependence;
    for_pstar.parts = {big};
    return {big, for_p, for_pstar};
}

// ---------------------------------------------------------------- Proca

// One-forms A = A_t dt + A_x dx are rank-2 sections (A_t, A_x). With
// signature (-+) and delta the metric adjoint of d:
//   d phi = (phi_t, phi_x),  dA = A_x,t - A_t,x,
//   delta A = A_t,t - A_x,x, delta F = (F_x, F_t),
// so d delta + delta d = dt^2 - dx^2 on each component.
namespace detail {

inline Section proca_delta_d(const Section& a)
{
    const Section at = a.component(0), ax = a.component(1);
    const Section f = d_dt(ax) - d_dx(at);
    Section out(a.grid, 2);
    out.set_component(0, d_dx(f));
    out.set_component(1, d_dt(f));
    return out;
}

inline Section proca_d_delta(const Section& a)
{
    const Section at = a.component(0), ax = a.component(1);
    const Section s = d_dt(at) - d_dx(ax);
    Section out(a.grid, 2);
    out.set_component(0, d_dt(s));
    out.set_component(1, d_dx(s));
    return out;
}

} // namespace detail

// P A = delta d A + m^2 A.
inline Section proca_apply(double m, const Section& a)
{
    require(a.rank == 2, "Proca acts on one-forms (rank 2)", ErrorKind::invalid_argument);
    return detail::proca_delta_d(a) + (m * m) * a;
}

// G = (m^-2 d delta + id) G~ with G~ the Green's operator of
// d delta + delta d + m^2 = -(Box - m^2) on each component.
inline GreenOperator proca_green(const ProductSpacetime& st, double m, Side side, GreenSolveOptions opt = {})
{
    require(m > 0, "Proca mass must be positive", ErrorKind::invalid_argument);
    require(st.is_flat(), "Proca needs flat Minkowski space", ErrorKind::precondition);
    const GreenOperator kg = wave_green(WaveOperator::klein_gordon(st, m), side, opt);
    const GreenOperator tilde = direct_sum_green({kg, kg});
    GreenOperator g("proca", side, GreenStrategy::composed, st, 2, 2);
    g.impl = [tilde, m](const Section& f, const RasterMask* eval) {
        const Section gt =
            (-1.0) * (eval ? tilde.apply_on(f, detail::dilate(*eval, 2)) : tilde(f));
        return detail::masked((1.0 / (m * m)) * detail::proca_d_delta(gt) + gt, eval);
    };
    g.op = [m](const Section& u) { return proca_apply(m, u); };
    g.shadow = [tilde](const RasterMask& s) { return detail::dilate(tilde.shadow(s), 2); };
    g.dependence = [tilde](const RasterMask& s) { return tilde.dependence(detail::dilate(s, 2)); };
    g.parts = {tilde};
    return g;
}

struct ProcaResult {
    Section field;
    double residual = 0; // ||P G f - f|| / ||f|| away from the window edge
};

inline ProcaResult proca_demo(const ProductSpacetime& st, double m, const Section& f, GreenSolveOptions opt = {})
{
    const GreenOperator g = proca_green(st, m, Side::advanced, opt);
    ProcaResult r{g(f), 0.0};
    const RasterMask inner = interior_mask(f.grid, 3);
    r.residual = relative_l2(proca_apply(m, r.field), f, &inner);
    return r;
}

// ---------------------------------------------------------------- checks

// Trapezoid pairing weighted by sqrt(beta gamma).
inline double pairing(const ProductSpacetime& st, const Section& a, const Section& b)
{
    require_same_grid(a, b, "pairing grid mismatch");
    require(a.rank == b.rank, "pairing rank mismatch", ErrorKind::invalid_argument);
    const Grid& g = a.grid;
    const bool circle = g.topology == Topology::circle;
    long double s = 0;
    for (int i = 0; i < g.nt; ++i) {
        const double wi = (i == 0 || i == g.nt - 1) ? 0.5 : 1.0;
        for (int j = 0; j < g.nx; ++j) {
            const double wj = (!circle && (j == 0 || j == g.nx - 1)) ? 0.5 : 1.0;
            double d = 0;
            for (int k = 0; k < a.rank; ++k) d += a.at(i, j, k) * b.at(i, j, k);
            if (d != 0.0) s += wi * wj * st.volume_density(g.t(i), g.x(j)) * d;
        }
    }
    return static_cast<double>(s) * g.dt * g.dx;
}

inline double pairing_norm(const ProductSpacetime& st, const Section& a)
{
    return std::sqrt(std::max(0.0, pairing(st, a, a)));
}

// |<G~-* phi, f> - <phi, G+ f>| / (||phi|| ||f||), where G_dual inverts the
// formal dual on the opposite side of G.
inline double reciprocity_check(const GreenOperator& G, const GreenOperator& G_dual, const Section& phi,
                                const Section& f)
{
    require(G.side != Side::causal && G_dual.side == opposite(G.side),
            "reciprocity pairs an operator with the dual of the opposite side", ErrorKind::invalid_argument);
    const double nphi = pairing_norm(G.spacetime, phi), nf = pairing_norm(G.spacetime, f);
    if (nphi == 0.0 || nf == 0.0) return 0.0;
    const double lhs = pairing(G.spacetime, G_dual(phi), f);
    const double rhs = pairing(G.spacetime, phi, G(f));
    return std::abs(lhs - rhs) / (nphi * nf);
}

// Unit-mass hat over 2x2 cells centred at p (bilinear weights / (dt dx)).
inline Section discrete_delta(const Grid& g, Vec2 p, int rank = 1, int component = 0)
{
    const double fi = (p.t - g.t(0)) / g.dt, fj = (p.x - g.x(0)) / g.dx;
    const int i = static_cast<int>(std::floor(fi)), j = static_cast<int>(std::floor(fj));
    const int edge = 2;
    const bool circle = g.topology == Topology::circle;
    require(i >= edge && i + 1 < g.nt - edge && (circle || (j >= edge && j + 1 < g.nx - edge)),
            "source point too close to window edge", ErrorKind::invalid_argument);
    const double a = fi - i, b = fj - j;
    Section d(g, rank);
    const double s = 1.0 / (g.dt * g.dx);
    d.at(i, g.wrap(j), component) += (1 - a) * (1 - b) * s;
    d.at(i, g.wrap(j + 1), component) += (1 - a) * b * s;
    d.at(i + 1, g.wrap(j), component) += a * (1 - b) * s;
    d.at(i + 1, g.wrap(j + 1), component) += a * b * s;
    return d;
}

inline Section fundamental_solution(const GreenOperator& G, const Grid& g, Vec2 p, int component = 0)
{
    return G(discrete_delta(g, p, G.rank_in, component));
}

struct ExactSequenceCorpus {
    std::vector<Section> compact;   // compactly supported sections v
    std::vector<Section> solutions; // homogeneous solutions with spacelike compact support
};

struct ExactSequenceOptions {
    double tol = 0.02;
    double injectivity_floor = 1e-2; // ||P v|| / ||v|| must stay above this
    int margin = 3;                  // cells ignored at the window edge
    double cutoff_t = NAN;           // plateau start of the temporal cutoff; NaN: 60% of the window
    double cutoff_gap = NAN;         // NaN: 20% of the window
};

// The four constructive statements of exactness of
//   0 -> C_c -P-> C_c -G+-> ... for the propagator G = G+ - G-:
// (1) P is injective on compact supports, (2) G P v = 0, (3) f = P v with
// G f = 0 has the compactly supported preimage G+ f, (4) every homogeneous
// solution u is G g for g = P(chi u), chi a temporal cutoff.
inline std::vector<CheckRow> exact_sequence_check(const GreenOperator& gp, const GreenOperator& gm,
                                                  const ExactSequenceCorpus& corpus,
                                                  const ExactSequenceOptions& opt = {})
{
    const GreenOperator G = causal_propagator(gp, gm);
    std::vector<CheckRow> rows;
    auto ratio = [](double a, double b) { return b == 0.0 ? (a == 0.0 ? 0.0 : INFINITY) : a / b; };
    for (std::size_t n = 0; n < corpus.compact.size(); ++n) {
        const Section& v = corpus.compact[n];
        require(v.rank == gp.rank_out, "corpus element rank mismatch", ErrorKind::invalid_argument);
        const Grid& g = v.grid;
        const RasterMask inner = interior_mask(g, opt.margin);
        const std::string id = "v" + std::to_string(n) + ".";
        // compactly supported inside the window
        const RasterMask nz = v.nonzero();
        for (int i = 0; i < g.nt; ++i)
            for (int j = 0; j < g.nx; ++j)
                if (nz(i, j) && !inner(i, j))
                    throw Error(ErrorKind::precondition, "corpus element " + std::to_string(n) +
                                                             " is not compactly supported inside the window");
        const double nv = l2_norm(v, &inner);
        const Section f = gp.apply_op(v);
        if (nv > 0) rows.push_back(CheckRow::lower(id + "injectivity", l2_norm(f, &inner) / nv, opt.injectivity_floor));
        rows.push_back(CheckRow::upper(id + "GPv", ratio(l2_norm(G(f), &inner), nv), opt.tol));
        const Section gpf = gp(f);
        rows.push_back(CheckRow::upper(id + "preimage", ratio(l2_norm(gpf - v, &inner), nv), opt.tol));
        rows.push_back(CheckRow::upper(id + "preimage_residual",
                                       ratio(l2_norm(gp.apply_op(gpf) - f, &inner), l2_norm(f, &inner)), opt.tol));
        // compact support mask: G+ f is negligible away from supp v
        const RasterMask near = detail::dilate(nz, 2);
        double peak = 0, outside = 0;
        for (int i = 0; i < g.nt; ++i)
            for (int j = 0; j < g.nx; ++j)
                for (int k = 0; k < gpf.rank; ++k) {
                    const double a = std::abs(gpf.at(i, j, k));
                    peak = std::max(peak, a);
                    if (!near(i, j)) outside = std::max(outside, a);
                }
        rows.push_back(CheckRow::upper(id + "preimage_support", ratio(outside, peak), opt.tol));
    }
    for (std::size_t n = 0; n < corpus.solutions.size(); ++n) {
        const Section& u = corpus.solutions[n];
        require(u.rank == gp.rank_out, "corpus solution rank mismatch", ErrorKind::invalid_argument);
        const Grid& g = u.grid;
        const RasterMask inner = interior_mask(g, opt.margin);
        const std::string id = "u" + std::to_string(n) + ".";
        const double nu = l2_norm(u, &inner);
        const Section pu = gp.apply_op(u);
        require(ratio(l2_norm(pu, &inner), nu) <= opt.tol || nu == 0.0,
                "corpus solution " + std::to_string(n) + " does not solve P u = 0", ErrorKind::precondition);
        const double span = g.t_last() - g.t(0);
        const double gap = std::isnan(opt.cutoff_gap) ? 0.2 * span : opt.cutoff_gap;
        const double tc = std::isnan(opt.cutoff_t) ? g.t(0) + 0.6 * span : opt.cutoff_t;
        const CutoffFunction chi = make_time_cutoff(g, tc, gap);
        Section up(g, u.rank), chipu(g, u.rank);
        for (int i = 0; i < g.nt; ++i)
            for (int j = 0; j < g.nx; ++j)
                for (int k = 0; k < u.rank; ++k) {
                    up.at(i, j, k) = chi.chi.at(i, j) * u.at(i, j, k);
                    chipu.at(i, j, k) = chi.chi.at(i, j) * pu.at(i, j, k);
                }
        // P(chi u) - chi P u: equal to P u+ for exact solutions and supported
        // in the ramp of chi on the grid
        const Section src = gp.apply_op(up) - chipu;
        rows.push_back(CheckRow::upper(id + "split", ratio(l2_norm(G(src) - u, &inner), nu), opt.tol));
    }
    return rows;
}

} // namespace greenhyp
