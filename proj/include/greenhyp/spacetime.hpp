#pragma once

// Product spacetimes g = -beta dt^2 + gamma dx^2 over a t-interval times a
// line window or a circle, and their rasterized causal cones.

#include "core.hpp"
#include "expr.hpp"
#include "grid.hpp"

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

namespace greenhyp {

class ProductSpacetime {
public:
    ProductSpacetime(Topology topo, double t_min, double t_max, double x_min, double x_extent, ScalarField beta,
                     ScalarField gamma)
        : topo_(topo), t_min_(t_min), t_max_(t_max), x_min_(x_min), beta_(std::move(beta)), gamma_(std::move(gamma))
    {
        require(t_max > t_min, "spacetime needs t_max > t_min", ErrorKind::invalid_argument);
        if (topo == Topology::line) {
            x_max_ = x_extent;
            require(x_max_ > x_min_, "spacetime needs x_max > x_min", ErrorKind::invalid_argument);
        } else {
            require(x_extent > 0, "circumference must be positive", ErrorKind::invalid_argument);
            x_max_ = x_min_ + x_extent;
        }
    }

    static ProductSpacetime minkowski(double t_min, double t_max, double x_min, double x_max)
    {
        return {Topology::line, t_min, t_max, x_min, x_max, 1.0, 1.0};
    }
    static ProductSpacetime minkowski_circle(double t_min, double t_max, double x_min, double circumference)
    {
        return {Topology::circle, t_min, t_max, x_min, circumference, 1.0, 1.0};
    }

    [[nodiscard]] Topology topology() const { return topo_; }
    [[nodiscard]] double t_min() const { return t_min_; }
    [[nodiscard]] double t_max() const { return t_max_; }
    [[nodiscard]] double x_min() const { return x_min_; }
    [[nodiscard]] double x_max() const { return x_max_; }
    [[nodiscard]] double circumference() const { return x_max_ - x_min_; }
    [[nodiscard]] const ScalarField& beta_field() const { return beta_; }
    [[nodiscard]] const ScalarField& gamma_field() const { return gamma_; }

    [[nodiscard]] bool is_flat() const
    {
        return beta_.is_constant() && gamma_.is_constant() && beta_.constant_value() == 1.0 &&
               gamma_.constant_value() == 1.0;
    }
    [[nodiscard]] bool constant_metric() const { return beta_.is_constant() && gamma_.is_constant(); }

    [[nodiscard]] double beta(double t, double x) const { return beta_(t, x); }
    [[nodiscard]] double gamma(double t, double x) const { return gamma_(t, x); }
    // sqrt(beta gamma): the volume density in dt dx
    [[nodiscard]] double volume_density(double t, double x) const { return std::sqrt(beta_(t, x) * gamma_(t, x)); }
    // sqrt(gamma): the slice area density in dx
    [[nodiscard]] double slice_density(double t, double x) const { return std::sqrt(gamma_(t, x)); }

    [[nodiscard]] bool contains(double t, double x, double tol = 1e-12) const
    {
        if (t < t_min_ - tol || t > t_max_ + tol) return false;
        if (topo_ == Topology::circle) return true;
        return x >= x_min_ - tol && x <= x_max_ + tol;
    }

    [[nodiscard]] double char_speed(double t, double x) const
    {
        require(contains(t, x, 1e-9), "point outside the spacetime domain", ErrorKind::invalid_argument);
        return speed_unchecked(t, x);
    }
    [[nodiscard]] double speed_unchecked(double t, double x) const
    {
        const double b = beta_(t, x), g = gamma_(t, x);
        return std::sqrt(b / g);
    }

    // Samples the metric on the grid; throws where beta or gamma is not positive.
    void check_metric(const Grid& g) const
    {
        for (int i = 0; i < g.nt; ++i)
            for (int j = 0; j < g.nx; ++j) {
                const double t = g.t(i), x = g.x(j);
                const double b = beta_(t, x), c = gamma_(t, x);
                if (!(b > 0) || !(c > 0) || !std::isfinite(b) || !std::isfinite(c))
                    throw Error(ErrorKind::invalid_argument, "metric not positive at (t,x) = (" + format_short(t) +
                                                                 ", " + format_short(x) + ")");
            }
    }

    [[nodiscard]] double max_speed(const Grid& g) const
    {
        if (constant_metric()) return std::sqrt(beta_.constant_value() / gamma_.constant_value());
        double m = 0;
        for (int i = 0; i < g.nt; ++i)
            for (int j = 0; j < g.nx; ++j) m = std::max(m, speed_unchecked(g.t(i), g.x(j)));
        return m;
    }
    [[nodiscard]] double min_speed(const Grid& g) const
    {
        if (constant_metric()) return std::sqrt(beta_.constant_value() / gamma_.constant_value());
        double m = std::numeric_limits<double>::infinity();
        for (int i = 0; i < g.nt; ++i)
            for (int j = 0; j < g.nx; ++j) m = std::min(m, speed_unchecked(g.t(i), g.x(j)));
        return m;
    }

    // x at time t_to on the null curve dx/dt = sign * max(c, floor) through
    // (t_from, x_from); classical RK4 with at most h per substep.
    [[nodiscard]] double null_curve(double t_from, double x_from, double t_to, int sign, double speed_floor = 0.0,
                                    double h = 0.0) const
    {
        const double span = t_to - t_from;
        if (span == 0.0) return x_from;
        if (constant_metric()) {
            const double c = std::max(speed_unchecked(0, 0), speed_floor);
            return x_from + sign * c * span;
        }
        if (h <= 0.0) h = std::abs(span) / 4.0;
        const int n = std::max(1, static_cast<int>(std::ceil(std::abs(span) / h - 1e-12)));
        const double k = span / n;
        auto f = [&](double t, double x) { return sign * std::max(speed_unchecked(t, x), speed_floor); };
        double t = t_from, x = x_from;
        for (int s = 0; s < n; ++s) {
            const double k1 = f(t, x);
            const double k2 = f(t + k / 2, x + k / 2 * k1);
            const double k3 = f(t + k / 2, x + k / 2 * k2);
            const double k4 = f(t + k, x + k * k3);
            x += k / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
            t = t_from + (s + 1) * k;
        }
        return x;
    }

    // Grid covering the domain with the given node counts.
    [[nodiscard]] Grid grid(int nt, int nx) const
    {
        if (topo_ == Topology::circle) return Grid::circle(t_min_, t_max_, nt, x_min_, circumference(), nx);
        return Grid::window(t_min_, t_max_, nt, x_min_, x_max_, nx);
    }

    // Same metric on a smaller time range / window.
    [[nodiscard]] ProductSpacetime restricted(double t_lo, double t_hi, double x_lo, double x_hi) const
    {
        if (topo_ == Topology::circle) return {Topology::circle, t_lo, t_hi, x_min_, circumference(), beta_, gamma_};
        return {Topology::line, t_lo, t_hi, x_lo, x_hi, beta_, gamma_};
    }

private:
    Topology topo_;
    double t_min_, t_max_, x_min_, x_max_ = 0;
    ScalarField beta_, gamma_;
};

// ---------------------------------------------------------------- cones

struct Interval {
    double lo;
    double hi;
};

// Rasterized causal cone: the continuous reachable intervals per row and the
// node mask derived from them.
struct ConeRaster {
    RasterMask mask;
    std::vector<std::vector<Interval>> rows;
    std::vector<bool> full_row; // circle rows covered completely
};

struct ConeOptions {
    int dilation_cells = 1;
    double speed_floor = 0.0; // use max(c, floor): e.g. dx/dt for the grid cone
    double margin = 0.0;      // extra physical width on both sides
};

enum class Direction { future, past };

namespace detail {

inline void merge_intervals(std::vector<Interval>& v)
{
    if (v.empty()) return;
    std::sort(v.begin(), v.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    std::vector<Interval> out{v[0]};
    for (std::size_t k = 1; k < v.size(); ++k) {
        if (v[k].lo <= out.back().hi) out.back().hi = std::max(out.back().hi, v[k].hi);
        else out.push_back(v[k]);
    }
    v.swap(out);
}

// Bring intervals into [x0, x0 + L), splitting across the seam. Returns true
// when the circle is covered.
inline bool normalize_circle(std::vector<Interval>& v, double x0, double L)
{
    std::vector<Interval> out;
    for (Interval iv : v) {
        if (iv.hi - iv.lo >= L) return true;
        const double shift = std::floor((iv.lo - x0) / L) * L;
        iv.lo -= shift;
        iv.hi -= shift;
        if (iv.hi > x0 + L) {
            out.push_back({iv.lo, x0 + L});
            out.push_back({x0, iv.hi - L});
        } else {
            out.push_back(iv);
        }
    }
    merge_intervals(out);
    v.swap(out);
    if (v.size() == 1 && v[0].lo <= x0 && v[0].hi >= x0 + L) return true;
    return false;
}

inline std::vector<Interval> seed_runs(const RasterMask& seed, int i)
{
    std::vector<Interval> runs;
    const Grid& g = seed.grid;
    int j = 0;
    while (j < g.nx) {
        if (!seed(i, j)) {
            ++j;
            continue;
        }
        const int a = j;
        while (j < g.nx && seed(i, j)) ++j;
        runs.push_back({g.x(a), g.x(j - 1)});
    }
    return runs;
}

} // namespace detail

// Rasterized J^+(seed) (or J^-) by a monotone sweep in time. The reachable
// set on each row is a union of intervals whose endpoints move along null
// curves (integrated, not sampled, so the sweep cannot undersample); seed
// runs are merged in row by row. Nodes within dilation_cells of an interval
// are marked.
inline ConeRaster raster_j(const ProductSpacetime& st, const RasterMask& seed, Direction dir,
                           const ConeOptions& opt = {})
{
    const Grid& g = seed.grid;
    const bool circle = g.topology == Topology::circle;
    require(!circle || st.topology() == Topology::circle, "grid and spacetime topology differ");
    ConeRaster out;
    out.mask = RasterMask(g);
    out.rows.resize(g.nt);
    out.full_row.assign(g.nt, false);
    const double L = g.circumference();
    const double x0 = g.x0;
    // tiny slack so nodes exactly on the dilated boundary are kept
    const double pad = opt.dilation_cells * g.dx + opt.margin + 1e-9 * g.dx;

    std::vector<Interval> cur;
    bool full = false;
    const int first = dir == Direction::future ? 0 : g.nt - 1;
    const int step = dir == Direction::future ? 1 : -1;
    for (int i = first; i >= 0 && i < g.nt; i += step) {
        if (i != first && !full) {
            const double ta = g.t(i - step), tb = g.t(i);
            for (Interval& iv : cur) {
                iv.lo = st.null_curve(ta, iv.lo, tb, -step, opt.speed_floor);
                iv.hi = st.null_curve(ta, iv.hi, tb, +step, opt.speed_floor);
            }
        }
        if (!full) {
            for (Interval r : detail::seed_runs(seed, i)) cur.push_back(r);
            if (circle) full = detail::normalize_circle(cur, x0, L);
            else detail::merge_intervals(cur);
        }
        out.full_row[i] = full;
        out.rows[i] = full ? std::vector<Interval>{{x0, x0 + L}} : cur;
        for (int j = 0; j < g.nx; ++j) {
            if (full) {
                out.mask.set(i, j);
                continue;
            }
            const double x = g.x(j);
            for (const Interval& iv : cur) {
                bool in = x >= iv.lo - pad && x <= iv.hi + pad;
                if (circle && !in) in = (x + L >= iv.lo - pad && x + L <= iv.hi + pad) ||
                                        (x - L >= iv.lo - pad && x - L <= iv.hi + pad);
                if (in) {
                    out.mask.set(i, j);
                    break;
                }
            }
        }
    }
    return out;
}

// Both cones at once: J(seed) = J^+(seed) cup J^-(seed).
inline RasterMask raster_j_both(const ProductSpacetime& st, const RasterMask& seed, const ConeOptions& opt = {})
{
    return raster_j(st, seed, Direction::future, opt).mask.unite(raster_j(st, seed, Direction::past, opt).mask);
}

// Mask whose only node is the one nearest to p.
inline RasterMask point_mask(const Grid& g, double t, double x)
{
    RasterMask m(g);
    const int i = static_cast<int>(std::lround((t - g.t(0)) / g.dt));
    const int j = static_cast<int>(std::lround((x - g.x(0)) / g.dx));
    require(i >= 0 && i < g.nt && j >= 0 && j < g.nx, "point outside the grid", ErrorKind::invalid_argument);
    m.set(i, j);
    return m;
}

// ---------------------------------------------------------------- diamonds

// Causal diamond J^+(p) cap J^-(q) with its own sub-grid of the parent grid.
struct Diamond {
    ProductSpacetime spacetime;
    Grid grid; // sub-grid of the parent (index offsets it0, ix0)
    RasterMask mask;
    std::vector<Interval> rows; // per sub-grid row, the exact diamond slice
    double area = 0.0;          // integral of sqrt(beta gamma) dt dx
    int parent_row0 = 0;
    int parent_col0 = 0;
};

inline Diamond restrict_domain(const ProductSpacetime& st, const Grid& parent, Vec2 p, Vec2 q)
{
    require(parent.topology == Topology::line, "diamonds are built on line windows");
    require(!(p.t == q.t && p.x == q.x), "empty diamond: p = q", ErrorKind::invalid_argument);
    require(q.t > p.t, "empty diamond: q is not in the future of p", ErrorKind::invalid_argument);
    const double h = parent.dt / 4;
    const double lo_q = st.null_curve(p.t, p.x, q.t, -1, 0.0, h);
    const double hi_q = st.null_curve(p.t, p.x, q.t, +1, 0.0, h);
    require(q.x >= lo_q - 1e-12 && q.x <= hi_q + 1e-12, "empty diamond: q is not in the future of p",
            ErrorKind::invalid_argument);

    auto slice = [&](double t) {
        const double a = std::max(st.null_curve(p.t, p.x, t, -1, 0.0, h), st.null_curve(q.t, q.x, t, +1, 0.0, h));
        const double b = std::min(st.null_curve(p.t, p.x, t, +1, 0.0, h), st.null_curve(q.t, q.x, t, -1, 0.0, h));
        return Interval{a, b};
    };

    const double eps = 1e-9;
    const int i0 = static_cast<int>(std::ceil((p.t - parent.t(0)) / parent.dt - eps));
    const int i1 = static_cast<int>(std::floor((q.t - parent.t(0)) / parent.dt + eps));
    require(i0 >= 0 && i1 < parent.nt && i1 > i0, "diamond not resolved by the grid", ErrorKind::invalid_argument);

    double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
    std::vector<Interval> rows;
    for (int i = i0; i <= i1; ++i) {
        const Interval s = slice(parent.t(i));
        rows.push_back(s);
        if (s.hi >= s.lo) {
            xlo = std::min(xlo, s.lo);
            xhi = std::max(xhi, s.hi);
        }
    }
    const int j0 = std::max(0, static_cast<int>(std::floor((xlo - parent.x(0)) / parent.dx + eps)));
    const int j1 = std::min(parent.nx - 1, static_cast<int>(std::ceil((xhi - parent.x(0)) / parent.dx - eps)));
    require(j1 >= j0, "empty diamond", ErrorKind::invalid_argument);
    require(xlo >= parent.x(0) - 1e-12 && xhi <= parent.x_last() + 1e-12, "diamond leaves the window",
            ErrorKind::invalid_argument);

    Diamond d{st.restricted(p.t, q.t, xlo, std::max(xhi, xlo + parent.dx)), parent.sub(i0, i1 - i0 + 1, j0, j1 - j0 + 1),
              RasterMask(), rows, 0.0, i0, j0};
    d.mask = RasterMask(d.grid);
    for (int i = 0; i < d.grid.nt; ++i)
        for (int j = 0; j < d.grid.nx; ++j) {
            const double x = d.grid.x(j);
            const double tolx = 1e-9 * parent.dx;
            if (x >= rows[i].lo - tolx && x <= rows[i].hi + tolx) d.mask.set(i, j);
        }
    require(d.mask.count() > 1, "empty diamond", ErrorKind::invalid_argument);

    // Area: trapezoid in t over rows, 5-point Gauss-Legendre in x per slice,
    // plus the tips between the apexes and the first/last grid rows.
    static const double gx[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                 0.9061798459386640};
    static const double gw[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
                                 0.2369268850561891};
    auto slice_integral = [&](double t, Interval s) {
        if (s.hi <= s.lo) return 0.0;
        double acc = 0;
        const double m = 0.5 * (s.lo + s.hi), r = 0.5 * (s.hi - s.lo);
        for (int k = 0; k < 5; ++k) acc += gw[k] * st.volume_density(t, m + r * gx[k]);
        return acc * r;
    };
    std::vector<double> ts;
    std::vector<double> vals;
    ts.push_back(p.t);
    vals.push_back(0.0);
    for (int i = i0; i <= i1; ++i) {
        const double t = parent.t(i);
        if (t <= p.t || t >= q.t) continue;
        ts.push_back(t);
        vals.push_back(slice_integral(t, rows[i - i0]));
    }
    ts.push_back(q.t);
    vals.push_back(0.0);
    for (std::size_t k = 1; k < ts.size(); ++k) d.area += 0.5 * (ts[k] - ts[k - 1]) * (vals[k] + vals[k - 1]);
    return d;
}

} // namespace greenhyp
