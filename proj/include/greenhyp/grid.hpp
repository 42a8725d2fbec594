#pragma once

// Space-time grids, node masks and sampled sections.

#include "core.hpp"
#include "support_sets.hpp"

#include <algorithm>
#include <complex>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

namespace greenhyp {

enum class Topology { line, circle };
enum class BoundaryMode { windowed, periodic };

// Node (i, j) sits at t = t0 + (it0 + i) dt, x = x0 + (ix0 + j) dx. Sub-grids
// keep the parent's origin and carry integer offsets, so coordinates are
// bitwise identical to the parent's.
struct Grid {
    int nt = 0;
    int nx = 0;
    double t0 = 0.0;
    double dt = 1.0;
    double x0 = 0.0;
    double dx = 1.0;
    Topology topology = Topology::line;
    int it0 = 0;
    int ix0 = 0;

    static Grid make(int nt, int nx, double t0, double dt, double x0, double dx,
                     Topology topo = Topology::line)
    {
        require(nt >= 1 && nx >= 1, "grid needs at least one node per axis", ErrorKind::invalid_argument);
        require(dt > 0 && dx > 0, "grid steps must be positive", ErrorKind::invalid_argument);
        Grid g;
        g.nt = nt;
        g.nx = nx;
        g.t0 = t0;
        g.dt = dt;
        g.x0 = x0;
        g.dx = dx;
        g.topology = topo;
        return g;
    }

    // Window [t_lo, t_hi] x [x_lo, x_hi] with n nodes per axis (endpoints included).
    static Grid window(double t_lo, double t_hi, int nt, double x_lo, double x_hi, int nx)
    {
        require(nt >= 2 && nx >= 2, "window needs two nodes per axis", ErrorKind::invalid_argument);
        return make(nt, nx, t_lo, (t_hi - t_lo) / (nt - 1), x_lo, (x_hi - x_lo) / (nx - 1));
    }

    // Circle of circumference L with nx nodes (node nx is node 0 again).
    static Grid circle(double t_lo, double t_hi, int nt, double x_lo, double circumference, int nx)
    {
        require(nt >= 2 && nx >= 3, "circle grid too small", ErrorKind::invalid_argument);
        return make(nt, nx, t_lo, (t_hi - t_lo) / (nt - 1), x_lo, circumference / nx, Topology::circle);
    }

    [[nodiscard]] double t(int i) const { return t0 + (it0 + i) * dt; }
    [[nodiscard]] double x(int j) const { return x0 + (ix0 + j) * dx; }
    [[nodiscard]] std::size_t nodes() const { return static_cast<std::size_t>(nt) * nx; }
    [[nodiscard]] std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * nx + j; }
    [[nodiscard]] BoundaryMode boundary() const
    {
        return topology == Topology::circle ? BoundaryMode::periodic : BoundaryMode::windowed;
    }
    [[nodiscard]] double circumference() const { return nx * dx; }
    [[nodiscard]] double t_last() const { return t(nt - 1); }
    [[nodiscard]] double x_last() const { return x(nx - 1); }

    [[nodiscard]] int wrap(int j) const
    {
        if (topology != Topology::circle) return j;
        j %= nx;
        return j < 0 ? j + nx : j;
    }

    // The sub-grid covering rows [i0, i0+nt) and columns [j0, j0+nx).
    [[nodiscard]] Grid sub(int i0, int ntsub, int j0, int nxsub) const
    {
        require(i0 >= 0 && j0 >= 0 && i0 + ntsub <= nt && j0 + nxsub <= nx && ntsub > 0 && nxsub > 0,
                "sub-grid outside parent");
        require(topology == Topology::line || nxsub == nx, "circle sub-grids must keep all columns");
        Grid g = *this;
        g.nt = ntsub;
        g.nx = nxsub;
        g.it0 = it0 + i0;
        g.ix0 = ix0 + j0;
        return g;
    }

    [[nodiscard]] bool same_as(const Grid& o) const
    {
        return nt == o.nt && nx == o.nx && t0 == o.t0 && dt == o.dt && x0 == o.x0 && dx == o.dx &&
               topology == o.topology && it0 == o.it0 && ix0 == o.ix0;
    }
};

struct RasterMask {
    Grid grid;
    std::vector<std::uint8_t> on;

    RasterMask() = default;
    explicit RasterMask(const Grid& g, bool value = false) : grid(g), on(g.nodes(), value ? 1 : 0) {}

    [[nodiscard]] bool operator()(int i, int j) const { return on[grid.index(i, j)] != 0; }
    void set(int i, int j, bool v = true) { on[grid.index(i, j)] = v ? 1 : 0; }

    [[nodiscard]] std::size_t count() const
    {
        return static_cast<std::size_t>(std::count(on.begin(), on.end(), std::uint8_t{1}));
    }
    [[nodiscard]] bool any() const { return count() > 0; }

    [[nodiscard]] bool subset_of(const RasterMask& o) const
    {
        require(grid.same_as(o.grid), "mask grid mismatch");
        for (std::size_t k = 0; k < on.size(); ++k)
            if (on[k] && !o.on[k]) return false;
        return true;
    }

    [[nodiscard]] RasterMask unite(const RasterMask& o) const
    {
        require(grid.same_as(o.grid), "mask grid mismatch");
        RasterMask r = *this;
        for (std::size_t k = 0; k < on.size(); ++k) r.on[k] = on[k] | o.on[k];
        return r;
    }

    [[nodiscard]] RasterMask intersect(const RasterMask& o) const
    {
        require(grid.same_as(o.grid), "mask grid mismatch");
        RasterMask r = *this;
        for (std::size_t k = 0; k < on.size(); ++k) r.on[k] = on[k] & o.on[k];
        return r;
    }

    static RasterMask from_set(const Grid& g, const PLSet& a)
    {
        RasterMask m(g);
        for (int i = 0; i < g.nt; ++i)
            for (int j = 0; j < g.nx; ++j)
                if (a.contains({g.t(i), g.x(j)})) m.set(i, j);
        return m;
    }

    // Grayscale P5 dump, 255 = set, time increasing upwards.
    void write_pgm(const std::string& path) const
    {
        std::string img = "P5\n" + std::to_string(grid.nx) + ' ' + std::to_string(grid.nt) + "\n255\n";
        for (int i = grid.nt - 1; i >= 0; --i)
            for (int j = 0; j < grid.nx; ++j) img.push_back(static_cast<char>((*this)(i, j) ? 255 : 0));
        atomic_write(path, img);
    }
};

// Rank-N section sampled at grid nodes; values are node-major then component.
template <class T = double>
struct GridSection {
    Grid grid;
    int rank = 1;
    std::vector<T> values;
    SupportClass tag = SupportClass::all();
    std::optional<RasterMask> mask;

    GridSection() = default;
    GridSection(const Grid& g, int n) : grid(g), rank(n), values(g.nodes() * n, T{})
    {
        require(n >= 1, "section rank must be positive", ErrorKind::invalid_argument);
    }

    [[nodiscard]] T& at(int i, int j, int k = 0) { return values[(grid.index(i, j)) * rank + k]; }
    [[nodiscard]] const T& at(int i, int j, int k = 0) const { return values[(grid.index(i, j)) * rank + k]; }
    [[nodiscard]] T* row(int i) { return values.data() + grid.index(i, 0) * rank; }
    [[nodiscard]] const T* row(int i) const { return values.data() + grid.index(i, 0) * rank; }

    // Nodes where any component exceeds the threshold in magnitude.
    [[nodiscard]] RasterMask nonzero(double threshold = 0.0) const
    {
        RasterMask m(grid);
        for (int i = 0; i < grid.nt; ++i)
            for (int j = 0; j < grid.nx; ++j)
                for (int k = 0; k < rank; ++k)
                    if (std::abs(at(i, j, k)) > threshold) {
                        m.set(i, j);
                        break;
                    }
        return m;
    }

    [[nodiscard]] GridSection component(int k) const
    {
        GridSection out(grid, 1);
        for (std::size_t n = 0; n < grid.nodes(); ++n) out.values[n] = values[n * rank + k];
        out.tag = tag;
        return out;
    }

    void set_component(int k, const GridSection& c)
    {
        require(c.rank == 1 && c.grid.same_as(grid), "component shape mismatch");
        for (std::size_t n = 0; n < grid.nodes(); ++n) values[n * rank + k] = c.values[n];
    }
};

using Section = GridSection<double>;

template <class T>
void require_same_grid(const GridSection<T>& a, const GridSection<T>& b, const char* what = "grid mismatch")
{
    require(a.grid.same_as(b.grid) && a.rank == b.rank, what);
}

template <class T>
GridSection<T> operator-(const GridSection<T>& a, const GridSection<T>& b)
{
    require_same_grid(a, b);
    GridSection<T> r = a;
    for (std::size_t k = 0; k < r.values.size(); ++k) r.values[k] -= b.values[k];
    r.mask.reset();
    return r;
}

template <class T>
GridSection<T> operator+(const GridSection<T>& a, const GridSection<T>& b)
{
    require_same_grid(a, b);
    GridSection<T> r = a;
    for (std::size_t k = 0; k < r.values.size(); ++k) r.values[k] += b.values[k];
    r.mask.reset();
    return r;
}

template <class T>
GridSection<T> operator*(T s, const GridSection<T>& a)
{
    GridSection<T> r = a;
    for (T& v : r.values) v *= s;
    return r;
}

// Plain node sum ||u||^2 weighted by dt dx over the selected nodes.
template <class T>
double l2_norm(const GridSection<T>& u, const RasterMask* only = nullptr)
{
    long double s = 0;
    for (int i = 0; i < u.grid.nt; ++i)
        for (int j = 0; j < u.grid.nx; ++j) {
            if (only && !(*only)(i, j)) continue;
            for (int k = 0; k < u.rank; ++k) s += std::norm(u.at(i, j, k));
        }
    return std::sqrt(static_cast<double>(s) * u.grid.dt * u.grid.dx);
}

// Nodes at least `margin` cells from the window edge (all columns on a circle).
inline RasterMask interior_mask(const Grid& g, int margin)
{
    RasterMask m(g);
    for (int i = margin; i < g.nt - margin; ++i)
        for (int j = 0; j < g.nx; ++j) {
            if (g.topology == Topology::line && (j < margin || j >= g.nx - margin)) continue;
            m.set(i, j);
        }
    return m;
}

template <class T>
double relative_l2(const GridSection<T>& a, const GridSection<T>& ref, const RasterMask* only = nullptr)
{
    const double d = l2_norm(a - ref, only);
    const double r = l2_norm(ref, only);
    if (r == 0.0) return d == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return d / r;
}

template <class T = double>
struct CauchyDataT {
    int slice = 0;
    int rank = 1;
    std::vector<T> values; // nx * rank

    static CauchyDataT zeros(const Grid& g, int slice, int rank)
    {
        CauchyDataT d;
        d.slice = slice;
        d.rank = rank;
        d.values.assign(static_cast<std::size_t>(g.nx) * rank, T{});
        return d;
    }
    // Row `slice` of a section.
    static CauchyDataT from_row(const GridSection<T>& u, int slice)
    {
        CauchyDataT d = zeros(u.grid, slice, u.rank);
        std::copy(u.row(slice), u.row(slice) + d.values.size(), d.values.begin());
        return d;
    }
    [[nodiscard]] T& at(int j, int k = 0) { return values[static_cast<std::size_t>(j) * rank + k]; }
    [[nodiscard]] T at(int j, int k = 0) const { return values[static_cast<std::size_t>(j) * rank + k]; }
};

using CauchyData = CauchyDataT<double>;

// ---------------------------------------------------------------- file I/O

namespace detail {

inline void put_le(std::ostream& out, double v)
{
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(bits >> (8 * k));
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline double get_le(std::istream& in, const std::string& path)
{
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    require(bool(in), path + ": truncated data", ErrorKind::parse);
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

} // namespace detail

// "GH1 nt nx n t0 dt x0 dx field [circle]" then little-endian doubles,
// node-major; complex values are (re, im) pairs.
template <class T>
void write_gh1(const std::string& path, const GridSection<T>& u)
{
    static_assert(sizeof(double) == 8);
    constexpr bool cplx = !std::is_same_v<T, double>;
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        require(bool(out), "cannot write " + path, ErrorKind::io);
        out << "GH1 " << u.grid.nt << ' ' << u.grid.nx << ' ' << u.rank << ' ' << format_double(u.grid.t(0)) << ' '
            << format_double(u.grid.dt) << ' ' << format_double(u.grid.x(0)) << ' ' << format_double(u.grid.dx)
            << (cplx ? " complex" : " real") << (u.grid.topology == Topology::circle ? " circle" : "") << '\n';
        for (const T& v : u.values) {
            if constexpr (cplx) {
                detail::put_le(out, v.real());
                detail::put_le(out, v.imag());
            } else {
                detail::put_le(out, v);
            }
        }
        require(bool(out), "write failed: " + path, ErrorKind::io);
    }
    require(std::rename(tmp.c_str(), path.c_str()) == 0, "cannot move " + tmp + " into place", ErrorKind::io);
}

template <class T = double>
GridSection<T> read_gh1(const std::string& path)
{
    constexpr bool cplx = !std::is_same_v<T, double>;
    std::ifstream in(path, std::ios::binary);
    require(bool(in), "cannot open " + path, ErrorKind::io);
    std::string header;
    std::getline(in, header);
    std::istringstream hs(header);
    std::string magic, field, topo;
    int nt = 0, nx = 0, n = 0;
    double t0 = 0, dt = 0, x0 = 0, dx = 0;
    hs >> magic >> nt >> nx >> n >> t0 >> dt >> x0 >> dx >> field;
    require(magic == "GH1" && !hs.fail(), path + ":1: bad GH1 header", ErrorKind::parse);
    hs >> topo;
    require(field == (cplx ? "complex" : "real"), path + ":1: expected a " + (cplx ? "complex" : "real") + " section",
            ErrorKind::parse);
    Grid g = Grid::make(nt, nx, t0, dt, x0, dx, topo == "circle" ? Topology::circle : Topology::line);
    GridSection<T> u(g, n);
    for (T& v : u.values) {
        if constexpr (cplx) {
            const double re = detail::get_le(in, path);
            v = T(re, detail::get_le(in, path));
        } else {
            v = detail::get_le(in, path);
        }
    }
    return u;
}

inline void write_csv(std::ostream& out, const Section& u)
{
    out << "i,j,t,x";
    for (int k = 0; k < u.rank; ++k) out << ",u" << k;
    out << '\n';
    for (int i = 0; i < u.grid.nt; ++i)
        for (int j = 0; j < u.grid.nx; ++j) {
            out << i << ',' << j << ',' << format_double(u.grid.t(i)) << ',' << format_double(u.grid.x(j));
            for (int k = 0; k < u.rank; ++k) out << ',' << format_double(u.at(i, j, k));
            out << '\n';
        }
}

// |u| quick-look as P5 bytes with linear scaling; `range` receives the
// sidecar text recording min and max.
inline std::string pgm_bytes(const Section& u, std::string& range)
{
    std::vector<double> mag(u.grid.nodes());
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t n = 0; n < mag.size(); ++n) {
        double s = 0;
        for (int k = 0; k < u.rank; ++k) s += sqr(u.values[n * u.rank + k]);
        mag[n] = std::sqrt(s);
        lo = std::min(lo, mag[n]);
        hi = std::max(hi, mag[n]);
    }
    std::string img = "P5\n" + std::to_string(u.grid.nx) + ' ' + std::to_string(u.grid.nt) + "\n255\n";
    const double span = hi > lo ? hi - lo : 1.0;
    for (int i = u.grid.nt - 1; i >= 0; --i)
        for (int j = 0; j < u.grid.nx; ++j) {
            const double v = (mag[u.grid.index(i, j)] - lo) / span;
            img.push_back(static_cast<char>(static_cast<int>(std::lround(255.0 * v))));
        }
    range = "min " + format_double(lo) + "\nmax " + format_double(hi) + '\n';
    return img;
}

inline void write_pgm(const std::string& path, const Section& u)
{
    std::string range;
    atomic_write(path, pgm_bytes(u, range));
    atomic_write(path + ".range", range);
}

} // namespace greenhyp
