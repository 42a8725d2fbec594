#pragma once

// Composite checks shared by the command-line driver and the acceptance suite.

#include "green.hpp"
#include "solver.hpp"
#include "spacetime.hpp"

#include <cmath>

namespace greenhyp {

// Nodes whose numerical past back to row `from` stays inside `mask`. Each
// step reads `radius` neighbours on either side, on the row below and (for
// the source) on the node's own row.
inline RasterMask inside_history(const RasterMask& mask, int from, int radius)
{
    const Grid& g = mask.grid;
    RasterMask q(g);
    auto window_ok = [&](const RasterMask& m, int i, int j) {
        if (j < radius || j + radius >= g.nx) return false;
        for (int d = -radius; d <= radius; ++d)
            if (!m(i, j + d)) return false;
        return true;
    };
    for (int j = 0; j < g.nx; ++j)
        if (window_ok(mask, from, j)) q.set(from, j);
    for (int i = from + 1; i < g.nt; ++i)
        for (int j = 0; j < g.nx; ++j)
            if (window_ok(mask, i, j) && window_ok(q, i - 1, j)) q.set(i, j);
    return q;
}

struct RestrictionReport {
    double max_difference = 0;
    std::size_t compared_nodes = 0;
    std::size_t nonzero_values = 0;
};

// Solves P u = f from u0 on the whole grid, then again inside the diamond
// J+(p) cap J-(q) from the restriction of u to the row nearest slice_t, with
// f cut to the diamond. The two must agree bitwise wherever the stencil
// history of a node lies in the diamond.
inline RestrictionReport restriction_check(const FirstOrderSystem<double>& sys, const ProductSpacetime& st,
                                           const Grid& g, const Section* f, const CauchyData& u0, Vec2 p, Vec2 q,
                                           double slice_t, const SolveOptions& opt = {})
{
    require(u0.slice == 0, "restriction_check: Cauchy data must sit on the first row", ErrorKind::invalid_argument);
    const int n = sys.rank();
    const Section full = solve_cauchy(sys, st, f, u0, g, opt);

    const Diamond d = restrict_domain(st, g, p, q);
    const int slice = static_cast<int>(std::lround((slice_t - g.t(0)) / g.dt)) - d.parent_row0;
    require(slice >= 0 && slice < d.grid.nt - 1, "restriction_check: slice outside the diamond",
            ErrorKind::invalid_argument);
    Section fd(d.grid, n);
    if (f) fd = detail::masked(detail::restrict_section(*f, d.grid), &d.mask);
    CauchyData ud = CauchyData::zeros(d.grid, slice, n);
    for (int j = 0; j < d.grid.nx; ++j)
        for (int k = 0; k < n; ++k)
            if (d.mask(slice, j)) ud.at(j, k) = full.at(slice + d.parent_row0, j + d.parent_col0, k);
    SolveOptions ropt = opt;
    ropt.domain = &d.mask;
    ropt.check_cone = false; // the diamond edge is the boundary of this solve
    const Section part = solve_cauchy(sys, st, &fd, ud, d.grid, ropt);

    const int radius = static_cast<int>(std::lround(grid_cone_speed(g, opt.scheme) * g.dt / g.dx));
    const RasterMask inside = inside_history(d.mask, slice, radius);
    RestrictionReport rep;
    for (int i = slice; i < d.grid.nt; ++i)
        for (int j = 0; j < d.grid.nx; ++j) {
            if (!inside(i, j)) continue;
            ++rep.compared_nodes;
            for (int k = 0; k < n; ++k) {
                const double a = part.at(i, j, k), b = full.at(i + d.parent_row0, j + d.parent_col0, k);
                rep.max_difference = std::max(rep.max_difference, std::abs(a - b));
                if (b != 0.0) ++rep.nonzero_values;
            }
        }
    return rep;
}

} // namespace greenhyp
