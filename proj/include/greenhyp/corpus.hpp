#pragma once

// Deterministic random corpora for the verification suites.

#include "core.hpp"
#include "grid.hpp"
#include "operators.hpp"
#include "support_sets.hpp"

#include <Eigen/Eigenvalues>

#include <sstream>
#include <string>
#include <vector>

namespace greenhyp {

// Halfplane normals are drawn from the 15-degree lattice, so null boundaries
// occur exactly and the nearest non-null slopes are tan 15 and tan 30 degrees
// away. Each piece contains an anchor point of [-8,8]^2; pieces with a vertex
// farther than 150 from the origin are redrawn.
inline ConvexPiece random_piece(Rng& rng)
{
    for (;;) {
        const Vec2 anchor{rng.uniform(-8, 8), rng.uniform(-8, 8)};
        std::vector<HalfPlane> hs;
        const int kind = rng.integer(0, 19);
        if (kind == 0) return ConvexPiece::point(anchor);
        if (kind == 1) {
            const double ang = (pi / 12) * rng.integer(0, 11);
            const Vec2 n{std::cos(ang), std::sin(ang)};
            const double c = dot(n, anchor);
            hs = {{n, c}, {-n, -c}};
        } else {
            const int m = rng.integer(2, 6);
            for (int i = 0; i < m; ++i) {
                const double ang = (pi / 12) * rng.integer(0, 23);
                const Vec2 n{std::cos(ang), std::sin(ang)};
                const double slack = rng.coin(0.15) ? 0.0 : rng.uniform(0.0, 8.0);
                hs.emplace_back(n, dot(n, anchor) + slack);
            }
        }
        ConvexPiece p(std::move(hs));
        if (p.empty()) continue;
        bool far = false;
        for (Vec2 v : p.vertices())
            if (norm(v) > 150.0) far = true;
        if (!far) return p;
    }
}

inline PLSet random_plset(Rng& rng)
{
    std::vector<ConvexPiece> ps;
    const int k = rng.integer(1, 3);
    for (int i = 0; i < k; ++i) ps.push_back(random_piece(rng));
    return PLSet(std::move(ps));
}

inline std::vector<PLSet> plset_corpus(std::uint64_t seed, std::size_t size)
{
    Rng rng(seed);
    std::vector<PLSet> out;
    out.reserve(size);
    for (std::size_t i = 0; i < size; ++i) out.push_back(random_plset(rng));
    return out;
}

// A random system P = dt + A1 dx + B with A1 symmetric and spectral radius
// <= 0.9 everywhere. Odd members modulate A1 by (1 + 0.2 sin(k x + phase)).
// Entries are kept as expression strings so the system can be written to a
// config file and read back identically.
struct SystemSpec {
    std::string name;
    int rank = 1;
    std::vector<std::string> a0, a1, b; // row-major entry expressions

    [[nodiscard]] FirstOrderSystem<double> build() const
    {
        auto sys = FirstOrderSystem<double>::make(name, MatrixField<double>::expressions(rank, rank, a0),
                                                  MatrixField<double>::expressions(rank, rank, a1),
                                                  MatrixField<double>::expressions(rank, rank, b));
        return sys;
    }

    [[nodiscard]] std::string config_text() const
    {
        auto join = [](const std::vector<std::string>& v) {
            std::string s;
            for (std::size_t k = 0; k < v.size(); ++k) s += (k ? "; " : "") + v[k];
            return s;
        };
        return "[system]\nrank = " + std::to_string(rank) + "\na0_expr = " + join(a0) + "\na1_expr = " + join(a1) +
               "\nb_expr = " + join(b) + "\n";
    }
};

inline SystemSpec random_system(Rng& rng, const std::string& name)
{
    SystemSpec s;
    s.name = name;
    s.rank = rng.integer(1, 3);
    const int n = s.rank;
    MatR a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) a(i, j) = a(j, i) = rng.uniform(-1, 1);
    const double rho = Eigen::SelfAdjointEigenSolver<MatR>(a).eigenvalues().cwiseAbs().maxCoeff();
    const bool variable = rng.coin(0.5);
    // radius 0.9 after the modulation peak 1.2
    const double target = rng.uniform(0.3, 1.0) * (variable ? 0.75 : 0.9);
    if (rho > 0) a *= target / rho;
    const double k = rng.uniform(0.5, 2.0), phase = rng.uniform(0, 2 * pi);
    const std::string mod = variable ? "*(1 + 0.2*sin(" + format_double(k) + "*x + " + format_double(phase) + "))" : "";
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            s.a0.push_back(i == j ? "1" : "0");
            s.a1.push_back(mod.empty() ? format_double(a(i, j)) : format_double(a(i, j)) + mod);
            s.b.push_back(format_double(rng.uniform(-0.5, 0.5)));
        }
    return s;
}

inline std::vector<SystemSpec> system_corpus(std::uint64_t seed, std::size_t size)
{
    Rng rng(seed);
    std::vector<SystemSpec> out;
    for (std::size_t k = 0; k < size; ++k) out.push_back(random_system(rng, "system" + std::to_string(k)));
    return out;
}

// Sum of compact bumps a (1 - r^2)^6 inside a region of (t, x).
struct Bump {
    double t, x, r, a;
};

struct SourceSpec {
    std::vector<Bump> bumps;

    [[nodiscard]] double operator()(double t, double x) const
    {
        double s = 0;
        for (const auto& b : bumps) s += b.a * bump6((sqr(t - b.t) + sqr(x - b.x)) / sqr(b.r));
        return s;
    }

    [[nodiscard]] Section sample(const Grid& g, int rank = 1, int component = 0) const
    {
        Section f(g, rank);
        for (int i = 0; i < g.nt; ++i)
            for (int j = 0; j < g.nx; ++j) f.at(i, j, component) = (*this)(g.t(i), g.x(j));
        return f;
    }

    [[nodiscard]] std::string text() const
    {
        std::string s;
        for (std::size_t k = 0; k < bumps.size(); ++k)
            s += (k ? "; " : "") + format_double(bumps[k].t) + " " + format_double(bumps[k].x) + " " +
                 format_double(bumps[k].r) + " " + format_double(bumps[k].a);
        return s;
    }
};

// 1 to 3 bumps with centres in [t_lo, t_hi] x [x_lo, x_hi] and radii in
// [0.5, 1] r_max, so every bump stays inside the box grown by r_max.
inline SourceSpec random_source(Rng& rng, double t_lo, double t_hi, double x_lo, double x_hi, double r_max)
{
    SourceSpec s;
    const int n = rng.integer(1, 3);
    for (int k = 0; k < n; ++k) {
        Bump b{};
        b.t = rng.uniform(t_lo, t_hi);
        b.x = rng.uniform(x_lo, x_hi);
        b.r = rng.uniform(0.5, 1.0) * r_max;
        b.a = rng.uniform(0.5, 1.5) * (rng.coin() ? 1 : -1);
        s.bumps.push_back(b);
    }
    return s;
}

inline std::vector<SourceSpec> source_corpus(std::uint64_t seed, std::size_t size, double t_lo, double t_hi,
                                             double x_lo, double x_hi, double r_max)
{
    Rng rng(seed);
    std::vector<SourceSpec> out;
    for (std::size_t k = 0; k < size; ++k) out.push_back(random_source(rng, t_lo, t_hi, x_lo, x_hi, r_max));
    return out;
}

// "t x r a; t x r a; ..."
inline SourceSpec parse_bumps(const std::string& text)
{
    SourceSpec s;
    std::stringstream all(text);
    std::string item;
    while (std::getline(all, item, ';')) {
        std::istringstream in(item);
        Bump b{};
        if (!(in >> b.t >> b.x >> b.r >> b.a)) {
            if (item.find_first_not_of(" \t") == std::string::npos) continue;
            throw Error(ErrorKind::parse, "bump '" + item + "' needs four numbers: t x r amplitude");
        }
        std::string rest;
        require(!(in >> rest), "bump '" + item + "' has trailing text", ErrorKind::parse);
        require(b.r > 0, "bump radius must be positive", ErrorKind::parse);
        s.bumps.push_back(b);
    }
    return s;
}

} // namespace greenhyp
