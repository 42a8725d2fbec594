#pragma once

// Command implementations behind the greenhyp executable. Each command turns
// a config (plus flag overrides) into a Report and a set of named artifacts;
// the executable writes them and maps errors to exit codes.

#include "config.hpp"
#include "corpus.hpp"
#include "green.hpp"
#include "report.hpp"
#include "solver.hpp"
#include "support_sets.hpp"
#include "verify.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace greenhyp::cli {

struct Options {
    std::string config;   // --config
    std::string out;      // --out: artifact directory
    std::string set;      // classify, verify duality: PL set file
    std::string source;   // --source: bump file overriding [sources]
    std::string op;       // green: box, box2, dirac, kg, proca, custom
    std::string side;     // advanced, retarded
    std::string strategy; // kernel, cauchy, compose, sqrt
    std::string check;    // verify: energy, speed, exact-seq, reciprocity, restriction, duality, diagram
    std::string kind;     // corpus: plsets, systems, sources
    std::optional<std::uint64_t> seed;
    std::optional<int> levels;
    std::optional<int> size;
    bool quiet = false;
};

struct Artifact {
    std::string name;
    std::string bytes;
};

struct Result {
    Report report;
    std::vector<Artifact> artifacts;
    bool has_checks = true; // classify and corpus only produce data
};

namespace detail {

inline std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    require(bool(in), "cannot open " + path, ErrorKind::io);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Bump file: "t x r amplitude" per line or ';'-separated, '#' comments.
inline SourceSpec read_bumps(const std::string& path)
{
    std::istringstream in(read_file(path));
    std::string line, joined;
    while (std::getline(in, line)) joined += line.substr(0, line.find('#')) + ';';
    return parse_bumps(joined);
}

inline Config load(const Options& o)
{
    return o.config.empty() ? Config::parse(std::string(), "<none>") : Config::load(o.config);
}

inline Config require_config(const Options& o, const std::string& command)
{
    require(!o.config.empty(), command + " needs --config", ErrorKind::invalid_argument);
    return Config::load(o.config);
}

inline std::string digest(const std::string& command, const Config& c, const Options& o,
                          const std::vector<std::string>& extra = {})
{
    Fnv1a h;
    h.update(command);
    h.update(c.serialize());
    for (const std::string* s : {&o.set, &o.source, &o.op, &o.side, &o.strategy, &o.check, &o.kind}) {
        h.update("|");
        h.update(*s);
    }
    h.update("|" + (o.seed ? std::to_string(*o.seed) : std::string()));
    h.update("|" + (o.levels ? std::to_string(*o.levels) : std::string()));
    h.update("|" + (o.size ? std::to_string(*o.size) : std::string()));
    for (const auto& e : extra) h.update(e);
    return h.hex();
}

inline std::uint64_t seed_of(const Config& c, const Options& o)
{
    return o.seed ? *o.seed : static_cast<std::uint64_t>(c.integer_or("run", "seed", 1));
}

// Field dump as CSV plus its PGM quick-look.
inline void add_field(Result& r, const std::string& stem, const Section& u)
{
    std::ostringstream csv;
    write_csv(csv, u);
    r.artifacts.push_back({stem + ".csv", csv.str()});
    std::string range;
    r.artifacts.push_back({stem + ".pgm", pgm_bytes(u, range)});
    r.artifacts.push_back({stem + ".pgm.range", range});
}

// ---------------------------------------------------------------- systems

// First-order system of the [system] section; wave-type presets carry their
// reduction so that scalar sources can be lifted.
struct SystemSetup {
    FirstOrderSystem<double> sys;
    std::optional<WaveReduction> reduction;
};

inline SystemSetup system_setup(const Config& c, const ProductSpacetime& st)
{
    const std::string preset = c.string_or("system", "preset", "custom");
    if (preset == "custom") {
        require(!system_is_complex(c), c.source() + ": the driver runs real systems only", ErrorKind::parse);
        return {system_from<double>(c), std::nullopt};
    }
    if (preset == "transport") return {FirstOrderSystem<double>::transport(c.number_or("system", "speed", 0.5)), {}};
    if (preset == "dirac") return {dirac_1p1().symmetrized(), std::nullopt};
    if (preset == "chiral") return {chiral_block().op, std::nullopt};
    if (preset == "wave" || preset == "klein_gordon") {
        const WaveOperator w = preset == "wave" ? WaveOperator::flat(st)
                                                : WaveOperator::klein_gordon(st, c.number_or("system", "mass", 1.0));
        WaveReduction red = wave_to_first_order(w);
        return {red.system, red};
    }
    throw Error(ErrorKind::parse, c.source() + ": unknown system preset '" + preset +
                                      "' (expected custom, transport, dirac, chiral, wave or klein_gordon)");
}

// ---------------------------------------------------------------- sources

// Bumps from [sources]: an inline list, a file holding one, or `count` random
// bumps of radius `radius` near the lower middle of the window.
inline SourceSpec source_spec(const Config& c, const ProductSpacetime& st, const Options& o)
{
    if (!o.source.empty()) return read_bumps(o.source);
    if (c.has("sources", "bumps")) return parse_bumps(c.required("sources", "bumps"));
    if (c.has("sources", "file")) return read_bumps(c.path("sources", "file"));
    const long long count = c.integer_or("sources", "count", 0);
    if (count <= 0) return {};
    const double span = st.t_max() - st.t_min();
    const double width = st.topology() == Topology::circle ? st.circumference() : st.x_max() - st.x_min();
    const double mid = st.x_min() + width / 2;
    const double r = c.number_or("sources", "radius", 0.1 * std::min(span, width));
    Rng rng(static_cast<std::uint64_t>(c.integer_or("sources", "seed", static_cast<long long>(seed_of(c, o)))));
    SourceSpec s;
    for (long long k = 0; k < count; ++k)
        s.bumps.push_back({st.t_min() + span * rng.uniform(0.3, 0.45), mid + width * rng.uniform(-0.05, 0.05), r,
                           rng.uniform(-1.0, 1.0)});
    return s;
}

// Component k of a rank-n source is the scalar source scaled by 1/(k+1).
inline Section lift(const SourceSpec& s, const Grid& g, int rank)
{
    const Section base = s.sample(g);
    Section f(g, rank);
    for (int k = 0; k < rank; ++k) greenhyp::detail::set_components(f, k, (1.0 / (k + 1)) * base);
    return f;
}

inline Section system_source(const SystemSetup& s, const SourceSpec& spec, const Grid& g)
{
    if (s.reduction) return s.reduction->source(spec.sample(g));
    return lift(spec, g, s.sys.rank());
}

// ---------------------------------------------------------------- Green's operators

inline std::string default_strategy(const std::string& op)
{
    if (op == "box" || op == "box2") return "kernel";
    if (op == "dirac") return "sqrt";
    return "cauchy";
}

struct GreenChoice {
    GreenOperator G;
    std::string op, strategy;
};

// The Dirac operator itself from its symmetrized form: D u = f iff (Q D) u = Q f.
inline GreenOperator dirac_from_symmetrized(const ProductSpacetime& st, Side side, const GreenSolveOptions& so)
{
    const DiracOperator dir = dirac_1p1();
    const GreenOperator sym = green_from_cauchy(dir.symmetrized(), st, side, so);
    GreenOperator g("dirac", side, GreenStrategy::cauchy_solve, st, 2, 2);
    const MatR q = dir.q;
    g.impl = [sym, q](const Section& f, const RasterMask* eval) {
        Section qf(f.grid, 2);
        for (std::size_t n = 0; n < f.grid.nodes(); ++n) {
            qf.values[2 * n] = q(0, 0) * f.values[2 * n] + q(0, 1) * f.values[2 * n + 1];
            qf.values[2 * n + 1] = q(1, 0) * f.values[2 * n] + q(1, 1) * f.values[2 * n + 1];
        }
        return eval ? sym.apply_on(qf, *eval) : sym(qf);
    };
    g.op = [d = dir.d](const Section& u) { return apply(d, u); };
    g.shadow = sym.shadow;
    g.dependence = sym.dependence;
    g.parts = {sym};
    return g;
}

inline GreenChoice green_choice(const Config& c, const ProductSpacetime& st, const Options& o)
{
    const std::string op = !o.op.empty() ? o.op : c.string_or("green", "op", "box");
    // a config strategy belongs to the config op
    const std::string strategy = !o.strategy.empty() ? o.strategy
                                 : !o.op.empty()     ? default_strategy(op)
                                                     : c.string_or("green", "strategy", default_strategy(op));
    const Side side = parse_side(!o.side.empty() ? o.side : c.string_or("green", "side", "advanced"));
    require(side != Side::causal, "green needs --side advanced or retarded", ErrorKind::invalid_argument);
    const double mass = c.number_or("green", "mass", c.number_or("system", "mass", 1.0));
    GreenSolveOptions so;
    so.solve = solve_options_from(c);
    ExtendOptions ext;
    ext.region_cells = static_cast<int>(c.integer_or("green", "region_cells", ext.region_cells));
    auto bad = [&]() -> GreenChoice {
        throw Error(ErrorKind::invalid_argument, "strategy '" + strategy + "' is not available for op '" + op + "'");
    };
    if (op == "box") {
        if (strategy == "kernel") return {box_green(st, side), op, strategy};
        if (strategy == "cauchy") return {wave_green(WaveOperator::flat(st), side, so), op, strategy};
        return bad();
    }
    if (op == "box2") {
        if (strategy == "kernel") return {box2_green(st, side), op, strategy};
        if (strategy == "compose") return {compose_green(box_green(st, side), box_green(st, side), ext), op, strategy};
        return bad();
    }
    if (op == "dirac") {
        if (strategy == "sqrt")
            return {sqrt_green(dirac_1p1(), direct_sum_green({box_green(st, side), box_green(st, side)})), op,
                    strategy};
        if (strategy == "cauchy") return {dirac_from_symmetrized(st, side, so), op, strategy};
        return bad();
    }
    if (op == "kg") {
        if (strategy == "cauchy") return {wave_green(WaveOperator::klein_gordon(st, mass), side, so), op, strategy};
        return bad();
    }
    if (op == "proca") {
        if (strategy == "cauchy") return {proca_green(st, mass, side, so), op, strategy};
        return bad();
    }
    if (op == "custom") {
        if (strategy == "cauchy") return {green_from_cauchy(system_setup(c, st).sys, st, side, so), op, strategy};
        return bad();
    }
    throw Error(ErrorKind::invalid_argument,
                "unknown op '" + op + "' (expected box, box2, dirac, kg, proca or custom)");
}

// Halfplanes whose normal lies strictly within 15 degrees of a null
// direction; the finite duality families only decide sets without them.
inline int near_null_normals(const PLSet& a)
{
    int n = 0;
    for (const ConvexPiece& p : a.pieces())
        for (const HalfPlane& h : p.halfplanes()) {
            const double len = std::hypot(h.a, h.b);
            if (len == 0) continue;
            const double c = std::max(std::abs(h.a + h.b), std::abs(h.a - h.b)) / (std::sqrt(2.0) * len);
            const double deg = std::acos(std::min(1.0, c)) * 180.0 / pi;
            if (deg > 1e-6 && deg < 15.0 - 1e-6) ++n;
        }
    return n;
}

inline double tolerance(const Config& c, double dflt) { return c.number_or("run", "tolerance", dflt); }

inline RasterMask interior(const Grid& g) { return interior_mask(g, 3); }

} // namespace detail

// ---------------------------------------------------------------- classify

inline Result classify(const Options& o)
{
    const Config c = detail::load(o);
    std::string path = o.set;
    if (path.empty() && c.has("run", "set")) path = c.path("run", "set");
    require(!path.empty(), "classify needs --set or [run] set", ErrorKind::invalid_argument);
    const std::string text = detail::read_file(path);
    const PLSet a = parse_plset(text);
    const SupportClass s = classify(a);
    Result r;
    r.has_checks = false;
    r.report.command = "classify";
    r.report.inputs_digest = detail::digest("classify", c, o, {text});
    const std::string name = std::filesystem::path(path).stem().string();
    r.artifacts.push_back({"classify.csv", std::string("name,") + support_header() + '\n' + name + ',' + s.csv() + '\n'});
    return r;
}

// ---------------------------------------------------------------- solve

// P u = f with zero Cauchy data on the first row.
inline Result solve(const Options& o)
{
    const Config c = detail::require_config(o, "solve");
    const ProductSpacetime st = spacetime_from(c);
    const Grid g = grid_from(c, st);
    const auto setup = detail::system_setup(c, st);
    const Section f = detail::system_source(setup, detail::source_spec(c, st, o), g);
    const SolveOptions opt = solve_options_from(c);
    const CauchyData u0 = CauchyData::zeros(g, 0, setup.sys.rank());
    const Section u = solve_cauchy(setup.sys, st, &f, u0, g, opt);
    Result r;
    r.report.command = "solve";
    r.report.inputs_digest = detail::digest("solve", c, o);
    const double margin = (grid_cone_speed(g, opt.scheme) - st.min_speed(g)) * (g.t_last() - g.t(0)) + 2 * g.dx;
    r.report.rows.push_back(CheckRow::upper("leakage", finite_speed_report(st, u, &f, u0, margin).leakage, 1e-12));
    const RasterMask in = detail::interior(g);
    if (l2_norm(f, &in) > 0)
        r.report.rows.push_back(
            CheckRow::upper("residual", relative_l2(apply(setup.sys, u), f, &in), detail::tolerance(c, 0.02)));
    detail::add_field(r, "solution", u);
    return r;
}

// ---------------------------------------------------------------- green

inline Result green(const Options& o)
{
    const Config c = detail::require_config(o, "green");
    const ProductSpacetime st = spacetime_from(c);
    const Grid g = grid_from(c, st);
    const auto choice = detail::green_choice(c, st, o);
    const GreenOperator& G = choice.G;
    // the wave-type operators act on scalars; others on rank_in components
    const Section f = detail::lift(detail::source_spec(c, st, o), g, G.rank_in);
    const Section u = G(f);
    Result r;
    r.report.command = "green " + choice.op + " " + choice.strategy + " " + side_name(G.side);
    r.report.inputs_digest = detail::digest("green", c, o);
    const RasterMask in = detail::interior(g);
    if (l2_norm(f, &in) > 0) {
        r.report.rows.push_back(
            CheckRow::upper("identity.PG", relative_l2(G.apply_op(u), f, &in), detail::tolerance(c, 0.02)));
    } else {
        r.report.rows.push_back(CheckRow::upper("zero_source.output", l2_norm(u), 0.0));
    }
    const RasterMask bound = G.support_bound(f.nonzero());
    const RasterMask nz = u.nonzero();
    std::size_t outside = 0;
    for (std::size_t k = 0; k < nz.on.size(); ++k) outside += nz.on[k] && !bound.on[k];
    r.report.rows.push_back(CheckRow::upper("support.nodes_outside_bound", static_cast<double>(outside), 0));
    detail::add_field(r, "green", u);
    return r;
}

// ---------------------------------------------------------------- verify

inline Result verify(const Options& o)
{
    const std::string& what = o.check;
    Result r;
    r.report.command = "verify " + what;

    if (what == "duality" || what == "diagram") {
        const Config c = detail::load(o);
        if (what == "duality") {
            std::string path = o.set;
            if (path.empty() && c.has("run", "set")) path = c.path("run", "set");
            require(!path.empty(), "verify duality needs --set or [run] set", ErrorKind::invalid_argument);
            const std::string text = detail::read_file(path);
            const PLSet a = parse_plset(text);
            r.report.inputs_digest = detail::digest("verify duality", c, o, {text});
            r.report.rows.push_back(CheckRow::upper("set.near_null_normals", detail::near_null_normals(a), 0));
            for (DualityClause clause : all_clauses()) {
                const DualityReport d = check_duality(a, clause, duality_family(clause, 50));
                r.report.rows.push_back(CheckRow::lower(std::string("clause.") + clause_name(clause) + ".agree",
                                                        d.agree() ? 1.0 : 0.0, 1.0));
            }
            return r;
        }
        const std::uint64_t seed = detail::seed_of(c, o);
        const int size = o.size ? *o.size : static_cast<int>(c.integer_or("run", "size", 1000));
        require(size >= 1, "corpus size must be at least 1", ErrorKind::invalid_argument);
        r.report.inputs_digest = detail::digest("verify diagram", c, o, {std::to_string(seed)});
        int violations = 0;
        for (const PLSet& a : plset_corpus(seed, static_cast<std::size_t>(size)))
            if (!classify(a).consistent()) ++violations;
        r.report.rows.push_back(CheckRow::upper("diagram.violations", violations, 0));
        r.report.rows.push_back(CheckRow::lower("diagram.sets", size, 1));
        return r;
    }

    const Config c = detail::require_config(o, "verify " + what);
    r.report.inputs_digest = detail::digest("verify " + what, c, o);
    const ProductSpacetime st = spacetime_from(c);
    const Grid g = grid_from(c, st);
    const SourceSpec spec = detail::source_spec(c, st, o);

    if (what == "energy" || what == "speed" || what == "restriction") {
        const auto setup = detail::system_setup(c, st);
        const Section f = detail::system_source(setup, spec, g);
        const SolveOptions opt = solve_options_from(c);
        const CauchyData u0 = CauchyData::zeros(g, 0, setup.sys.rank());
        const double xc = st.topology() == Topology::circle ? st.x_min() + st.circumference() / 2
                                                            : (st.x_min() + st.x_max()) / 2;
        if (what == "restriction") {
            require(st.topology() == Topology::line, "verify restriction needs a line window",
                    ErrorKind::invalid_argument);
            const double t0 = g.t(0), t1 = g.t_last();
            const RestrictionReport rep =
                restriction_check(setup.sys, st, g, &f, u0, {t0, xc}, {t1, xc}, t0 + 0.25 * (t1 - t0), opt);
            r.report.rows.push_back(CheckRow::upper("restriction.max_difference", rep.max_difference, 0.0));
            r.report.rows.push_back(
                CheckRow::lower("restriction.compared_nodes", static_cast<double>(rep.compared_nodes), 1));
            return r;
        }
        const Section u = solve_cauchy(setup.sys, st, &f, u0, g, opt);
        if (what == "speed") {
            const double margin =
                (grid_cone_speed(g, opt.scheme) - st.min_speed(g)) * (g.t_last() - g.t(0)) + 2 * g.dx;
            const auto rep = finite_speed_report(st, u, &f, u0, margin);
            r.report.rows.push_back(CheckRow::upper("speed.leakage", rep.leakage, 1e-12));
            return r;
        }
        const auto rep = verify_energy_estimate(setup.sys, st, u, &f, {g.t_last(), xc}, 0, g.nt - 1);
        r.report.rows.push_back(CheckRow::upper("energy.lhs_minus_rhs", rep.lhs - rep.rhs, 0.0));
        r.report.rows.push_back(CheckRow::upper("energy.ratio", rep.ratio, 1.0));
        return r;
    }

    if (what == "exact-seq") {
        Options adv = o, ret = o;
        adv.side = "advanced";
        ret.side = "retarded";
        const auto gp = detail::green_choice(c, st, adv), gm = detail::green_choice(c, st, ret);
        ExactSequenceCorpus corpus;
        corpus.compact.push_back(detail::lift(spec, g, gp.G.rank_in));
        ExactSequenceOptions eo;
        eo.tol = detail::tolerance(c, eo.tol);
        r.report.add(exact_sequence_check(gp.G, gm.G, corpus, eo));
        return r;
    }

    if (what == "reciprocity") {
        const auto choice = detail::green_choice(c, st, o);
        const GreenOperator dual = dual_green(choice.G, opposite(choice.G.side));
        const Section f = detail::lift(spec, g, choice.G.rank_in);
        // test section: the source reflected in time across the window
        SourceSpec mirrored = spec;
        for (auto& b : mirrored.bumps) b.t = st.t_min() + st.t_max() - b.t;
        const Section phi = detail::lift(mirrored, g, choice.G.rank_in);
        r.report.rows.push_back(
            CheckRow::upper("reciprocity.discrepancy", reciprocity_check(choice.G, dual, phi, f), detail::tolerance(c, 0.01)));
        return r;
    }

    throw Error(ErrorKind::invalid_argument, "unknown check '" + what +
                                                 "' (expected energy, speed, exact-seq, reciprocity, restriction, "
                                                 "duality or diagram)");
}

// ---------------------------------------------------------------- convergence

// Residual of P G f = f over successive refinements of the config grid.
inline Result convergence(const Options& o)
{
    const Config c = detail::require_config(o, "convergence");
    const int levels = o.levels ? *o.levels : static_cast<int>(c.integer_or("run", "levels", 3));
    require(levels >= 2, "convergence needs at least two levels", ErrorKind::invalid_argument);
    const ProductSpacetime st = spacetime_from(c);
    const auto choice = detail::green_choice(c, st, o);
    const SourceSpec spec = detail::source_spec(c, st, o);
    Result r;
    r.report.command = "convergence " + choice.op + " " + choice.strategy;
    r.report.inputs_digest = detail::digest("convergence", c, o);
    std::vector<double> res;
    std::ostringstream table;
    table << "level,nt,nx,residual,order\n";
    for (int k = 0; k < levels; ++k) {
        const Grid g = grid_from(c, st, k);
        const Section f = detail::lift(spec, g, choice.G.rank_in);
        const RasterMask in = detail::interior(g);
        require(l2_norm(f, &in) > 0, "convergence needs a nonzero source", ErrorKind::invalid_argument);
        res.push_back(relative_l2(choice.G.apply_op(choice.G(f)), f, &in));
        const std::string id = "level" + std::to_string(k);
        r.report.rows.push_back(CheckRow::upper(id + ".residual", res.back(),
                                                k + 1 == levels ? detail::tolerance(c, 0.02) : INFINITY));
        double ord = NAN;
        if (k > 0) {
            ord = std::log2(res[k - 1] / res[k]);
            r.report.rows.push_back(CheckRow::lower(id + ".order", ord, 1.8));
        }
        table << k << ',' << g.nt << ',' << g.nx << ',' << format_double(res.back()) << ','
              << (k > 0 ? format_double(ord) : std::string()) << '\n';
    }
    r.artifacts.push_back({"convergence.csv", table.str()});
    return r;
}

// ---------------------------------------------------------------- corpus

inline Result corpus(const Options& o)
{
    const Config c = detail::load(o);
    const std::uint64_t seed = detail::seed_of(c, o);
    const int size = o.size ? *o.size : static_cast<int>(c.integer_or("run", "size", 0));
    require(size >= 1, "corpus size must be at least 1 (--size or [run] size)", ErrorKind::invalid_argument);
    Result r;
    r.has_checks = false;
    r.report.command = "corpus " + o.kind;
    r.report.inputs_digest = detail::digest("corpus", c, o, {std::to_string(seed)});
    auto id = [](int k) {
        std::string s = std::to_string(k);
        return std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
    };
    if (o.kind == "plsets") {
        const auto sets = plset_corpus(seed, static_cast<std::size_t>(size));
        std::string index = std::string("name,") + support_header() + '\n';
        for (int k = 0; k < size; ++k) {
            std::ostringstream s;
            write_plset(s, sets[k]);
            const std::string name = "plset_" + id(k) + ".plset";
            r.artifacts.push_back({name, s.str()});
            index += "plset_" + id(k) + ',' + classify(sets[k]).csv() + '\n';
        }
        r.artifacts.push_back({"plsets.csv", index});
    } else if (o.kind == "systems") {
        const auto systems = system_corpus(seed, static_cast<std::size_t>(size));
        for (int k = 0; k < size; ++k) r.artifacts.push_back({"system_" + id(k) + ".cfg", systems[k].config_text()});
    } else if (o.kind == "sources") {
        const ProductSpacetime st = c.has_section("spacetime") ? spacetime_from(c)
                                                                : ProductSpacetime::minkowski(0, 2, -2, 2);
        const double span = st.t_max() - st.t_min();
        const double width = st.topology() == Topology::circle ? st.circumference() : st.x_max() - st.x_min();
        const double r_max = c.number_or("sources", "radius", 0.1 * std::min(span, width));
        const double mid = st.x_min() + width / 2;
        const auto srcs = source_corpus(seed, static_cast<std::size_t>(size), st.t_min() + 0.3 * span,
                                        st.t_min() + 0.5 * span, mid - 0.1 * width, mid + 0.1 * width, r_max);
        std::string all;
        for (const auto& s : srcs) all += s.text() + '\n';
        r.artifacts.push_back({"sources.txt", all});
    } else {
        throw Error(ErrorKind::invalid_argument, "unknown corpus kind '" + o.kind + "' (expected plsets, systems or sources)");
    }
    return r;
}

// ---------------------------------------------------------------- dispatch

inline Result run(const std::string& command, const Options& o)
{
    if (command == "classify") return classify(o);
    if (command == "solve") return solve(o);
    if (command == "green") return green(o);
    if (command == "verify") return verify(o);
    if (command == "convergence") return convergence(o);
    if (command == "corpus") return corpus(o);
    throw Error(ErrorKind::invalid_argument, "unknown command '" + command + "'");
}

// Writes report.csv and every artifact into `dir` (created if needed).
inline void write_artifacts(const Result& r, const std::string& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    require(!ec, "cannot create " + dir + ": " + ec.message(), ErrorKind::io);
    for (const auto& a : r.artifacts) atomic_write((std::filesystem::path(dir) / a.name).string(), a.bytes);
    atomic_write((std::filesystem::path(dir) / "report.csv").string(), r.report.csv());
}

} // namespace greenhyp::cli
