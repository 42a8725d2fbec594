#pragma once

// Flat key=value run configs with [section] headers, and builders for the
// objects they describe.
//
//   # comment
//   [spacetime]
//   topology = line
//   t_min = 0
//
// Matrix entries are ';'-separated row-major expressions; a complex entry is
// written "re|im".

#include "core.hpp"
#include "expr.hpp"
#include "grid.hpp"
#include "operators.hpp"
#include "solver.hpp"
#include "spacetime.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace greenhyp {

namespace detail {

inline std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

} // namespace detail

// Accepted sections and keys.
inline const std::map<std::string, std::set<std::string>>& config_schema()
{
    static const std::map<std::string, std::set<std::string>> schema = {
        {"spacetime",
         {"topology", "t_min", "t_max", "x_min", "x_max", "circumference", "beta_expr", "gamma_expr", "beta_file",
          "gamma_file"}},
        {"grid", {"nt", "nx", "t0", "dt", "x0", "dx", "cfl", "scheme", "dissipation"}},
        {"system", {"preset", "rank", "a0_expr", "a1_expr", "b_expr", "field", "fiber_metric", "speed", "mass"}},
        {"sources", {"file", "bumps", "count", "radius", "seed"}},
        {"green", {"op", "side", "strategy", "mass", "region_cells"}},
        {"run", {"seed", "levels", "tolerance", "size", "set", "cutoffs"}},
    };
    return schema;
}

class Config {
public:
    struct Entry {
        std::string key;
        std::string value;
        int line = 0;
    };
    struct Section {
        std::string name;
        std::vector<Entry> entries;
        int line = 0;
    };

    static Config parse(std::istream& in, const std::string& source = "<config>")
    {
        Config c;
        c.source_ = source;
        std::string raw;
        int line = 0;
        Section* cur = nullptr;
        auto fail = [&](const std::string& msg) {
            throw Error(ErrorKind::parse, source + ":" + std::to_string(line) + ": " + msg);
        };
        while (std::getline(in, raw)) {
            ++line;
            const std::string s = detail::trim(raw);
            if (s.empty() || s[0] == '#') continue;
            if (s.front() == '[') {
                if (s.back() != ']') fail("unterminated section header");
                const std::string name = detail::trim(std::string_view(s).substr(1, s.size() - 2));
                if (!config_schema().count(name)) fail("unknown section [" + name + "]");
                if (c.find_section(name)) fail("duplicate section [" + name + "]");
                c.sections_.push_back({name, {}, line});
                cur = &c.sections_.back();
                continue;
            }
            const auto eq = s.find('=');
            if (eq == std::string::npos) fail("expected key = value");
            if (!cur) fail("key outside of a section");
            const std::string key = detail::trim(std::string_view(s).substr(0, eq));
            const std::string value = detail::trim(std::string_view(s).substr(eq + 1));
            if (key.empty()) fail("empty key");
            if (!config_schema().at(cur->name).count(key)) fail("unknown key '" + key + "' in [" + cur->name + "]");
            for (const auto& e : cur->entries)
                if (e.key == key) fail("duplicate key '" + key + "' (first set on line " + std::to_string(e.line) + ")");
            cur->entries.push_back({key, value, line});
        }
        return c;
    }

    static Config parse(const std::string& text, const std::string& source = "<config>")
    {
        std::istringstream in(text);
        return parse(in, source);
    }

    static Config load(const std::string& path)
    {
        std::ifstream in(path);
        require(bool(in), "cannot open config " + path, ErrorKind::io);
        Config c = parse(in, path);
        c.base_dir_ = std::filesystem::path(path).parent_path().string();
        c.check_files();
        return c;
    }

    [[nodiscard]] std::string serialize() const
    {
        std::ostringstream out;
        bool first = true;
        for (const auto& s : sections_) {
            if (!first) out << '\n';
            first = false;
            out << '[' << s.name << "]\n";
            for (const auto& e : s.entries) out << e.key << " = " << e.value << '\n';
        }
        return out.str();
    }

    [[nodiscard]] bool operator==(const Config& o) const
    {
        if (sections_.size() != o.sections_.size()) return false;
        for (std::size_t k = 0; k < sections_.size(); ++k) {
            const auto& a = sections_[k];
            const auto& b = o.sections_[k];
            if (a.name != b.name || a.entries.size() != b.entries.size()) return false;
            for (std::size_t n = 0; n < a.entries.size(); ++n)
                if (a.entries[n].key != b.entries[n].key || a.entries[n].value != b.entries[n].value) return false;
        }
        return true;
    }

    [[nodiscard]] bool has_section(const std::string& s) const { return find_section(s) != nullptr; }
    [[nodiscard]] bool has(const std::string& s, const std::string& k) const { return find(s, k) != nullptr; }

    [[nodiscard]] std::optional<std::string> get(const std::string& s, const std::string& k) const
    {
        const Entry* e = find(s, k);
        if (!e) return std::nullopt;
        return e->value;
    }

    [[nodiscard]] std::string string_or(const std::string& s, const std::string& k, const std::string& dflt) const
    {
        const Entry* e = find(s, k);
        return e ? e->value : dflt;
    }

    [[nodiscard]] std::string required(const std::string& s, const std::string& k) const
    {
        const Entry* e = find(s, k);
        require(e != nullptr, source_ + ": missing key '" + k + "' in [" + s + "]", ErrorKind::parse);
        return e->value;
    }

    [[nodiscard]] double number(const std::string& s, const std::string& k) const
    {
        const Entry* e = find(s, k);
        require(e != nullptr, source_ + ": missing key '" + k + "' in [" + s + "]", ErrorKind::parse);
        return to_number(*e);
    }

    [[nodiscard]] double number_or(const std::string& s, const std::string& k, double dflt) const
    {
        const Entry* e = find(s, k);
        return e ? to_number(*e) : dflt;
    }

    [[nodiscard]] long long integer_or(const std::string& s, const std::string& k, long long dflt) const
    {
        const Entry* e = find(s, k);
        if (!e) return dflt;
        std::size_t pos = 0;
        long long v = 0;
        try {
            v = std::stoll(e->value, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        require(pos == e->value.size() && pos > 0, where(*e) + ": '" + k + "' expects an integer", ErrorKind::parse);
        return v;
    }

    void set(const std::string& s, const std::string& k, const std::string& v)
    {
        require(config_schema().count(s) && config_schema().at(s).count(k), "unknown key '" + k + "' in [" + s + "]",
                ErrorKind::parse);
        Section* sec = find_section(s);
        if (!sec) {
            sections_.push_back({s, {}, 0});
            sec = &sections_.back();
        }
        for (auto& e : sec->entries)
            if (e.key == k) {
                e.value = v;
                return;
            }
        sec->entries.push_back({k, v, 0});
    }

    // Path of a file key, relative to the config's directory.
    [[nodiscard]] std::string path(const std::string& s, const std::string& k) const
    {
        const std::string v = required(s, k);
        const std::filesystem::path p(v);
        if (p.is_absolute() || base_dir_.empty()) return v;
        return (std::filesystem::path(base_dir_) / p).string();
    }

    [[nodiscard]] std::string where(const Entry& e) const { return source_ + ":" + std::to_string(e.line); }
    [[nodiscard]] const std::string& source() const { return source_; }
    [[nodiscard]] const std::vector<Section>& sections() const { return sections_; }

    [[nodiscard]] const Entry* find(const std::string& s, const std::string& k) const
    {
        const Section* sec = find_section(s);
        if (!sec) return nullptr;
        for (const auto& e : sec->entries)
            if (e.key == k) return &e;
        return nullptr;
    }

private:
    [[nodiscard]] const Section* find_section(const std::string& s) const
    {
        for (const auto& sec : sections_)
            if (sec.name == s) return &sec;
        return nullptr;
    }
    Section* find_section(const std::string& s)
    {
        for (auto& sec : sections_)
            if (sec.name == s) return &sec;
        return nullptr;
    }

    [[nodiscard]] double to_number(const Entry& e) const
    {
        try {
            const Expr ex = Expr::parse(e.value);
            require(ex.is_constant(), "not a constant", ErrorKind::parse);
            return ex(0.0, 0.0);
        } catch (const Error&) {
            throw Error(ErrorKind::parse, where(e) + ": '" + e.key + "' expects a number, got '" + e.value + "'");
        }
    }

    void check_files() const
    {
        for (const auto& [s, k] : {std::pair{"spacetime", "beta_file"}, {"spacetime", "gamma_file"}, {"sources", "file"}})
            if (const Entry* e = find(s, k))
                require(std::filesystem::exists(path(s, k)), where(*e) + ": referenced file '" + e->value +
                                                                 "' does not exist",
                        ErrorKind::io);
    }

    std::string source_ = "<config>";
    std::string base_dir_;
    std::vector<Section> sections_;
};

// ---------------------------------------------------------------- builders

inline ScalarField metric_field(const Config& c, const std::string& name)
{
    const std::string expr_key = name + "_expr", file_key = name + "_file";
    const bool has_expr = c.has("spacetime", expr_key), has_file = c.has("spacetime", file_key);
    require(!(has_expr && has_file), c.source() + ": set either " + expr_key + " or " + file_key, ErrorKind::parse);
    if (has_file) {
        const Section s = read_gh1<double>(c.path("spacetime", file_key));
        require(s.rank == 1, file_key + " must hold a scalar section", ErrorKind::parse);
        SampledScalar sm;
        sm.nt = s.grid.nt;
        sm.nx = s.grid.nx;
        sm.t0 = s.grid.t(0);
        sm.dt = s.grid.dt;
        sm.x0 = s.grid.x(0);
        sm.dx = s.grid.dx;
        sm.values = s.values;
        return ScalarField::sampled(std::move(sm), c.required("spacetime", file_key));
    }
    if (!has_expr) return 1.0;
    const Config::Entry* e = c.find("spacetime", expr_key);
    try {
        return ScalarField::expression(e->value);
    } catch (const Error& err) {
        throw Error(ErrorKind::parse, c.where(*e) + ": " + err.what());
    }
}

inline ProductSpacetime spacetime_from(const Config& c)
{
    const std::string topo = c.string_or("spacetime", "topology", "line");
    const double t0 = c.number("spacetime", "t_min"), t1 = c.number("spacetime", "t_max");
    const double x0 = c.number("spacetime", "x_min");
    if (topo == "line")
        return {Topology::line, t0, t1, x0, c.number("spacetime", "x_max"), metric_field(c, "beta"),
                metric_field(c, "gamma")};
    require(topo == "circle", c.source() + ": topology must be line or circle", ErrorKind::parse);
    return {Topology::circle, t0, t1, x0, c.number("spacetime", "circumference"), metric_field(c, "beta"),
            metric_field(c, "gamma")};
}

// Largest characteristic speed sampled on a coarse lattice.
inline double max_char_speed(const ProductSpacetime& st)
{
    double v = 0;
    const int n = 33;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            const double t = st.t_min() + (st.t_max() - st.t_min()) * a / (n - 1);
            const double x = st.x_min() + (st.x_max() - st.x_min()) * b / (n - 1);
            v = std::max(v, st.speed_unchecked(t, x));
        }
    return v;
}

// Explicit (t0, dt, x0, dx) or a window fit from nt, nx; without nt the
// time step follows from cfl.
inline Grid grid_from(const Config& c, const ProductSpacetime& st, int refine = 0)
{
    const long long nx0 = c.integer_or("grid", "nx", 0);
    require(nx0 >= 2, c.source() + ": [grid] nx must be at least 2", ErrorKind::parse);
    const int scale = 1 << refine;
    const bool circle = st.topology() == Topology::circle;
    if (c.has("grid", "dt") || c.has("grid", "dx")) {
        require(refine == 0, "refinement needs a window-fit grid (drop dt/dx)", ErrorKind::invalid_argument);
        const long long nt = c.integer_or("grid", "nt", 0);
        require(nt >= 1, c.source() + ": [grid] nt is required with explicit steps", ErrorKind::parse);
        Grid g = Grid::make(static_cast<int>(nt), static_cast<int>(nx0), c.number_or("grid", "t0", st.t_min()),
                            c.number("grid", "dt"), c.number_or("grid", "x0", st.x_min()), c.number("grid", "dx"),
                            st.topology());
        require(st.contains(g.t(0), g.x(0), 1e-9) && st.contains(g.t_last(), g.x_last(), 1e-9),
                c.source() + ": grid leaves the spacetime domain", ErrorKind::parse);
        return g;
    }
    const int nx = circle ? static_cast<int>(nx0) * scale : static_cast<int>(nx0 - 1) * scale + 1;
    const double dx = circle ? st.circumference() / nx : (st.x_max() - st.x_min()) / (nx - 1);
    int nt = 0;
    if (c.has("grid", "nt")) {
        nt = static_cast<int>(c.integer_or("grid", "nt", 0) - 1) * scale + 1;
    } else {
        const double cfl = c.number_or("grid", "cfl", 0.8);
        nt = static_cast<int>(std::ceil((st.t_max() - st.t_min()) * max_char_speed(st) / (cfl * dx) - 1e-9)) + 1;
    }
    require(nt >= 2, c.source() + ": [grid] nt must be at least 2", ErrorKind::parse);
    if (circle) return Grid::circle(st.t_min(), st.t_max(), nt, st.x_min(), st.circumference(), nx);
    return Grid::window(st.t_min(), st.t_max(), nt, st.x_min(), st.x_max(), nx);
}

inline SolveOptions solve_options_from(const Config& c)
{
    SolveOptions o;
    if (auto s = c.get("grid", "scheme")) o.scheme = parse_scheme(*s);
    o.cfl = c.number_or("grid", "cfl", o.cfl);
    o.dissipation = c.number_or("grid", "dissipation", o.dissipation);
    return o;
}

namespace detail {

template <class T>
MatrixField<T> matrix_from(const Config& c, const std::string& key, int rank, bool required_key)
{
    const Config::Entry* e = c.find("system", key);
    if (!e) {
        require(!required_key, c.source() + ": missing key '" + key + "' in [system]", ErrorKind::parse);
        return MatrixField<T>::zero(rank, rank);
    }
    std::vector<std::string> re, im;
    bool any_im = false;
    for (const auto& part : split(e->value, ';')) {
        const auto ri = split(part, '|');
        if (ri.size() > 2 || ri[0].empty())
            throw Error(ErrorKind::parse, c.where(*e) + ": malformed matrix entry '" + part + "'");
        re.push_back(ri[0]);
        im.push_back(ri.size() == 2 ? ri[1] : "0");
        any_im = any_im || ri.size() == 2;
    }
    if (static_cast<int>(re.size()) != rank * rank)
        throw Error(ErrorKind::parse, c.where(*e) + ": " + key + " needs " + std::to_string(rank * rank) +
                                          " entries, got " + std::to_string(re.size()));
    if (any_im && !is_complex_v<T>)
        throw Error(ErrorKind::parse, c.where(*e) + ": imaginary entries need field = complex");
    try {
        if constexpr (is_complex_v<T>) return MatrixField<T>::expressions(rank, rank, re, im);
        else return MatrixField<T>::expressions(rank, rank, re);
    } catch (const Error& err) {
        throw Error(ErrorKind::parse, c.where(*e) + ": " + err.what());
    }
}

} // namespace detail

inline bool system_is_complex(const Config& c) { return c.string_or("system", "field", "real") == "complex"; }

// Custom system from the [system] section (preset unset).
template <class T = double>
FirstOrderSystem<T> system_from(const Config& c)
{
    const long long rank = c.integer_or("system", "rank", 0);
    require(rank >= 1, c.source() + ": [system] rank must be positive", ErrorKind::parse);
    const int n = static_cast<int>(rank);
    auto a0 = detail::matrix_from<T>(c, "a0_expr", n, true);
    auto a1 = detail::matrix_from<T>(c, "a1_expr", n, true);
    auto b = detail::matrix_from<T>(c, "b_expr", n, false);
    std::optional<Mat<T>> h;
    if (const Config::Entry* e = c.find("system", "fiber_metric")) {
        const auto parts = detail::split(e->value, ';');
        require(static_cast<int>(parts.size()) == n * n, c.where(*e) + ": fiber_metric needs " +
                                                             std::to_string(n * n) + " entries",
                ErrorKind::parse);
        Mat<T> m(n, n);
        for (int k = 0; k < n * n; ++k) {
            const auto ri = detail::split(parts[k], '|');
            const Expr re = Expr::parse(ri[0]);
            require(re.is_constant() && ri.size() <= 2, c.where(*e) + ": fiber_metric entries must be numbers",
                    ErrorKind::parse);
            if constexpr (is_complex_v<T>) {
                const double imv = ri.size() == 2 ? Expr::parse(ri[1])(0.0, 0.0) : 0.0;
                m(k / n, k % n) = T(re(0.0, 0.0), imv);
            } else {
                require(ri.size() == 1, c.where(*e) + ": imaginary entries need field = complex", ErrorKind::parse);
                m(k / n, k % n) = re(0.0, 0.0);
            }
        }
        h = m;
    }
    return FirstOrderSystem<T>::make("custom", a0, a1, b, h);
}

} // namespace greenhyp
