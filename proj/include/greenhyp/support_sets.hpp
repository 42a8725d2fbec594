#pragma once

// Closed polyhedral subsets of 1+1 Minkowski space (coordinates (t,x),
// metric -dt^2 + dx^2) and the decision procedures for their support classes.

#include "core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace greenhyp {

inline constexpr double geom_tol = 1e-9;

struct Vec2 {
    double t = 0.0;
    double x = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.t + b.t, a.x + b.x}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.t - b.t, a.x - b.x}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.t, s * a.x}; }
    friend Vec2 operator-(Vec2 a) { return {-a.t, -a.x}; }
};

[[nodiscard]] inline double dot(Vec2 a, Vec2 b) { return a.t * b.t + a.x * b.x; }
[[nodiscard]] inline double cross(Vec2 a, Vec2 b) { return a.t * b.x - a.x * b.t; }
[[nodiscard]] inline double norm(Vec2 a) { return std::hypot(a.t, a.x); }
[[nodiscard]] inline Vec2 perp(Vec2 a) { return {-a.x, a.t}; }
[[nodiscard]] inline Vec2 unit(Vec2 a)
{
    const double n = norm(a);
    return {a.t / n, a.x / n};
}

// Causal character of a direction (within geom_tol).
[[nodiscard]] inline bool is_future_causal(Vec2 d) { return d.t >= std::abs(d.x) - geom_tol; }
[[nodiscard]] inline bool is_past_causal(Vec2 d) { return -d.t >= std::abs(d.x) - geom_tol; }

// {(t,x) : a t + b x <= c}
struct HalfPlane {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;

    HalfPlane() = default;
    HalfPlane(double a_, double b_, double c_) : a(a_), b(b_), c(c_)
    {
        require(a != 0.0 || b != 0.0, "halfplane with zero normal", ErrorKind::invalid_argument);
        require(std::isfinite(a) && std::isfinite(b) && std::isfinite(c), "halfplane with non-finite coefficient",
                ErrorKind::invalid_argument);
    }
    HalfPlane(Vec2 n, double c_) : HalfPlane(n.t, n.x, c_) {}

    [[nodiscard]] Vec2 normal() const { return {a, b}; }
    [[nodiscard]] HalfPlane normalized() const
    {
        const double n = std::hypot(a, b);
        return {a / n, b / n, c / n};
    }
    // Signed violation, in units of the normal length.
    [[nodiscard]] double excess(Vec2 p) const { return (a * p.t + b * p.x - c) / std::hypot(a, b); }
    [[nodiscard]] bool contains(Vec2 p, double tol = geom_tol) const { return excess(p) <= tol; }
};

// Closed convex polyhedral cone of directions, stored as a union of pointed
// wedges (arcs shorter than pi, given by ccw-ordered unit endpoints). A ray is
// a wedge with equal endpoints; the zero cone has no wedges.
class DirCone {
public:
    struct Wedge {
        Vec2 from;
        Vec2 to;
    };

    DirCone() = default;

    static DirCone zero() { return {}; }
    static DirCone plane()
    {
        DirCone c;
        const Vec2 e[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
        for (int i = 0; i < 4; ++i) c.wedges_.push_back({e[i], e[(i + 1) % 4]});
        c.kind_ = Kind::plane;
        return c;
    }
    static DirCone ray(Vec2 d)
    {
        DirCone c;
        d = unit(d);
        c.wedges_.push_back({d, d});
        c.kind_ = Kind::ray;
        return c;
    }
    static DirCone line(Vec2 d)
    {
        DirCone c;
        d = unit(d);
        c.wedges_.push_back({d, d});
        c.wedges_.push_back({-d, -d});
        c.kind_ = Kind::line;
        return c;
    }
    // {d : n.d <= 0}
    static DirCone halfplane(Vec2 n)
    {
        DirCone c;
        n = unit(n);
        const Vec2 p = perp(n); // ccw from p through -n to -p
        c.wedges_.push_back({p, -n});
        c.wedges_.push_back({-n, -p});
        c.kind_ = Kind::halfplane;
        return c;
    }
    static DirCone wedge(Vec2 a, Vec2 b)
    {
        a = unit(a);
        b = unit(b);
        if (cross(a, b) < 0) std::swap(a, b);
        DirCone c;
        c.wedges_.push_back({a, b});
        c.kind_ = Kind::wedge;
        return c;
    }

    // Solutions d of n_i . d <= 0 for all i. Exact case analysis in 2D:
    // the boundary rays of the cone are among the +-perp(n_i).
    static DirCone from_normals(const std::vector<Vec2>& normals_in)
    {
        std::vector<Vec2> normals;
        for (Vec2 n : normals_in) normals.push_back(unit(n));
        if (normals.empty()) return plane();

        bool all_parallel = true;
        for (Vec2 n : normals)
            if (std::abs(cross(n, normals[0])) > geom_tol) all_parallel = false;
        if (all_parallel) {
            bool same_sense = true;
            for (Vec2 n : normals)
                if (dot(n, normals[0]) < 0) same_sense = false;
            if (same_sense) return halfplane(normals[0]);
            return line(perp(normals[0]));
        }

        auto feasible = [&](Vec2 d) {
            for (Vec2 n : normals)
                if (dot(n, d) > geom_tol) return false;
            return true;
        };
        std::vector<Vec2> cand;
        for (Vec2 n : normals) {
            for (Vec2 d : {perp(n), -perp(n)}) {
                if (!feasible(d)) continue;
                bool dup = false;
                for (Vec2 e : cand)
                    if (norm(e - d) < 1e-7) dup = true;
                if (!dup) cand.push_back(d);
            }
        }
        if (cand.empty()) return zero();
        if (cand.size() == 1) return ray(cand[0]);
        // Pointed wedge (normals span the plane): its extreme rays are the
        // candidate pair with the widest angle.
        std::size_t bi = 0, bj = 1;
        double best = -2.0;
        for (std::size_t i = 0; i < cand.size(); ++i)
            for (std::size_t j = i + 1; j < cand.size(); ++j) {
                const double ang = std::atan2(std::abs(cross(cand[i], cand[j])), dot(cand[i], cand[j]));
                if (ang > best) {
                    best = ang;
                    bi = i;
                    bj = j;
                }
            }
        if (best < 1e-9) return ray(cand[bi]);
        return wedge(cand[bi], cand[bj]);
    }

    [[nodiscard]] bool is_zero() const { return wedges_.empty(); }
    [[nodiscard]] const std::vector<Wedge>& wedges() const { return wedges_; }

    // Unit generators: every wedge endpoint, deduplicated.
    [[nodiscard]] std::vector<Vec2> generators() const
    {
        std::vector<Vec2> g;
        for (const Wedge& w : wedges_)
            for (Vec2 d : {w.from, w.to}) {
                bool dup = false;
                for (Vec2 e : g)
                    if (norm(e - d) < 1e-12) dup = true;
                if (!dup) g.push_back(d);
            }
        return g;
    }

    [[nodiscard]] bool contains(Vec2 d) const
    {
        if (norm(d) == 0.0) return true;
        d = unit(d);
        for (const Wedge& w : wedges_)
            if (in_wedge(w, d)) return true;
        return false;
    }

    // True when the two cones share a nonzero direction.
    [[nodiscard]] bool meets(const DirCone& other) const
    {
        for (const Wedge& a : wedges_)
            for (const Wedge& b : other.wedges_)
                if (in_wedge(b, a.from) || in_wedge(b, a.to) || in_wedge(a, b.from) || in_wedge(a, b.to))
                    return true;
        return false;
    }

    // Containment in a convex cone: every generator is a member.
    [[nodiscard]] bool subset_of(const DirCone& convex) const
    {
        for (Vec2 g : generators())
            if (!convex.contains(g)) return false;
        return true;
    }

    // Every direction is causal (future or past). Each wedge must lie in one
    // of the two causal cones, since a wedge joining them crosses spacelike
    // directions.
    [[nodiscard]] bool all_causal() const
    {
        for (const Wedge& w : wedges_) {
            const bool fut = is_future_causal(w.from) && is_future_causal(w.to);
            const bool past = is_past_causal(w.from) && is_past_causal(w.to);
            if (!fut && !past) return false;
        }
        return true;
    }

    static const DirCone& future_causal()
    {
        static const DirCone c = wedge({1, -1}, {1, 1});
        return c;
    }
    static const DirCone& past_causal()
    {
        static const DirCone c = wedge({-1, 1}, {-1, -1});
        return c;
    }

private:
    enum class Kind { zero, ray, line, wedge, halfplane, plane };

    static bool in_wedge(const Wedge& w, Vec2 d)
    {
        if (cross(w.from, d) < -geom_tol || cross(d, w.to) < -geom_tol) return false;
        const Vec2 mid = w.from + w.to;
        if (norm(mid) < 1e-12) return false; // not produced by construction
        return dot(d, unit(mid)) > 0.0;
    }

    std::vector<Wedge> wedges_;
    Kind kind_ = Kind::zero;
};

inline DirCone recession_cone_of_halfplanes(const std::vector<HalfPlane>& hs)
{
    std::vector<Vec2> normals;
    normals.reserve(hs.size());
    for (const HalfPlane& h : hs) normals.push_back(h.normal());
    return DirCone::from_normals(normals);
}

// Convex polyhedron given by halfplanes, with its vertex/ray/line
// representation derived at construction.
class ConvexPiece {
public:
    ConvexPiece() : ConvexPiece(std::vector<HalfPlane>{}) {}
    explicit ConvexPiece(std::vector<HalfPlane> hs) : halfplanes_(std::move(hs))
    {
        for (const HalfPlane& h : halfplanes_) norm_.push_back(h.normalized());
        derive();
    }

    static ConvexPiece point(Vec2 p)
    {
        return ConvexPiece({{1, 0, p.t}, {-1, 0, -p.t}, {0, 1, p.x}, {0, -1, -p.x}});
    }
    static ConvexPiece box(double t0, double t1, double x0, double x1)
    {
        return ConvexPiece({{1, 0, t1}, {-1, 0, -t0}, {0, 1, x1}, {0, -1, -x0}});
    }

    [[nodiscard]] const std::vector<HalfPlane>& halfplanes() const { return halfplanes_; }
    [[nodiscard]] bool empty() const { return empty_; }
    [[nodiscard]] const std::vector<Vec2>& vertices() const { return vertices_; }
    [[nodiscard]] const std::vector<Vec2>& rays() const { return rays_; }
    [[nodiscard]] const std::vector<Vec2>& lines() const { return lines_; }

    [[nodiscard]] const DirCone& recession() const
    {
        require(!empty_, "empty piece");
        return cone_;
    }

    [[nodiscard]] bool contains(Vec2 p, double tol = geom_tol) const
    {
        for (const HalfPlane& h : norm_)
            if (h.a * p.t + h.b * p.x - h.c > tol) return false;
        return true;
    }

    [[nodiscard]] ConvexPiece intersect(const ConvexPiece& o) const
    {
        std::vector<HalfPlane> hs = halfplanes_;
        hs.insert(hs.end(), o.halfplanes_.begin(), o.halfplanes_.end());
        return ConvexPiece(std::move(hs));
    }

    // Minkowski sum with the cone spanned by extra rays: rebuild the
    // inequalities from the vertex/ray/line representation.
    [[nodiscard]] ConvexPiece sum_with_rays(const std::vector<Vec2>& extra) const
    {
        require(!empty_, "empty piece");
        std::vector<Vec2> rays = rays_;
        for (Vec2 r : extra) rays.push_back(unit(r));
        return from_vrep(vertices_, rays, lines_);
    }

    static ConvexPiece from_vrep(const std::vector<Vec2>& verts, const std::vector<Vec2>& rays,
                                 const std::vector<Vec2>& lines)
    {
        std::vector<Vec2> dirs;
        for (std::size_t i = 0; i < verts.size(); ++i)
            for (std::size_t j = i + 1; j < verts.size(); ++j)
                if (norm(verts[i] - verts[j]) > 1e-12) dirs.push_back(unit(verts[i] - verts[j]));
        for (Vec2 r : rays) dirs.push_back(unit(r));
        for (Vec2 l : lines) dirs.push_back(unit(l));
        dirs.push_back({1, 0});
        dirs.push_back({0, 1});

        std::vector<Vec2> cands;
        for (Vec2 d : dirs)
            for (Vec2 n : {perp(d), -perp(d), d, -d}) cands.push_back(n);

        std::vector<HalfPlane> hs;
        std::vector<Vec2> kept;
        for (Vec2 n : cands) {
            bool ok = true;
            for (Vec2 r : rays)
                if (dot(n, r) > geom_tol) ok = false;
            for (Vec2 l : lines)
                if (std::abs(dot(n, l)) > geom_tol) ok = false;
            if (!ok) continue;
            bool dup = false;
            for (Vec2 k : kept)
                if (norm(k - n) < 1e-12) dup = true;
            if (dup) continue;
            double c = -std::numeric_limits<double>::infinity();
            for (Vec2 v : verts) c = std::max(c, dot(n, v));
            kept.push_back(n);
            hs.emplace_back(n, c);
        }
        return ConvexPiece(std::move(hs));
    }

private:
    void derive()
    {
        const std::size_t m = norm_.size();
        if (m == 0) {
            empty_ = false;
            vertices_ = {{0, 0}};
            lines_ = {{1, 0}, {0, 1}};
            cone_ = DirCone::plane();
            return;
        }
        bool all_parallel = true;
        for (const HalfPlane& h : norm_)
            if (std::abs(cross(h.normal(), norm_[0].normal())) > geom_tol) all_parallel = false;

        if (all_parallel) {
            // 1D problem along n: lo <= s <= hi with s = n.p
            const Vec2 n = norm_[0].normal();
            double lo = -std::numeric_limits<double>::infinity();
            double hi = std::numeric_limits<double>::infinity();
            for (const HalfPlane& h : norm_) {
                if (dot(h.normal(), n) > 0) hi = std::min(hi, h.c);
                else lo = std::max(lo, -h.c);
            }
            if (lo > hi + geom_tol) {
                empty_ = true;
                return;
            }
            empty_ = false;
            if (lo > hi) lo = hi;
            lines_ = {perp(n)};
            if (std::isfinite(hi)) vertices_.push_back(hi * n);
            if (std::isfinite(lo) && (!std::isfinite(hi) || hi - lo > 1e-12)) vertices_.push_back(lo * n);
            if (!std::isfinite(lo)) rays_.push_back(-n);
            if (!std::isfinite(hi)) rays_.push_back(n);
            cone_ = recession_cone_of_halfplanes(halfplanes_);
            return;
        }

        // Pointed polyhedron: nonempty iff some pair of tight constraints
        // meets at a feasible point.
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i + 1; j < m; ++j) {
                const HalfPlane& p = norm_[i];
                const HalfPlane& q = norm_[j];
                const double det = p.a * q.b - p.b * q.a;
                if (std::abs(det) <= geom_tol) continue;
                const Vec2 v{(p.c * q.b - p.b * q.c) / det, (p.a * q.c - p.c * q.a) / det};
                if (!contains(v)) continue;
                bool dup = false;
                for (Vec2 w : vertices_)
                    if (norm(w - v) < 1e-9 * std::max(1.0, norm(v))) dup = true;
                if (!dup) vertices_.push_back(v);
            }
        empty_ = vertices_.empty();
        if (empty_) return;
        std::sort(vertices_.begin(), vertices_.end(),
                  [](Vec2 a, Vec2 b) { return a.t < b.t || (a.t == b.t && a.x < b.x); });
        cone_ = recession_cone_of_halfplanes(halfplanes_);
        for (Vec2 g : cone_.generators()) rays_.push_back(g);
    }

    std::vector<HalfPlane> halfplanes_;
    std::vector<HalfPlane> norm_;
    bool empty_ = true;
    std::vector<Vec2> vertices_;
    std::vector<Vec2> rays_;
    std::vector<Vec2> lines_;
    DirCone cone_;
};

inline DirCone recession_cone(const ConvexPiece& piece)
{
    require(!piece.empty(), "empty piece");
    return piece.recession();
}

struct SupportClass {
    bool compact = false;
    bool spc = false;
    bool sfc = false;
    bool sc = false;
    bool pc = false;
    bool fc = false;
    bool tc = false;

    static SupportClass all() { return {true, true, true, true, true, true, true}; }

    // Diagram-1 implications.
    [[nodiscard]] bool consistent() const
    {
        auto implies = [](bool a, bool b) { return !a || b; };
        return implies(compact, spc && sfc) && implies(spc, sc && pc) && implies(sfc, sc && fc) &&
               implies(tc, pc && fc) && tc == (pc && fc);
    }

    [[nodiscard]] std::array<bool, 7> flags() const { return {compact, spc, sfc, sc, pc, fc, tc}; }

    friend bool operator==(const SupportClass& a, const SupportClass& b) { return a.flags() == b.flags(); }

    [[nodiscard]] std::string csv() const
    {
        std::string s;
        for (bool f : flags()) {
            if (!s.empty()) s += ',';
            s += f ? '1' : '0';
        }
        return s;
    }
};

inline const char* support_header() { return "compact,spc,sfc,sc,pc,fc,tc"; }

// Finite union of nonempty convex pieces. Empty input pieces are dropped.
class PLSet {
public:
    PLSet() = default;
    explicit PLSet(std::vector<ConvexPiece> pieces)
    {
        for (ConvexPiece& p : pieces)
            if (!p.empty()) pieces_.push_back(std::move(p));
    }
    PLSet(std::initializer_list<ConvexPiece> pieces) : PLSet(std::vector<ConvexPiece>(pieces)) {}
    static PLSet single(std::vector<HalfPlane> hs) { return PLSet({ConvexPiece(std::move(hs))}); }

    [[nodiscard]] const std::vector<ConvexPiece>& pieces() const { return pieces_; }
    [[nodiscard]] bool empty() const { return pieces_.empty(); }

    [[nodiscard]] bool contains(Vec2 p, double tol = geom_tol) const
    {
        for (const ConvexPiece& c : pieces_)
            if (c.contains(p, tol)) return true;
        return false;
    }

    [[nodiscard]] PLSet unite(const PLSet& o) const
    {
        std::vector<ConvexPiece> ps = pieces_;
        ps.insert(ps.end(), o.pieces_.begin(), o.pieces_.end());
        return PLSet(std::move(ps));
    }

    [[nodiscard]] PLSet intersect(const PLSet& o) const
    {
        std::vector<ConvexPiece> ps;
        for (const ConvexPiece& a : pieces_)
            for (const ConvexPiece& b : o.pieces_) ps.push_back(a.intersect(b));
        return PLSet(std::move(ps));
    }

    // Reflection t -> -t.
    [[nodiscard]] PLSet time_reversed() const
    {
        std::vector<ConvexPiece> ps;
        for (const ConvexPiece& p : pieces_) {
            std::vector<HalfPlane> hs;
            for (const HalfPlane& h : p.halfplanes()) hs.emplace_back(-h.a, h.b, h.c);
            ps.emplace_back(std::move(hs));
        }
        return PLSet(std::move(ps));
    }

private:
    std::vector<ConvexPiece> pieces_;
};

inline PLSet j_plus(const PLSet& a)
{
    std::vector<ConvexPiece> out;
    const std::vector<Vec2> future{unit({1, 1}), unit({1, -1})};
    for (const ConvexPiece& p : a.pieces()) out.push_back(p.sum_with_rays(future));
    return PLSet(std::move(out));
}

inline PLSet j_minus(const PLSet& a)
{
    std::vector<ConvexPiece> out;
    const std::vector<Vec2> past{unit({-1, 1}), unit({-1, -1})};
    for (const ConvexPiece& p : a.pieces()) out.push_back(p.sum_with_rays(past));
    return PLSet(std::move(out));
}

// Rule-based classification. For a convex piece with recession cone K:
//   A cap J^-(x) is compact for all x  iff  K meets {dt <= -|dx|} only at 0,
// since along a direction outside the past cone t + |x| (resp. t - |x|)
// increases without bound on every ray, and inside it a ray stays in J^-(x).
// A piece lies in J^+(K0) for compact K0 iff K is inside the future cone
// (piece = conv(V) + K), and in J(K0) iff every direction of K is causal.
inline SupportClass classify(const PLSet& a)
{
    require(!a.empty(), "classify of empty set", ErrorKind::invalid_argument);
    SupportClass c = SupportClass::all();
    for (const ConvexPiece& p : a.pieces()) {
        const DirCone& k = p.recession();
        c.compact = c.compact && k.is_zero();
        c.pc = c.pc && !k.meets(DirCone::past_causal());
        c.fc = c.fc && !k.meets(DirCone::future_causal());
        c.spc = c.spc && k.subset_of(DirCone::future_causal());
        c.sfc = c.sfc && k.subset_of(DirCone::past_causal());
        c.sc = c.sc && k.all_causal();
    }
    c.tc = c.pc && c.fc;
    return c;
}

// A cap B compact: every nonempty pairwise piece intersection has zero
// recession cone (which is the intersection of the two cones).
inline bool intersection_compact(const PLSet& a, const PLSet& b)
{
    for (const ConvexPiece& p : a.pieces())
        for (const ConvexPiece& q : b.pieces()) {
            const ConvexPiece r = p.intersect(q);
            if (!r.empty() && !r.recession().is_zero()) return false;
        }
    return true;
}

// Q subset of the union of R_k: no choice of one violated inequality per R_k
// is feasible together with Q.
inline bool piece_subset_of_union(const ConvexPiece& q, const std::vector<ConvexPiece>& rs, double eps = 1e-7)
{
    if (q.empty()) return true;
    std::vector<std::size_t> idx(rs.size(), 0);
    for (const ConvexPiece& r : rs)
        if (r.halfplanes().empty()) return true;
    for (;;) {
        std::vector<HalfPlane> hs = q.halfplanes();
        for (std::size_t k = 0; k < rs.size(); ++k) {
            const HalfPlane h = rs[k].halfplanes()[idx[k]].normalized();
            hs.emplace_back(-h.a, -h.b, -h.c - eps);
        }
        if (!ConvexPiece(std::move(hs)).empty()) return false;
        std::size_t k = 0;
        for (; k < rs.size(); ++k) {
            if (++idx[k] < rs[k].halfplanes().size()) break;
            idx[k] = 0;
        }
        if (k == rs.size()) return true;
    }
}

inline bool subset(const PLSet& a, const PLSet& b)
{
    for (const ConvexPiece& p : a.pieces())
        if (!piece_subset_of_union(p, b.pieces())) return false;
    return true;
}

inline bool set_equal(const PLSet& a, const PLSet& b) { return subset(a, b) && subset(b, a); }

// ---------------------------------------------------------------- duality

enum class DualityClause { pc, fc, tc, spc, sfc, sc };

inline const char* clause_name(DualityClause c)
{
    switch (c) {
    case DualityClause::pc: return "pc";
    case DualityClause::fc: return "fc";
    case DualityClause::tc: return "tc";
    case DualityClause::spc: return "spc";
    case DualityClause::sfc: return "sfc";
    case DualityClause::sc: return "sc";
    }
    return "?";
}

inline std::vector<DualityClause> all_clauses()
{
    return {DualityClause::pc, DualityClause::fc, DualityClause::tc,
            DualityClause::spc, DualityClause::sfc, DualityClause::sc};
}

inline bool flag_for(const SupportClass& s, DualityClause c)
{
    switch (c) {
    case DualityClause::pc: return s.pc;
    case DualityClause::fc: return s.fc;
    case DualityClause::tc: return s.tc;
    case DualityClause::spc: return s.spc;
    case DualityClause::sfc: return s.sfc;
    case DualityClause::sc: return s.sc;
    }
    return false;
}

// The class the family members must carry for each clause.
inline bool dual_flag_for(const SupportClass& s, DualityClause c)
{
    switch (c) {
    case DualityClause::pc: return s.sfc;
    case DualityClause::fc: return s.spc;
    case DualityClause::tc: return s.sc;
    case DualityClause::spc: return s.fc;
    case DualityClause::sfc: return s.pc;
    case DualityClause::sc: return s.tc;
    }
    return false;
}

class DualityFamilyError : public Error {
public:
    DualityFamilyError(std::size_t index, const std::string& what)
        : Error(ErrorKind::invalid_argument, what), index_(index) {}
    [[nodiscard]] std::size_t index() const { return index_; }

private:
    std::size_t index_;
};

struct DualityReport {
    DualityClause clause = DualityClause::pc;
    bool rule_flag = false;
    bool family_flag = false;
    std::optional<std::size_t> witness; // first member with noncompact intersection

    [[nodiscard]] bool agree() const { return rule_flag == family_flag; }
};

inline DualityReport check_duality(const PLSet& a, DualityClause clause, const std::vector<PLSet>& family)
{
    for (std::size_t i = 0; i < family.size(); ++i) {
        if (family[i].empty() || !dual_flag_for(classify(family[i]), clause))
            throw DualityFamilyError(i, std::string("family member ") + std::to_string(i) +
                                            " does not carry the dual class of clause " + clause_name(clause));
    }
    DualityReport r;
    r.clause = clause;
    r.rule_flag = flag_for(classify(a), clause);
    r.family_flag = true;
    for (std::size_t i = 0; i < family.size(); ++i)
        if (!intersection_compact(a, family[i])) {
            r.family_flag = false;
            r.witness = i;
            break;
        }
    return r;
}

inline PLSet future_cone(Vec2 p) { return PLSet::single({{-1, 1, -p.t + p.x}, {-1, -1, -p.t - p.x}}); }
inline PLSet past_cone(Vec2 p) { return PLSet::single({{1, 1, p.t + p.x}, {1, -1, p.t - p.x}}); }

// Generator families of the dual class. Sized for sets meeting the box
// [-10,10]^2 whose boundary normals avoid the open 15-degree neighbourhood
// of the null directions (see corpus.hpp); 50 members each by default.
inline std::vector<PLSet> duality_family(DualityClause clause, std::size_t size = 50)
{
    std::vector<PLSet> fam;
    auto grid_points = [](std::vector<Vec2>& pts, double t0, int n) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                pts.push_back({t0 + 10.0 * (i - (n - 1) / 2.0), 10.0 * (j - (n - 1) / 2.0)});
    };
    std::vector<Vec2> pts;
    grid_points(pts, 0.0, 7);

    switch (clause) {
    case DualityClause::pc:
        fam.push_back(past_cone({40, 0}));
        for (Vec2 p : pts) fam.push_back(past_cone(p));
        break;
    case DualityClause::fc:
        fam.push_back(future_cone({-40, 0}));
        for (Vec2 p : pts) fam.push_back(future_cone(p));
        break;
    case DualityClause::tc:
        fam.push_back(past_cone({40, 0}));
        fam.push_back(future_cone({-40, 0}));
        for (int k = 0; fam.size() < size; ++k) {
            const double w = 1.0 + (k % 8);
            const double x0 = -20.0 + 5.0 * (k / 8);
            if (k % 3 == 0) fam.push_back(PLSet::single({{0, 1, x0 + w}, {0, -1, -(x0 - w)}}));
            else if (k % 3 == 1) fam.push_back(past_cone({10.0 + k, x0}));
            else fam.push_back(future_cone({-10.0 - k, x0}));
        }
        break;
    case DualityClause::spc: {
        for (double s : {40.0, 0.0, -20.0}) {
            fam.push_back(PLSet::single({{1, 0, s}}));
            fam.push_back(PLSet::single({{1, -0.9, s}}));
            fam.push_back(PLSet::single({{1, 0.9, s}}));
        }
        for (Vec2 p : pts) {
            if (fam.size() >= size) break;
            fam.push_back(past_cone(p));
        }
        break;
    }
    case DualityClause::sfc: {
        for (double s : {40.0, 0.0, -20.0}) {
            fam.push_back(PLSet::single({{-1, 0, s}}));
            fam.push_back(PLSet::single({{-1, -0.9, s}}));
            fam.push_back(PLSet::single({{-1, 0.9, s}}));
        }
        for (Vec2 p : pts) {
            if (fam.size() >= size) break;
            fam.push_back(future_cone(p));
        }
        break;
    }
    case DualityClause::sc: {
        const double slopes[] = {0.0, std::tan(pi / 12), -std::tan(pi / 12), std::tan(pi / 6), -std::tan(pi / 6)};
        for (double k : slopes) {
            // |t - k x| <= 40
            fam.push_back(PLSet::single({{1, -k, 40}, {-1, k, 40}}));
        }
        for (int i = 0; fam.size() < size; ++i) {
            const double k = slopes[i % 5];
            const double w = 2.0 + i;
            const double s = -10.0 + 2.0 * i;
            if (i % 2 == 0) fam.push_back(PLSet::single({{1, -k, s + w}, {-1, k, -(s - w)}}));
            else fam.push_back(PLSet::single({{1, 0, s + 2}, {-1, 0, -s}, {0, 1, 3.0 * i}, {0, -1, 3.0 * i}}));
        }
        break;
    }
    }
    if (fam.size() > size) fam.resize(size);
    return fam;
}

// ---------------------------------------------------------------- cylinder

// Closed subset of R x S^1 described by the range of t over it.
struct CylinderSet {
    double t_inf = -std::numeric_limits<double>::infinity();
    double t_sup = std::numeric_limits<double>::infinity();
    bool inf_attained = false;
    bool sup_attained = false;
};

// On R x S^1 a closed set is past compact iff t is bounded below on it,
// which already forces it into J^+ of a compact slice piece.
inline SupportClass classify_cylinder(const CylinderSet& a)
{
    require(!(a.t_inf > a.t_sup), "cylinder set with empty t-range", ErrorKind::invalid_argument);
    SupportClass c;
    const bool below = std::isfinite(a.t_inf);
    const bool above = std::isfinite(a.t_sup);
    c.pc = c.spc = below;
    c.fc = c.sfc = above;
    c.tc = c.compact = below && above;
    c.sc = true;
    return c;
}

// ---------------------------------------------------------------- text I/O

// One piece per block of "a b c" lines; blank lines separate blocks; '#'
// starts a comment.
inline PLSet parse_plset(std::istream& in, const std::string& source = "<input>")
{
    std::vector<ConvexPiece> pieces;
    std::vector<HalfPlane> cur;
    bool in_block = false;
    std::string line;
    int lineno = 0;
    auto flush = [&]() {
        if (in_block) {
            ConvexPiece p(cur);
            pieces.push_back(p);
        }
        cur.clear();
        in_block = false;
    };
    while (std::getline(in, line)) {
        ++lineno;
        const bool blank = line.find_first_not_of(" \t\r") == std::string::npos;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        std::istringstream ls(line);
        std::string tok;
        std::vector<std::string> toks;
        while (ls >> tok) toks.push_back(tok);
        if (toks.empty()) {
            if (blank) flush(); // comment-only lines do not end a block
            continue;
        }
        if (toks.size() != 3)
            throw Error(ErrorKind::parse, source + ":" + std::to_string(lineno) + ": expected 'a b c'");
        double v[3];
        for (int i = 0; i < 3; ++i) {
            try {
                std::size_t used = 0;
                v[i] = std::stod(toks[i], &used);
                if (used != toks[i].size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw Error(ErrorKind::parse, source + ":" + std::to_string(lineno) + ": bad number '" + toks[i] + "'");
            }
        }
        try {
            cur.emplace_back(v[0], v[1], v[2]);
        } catch (const Error& e) {
            throw Error(ErrorKind::parse, source + ":" + std::to_string(lineno) + ": " + e.what());
        }
        in_block = true;
    }
    flush();
    return PLSet(std::move(pieces));
}

inline PLSet parse_plset(const std::string& text)
{
    std::istringstream in(text);
    return parse_plset(in);
}

inline void write_plset(std::ostream& out, const PLSet& a)
{
    bool first = true;
    for (const ConvexPiece& p : a.pieces()) {
        if (!first) out << '\n';
        first = false;
        for (const HalfPlane& h : p.halfplanes())
            out << format_double(h.a) << ' ' << format_double(h.b) << ' ' << format_double(h.c) << '\n';
    }
}

} // namespace greenhyp
