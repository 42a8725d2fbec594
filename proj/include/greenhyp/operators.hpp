#pragma once

// First-order systems P = A0 dt + A1 dx + B on rank-N sections, their
// validation and algebra, and the derived operators built from them.

#include "core.hpp"
#include "expr.hpp"
#include "grid.hpp"
#include "spacetime.hpp"

#include <Eigen/Dense>

#include <complex>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace greenhyp {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
using MatR = Mat<double>;
using MatC = Mat<std::complex<double>>;

template <class T>
inline constexpr bool is_complex_v = !std::is_same_v<T, double>;

// Matrix-valued coefficient field on (t, x).
template <class T>
class MatrixField {
public:
    MatrixField() = default;

    static MatrixField constant(Mat<T> m)
    {
        MatrixField f;
        f.rows_ = static_cast<int>(m.rows());
        f.cols_ = static_cast<int>(m.cols());
        f.const_ = std::make_shared<Mat<T>>(std::move(m));
        return f;
    }
    static MatrixField zero(int r, int c) { return constant(Mat<T>::Zero(r, c)); }
    static MatrixField identity(int n) { return constant(Mat<T>::Identity(n, n)); }

    static MatrixField function(int r, int c, std::function<Mat<T>(double, double)> fn)
    {
        MatrixField f;
        f.rows_ = r;
        f.cols_ = c;
        f.fn_ = std::make_shared<std::function<Mat<T>(double, double)>>(std::move(fn));
        return f;
    }

    // Row-major entry expressions; the optional imaginary parts only for complex fields.
    static MatrixField expressions(int r, int c, const std::vector<std::string>& re,
                                   const std::vector<std::string>& im = {})
    {
        require(static_cast<int>(re.size()) == r * c, "matrix needs " + std::to_string(r * c) + " entries",
                ErrorKind::invalid_argument);
        require(im.empty() || im.size() == re.size(), "imaginary entry count mismatch", ErrorKind::invalid_argument);
        require(im.empty() || is_complex_v<T>, "imaginary entries on a real system", ErrorKind::invalid_argument);
        std::vector<ScalarField> fr, fi;
        bool all_const = true;
        for (const auto& s : re) {
            fr.push_back(ScalarField::expression(s));
            all_const = all_const && fr.back().is_constant();
        }
        for (const auto& s : im) {
            fi.push_back(ScalarField::expression(s));
            all_const = all_const && fi.back().is_constant();
        }
        auto eval = [r, c, fr, fi](double t, double x) {
            Mat<T> m(r, c);
            for (int a = 0; a < r; ++a)
                for (int b = 0; b < c; ++b) {
                    const std::size_t k = static_cast<std::size_t>(a) * c + b;
                    if constexpr (is_complex_v<T>) m(a, b) = T(fr[k](t, x), fi.empty() ? 0.0 : fi[k](t, x));
                    else m(a, b) = fr[k](t, x);
                }
            return m;
        };
        if (all_const) return constant(eval(0.0, 0.0));
        return function(r, c, eval);
    }

    [[nodiscard]] Mat<T> operator()(double t, double x) const { return const_ ? *const_ : (*fn_)(t, x); }
    [[nodiscard]] bool is_constant() const { return static_cast<bool>(const_); }
    [[nodiscard]] const Mat<T>& constant_value() const { return *const_; }
    [[nodiscard]] int rows() const { return rows_; }
    [[nodiscard]] int cols() const { return cols_; }

    // Central differences; exactly zero for constant fields.
    [[nodiscard]] Mat<T> d_dt(double t, double x, double h = 1e-5) const
    {
        if (const_) return Mat<T>::Zero(rows_, cols_);
        return ((*this)(t + h, x) - (*this)(t - h, x)) / (2 * h);
    }
    [[nodiscard]] Mat<T> d_dx(double t, double x, double h = 1e-5) const
    {
        if (const_) return Mat<T>::Zero(rows_, cols_);
        return ((*this)(t, x + h) - (*this)(t, x - h)) / (2 * h);
    }

private:
    int rows_ = 0, cols_ = 0;
    std::shared_ptr<const Mat<T>> const_;
    std::shared_ptr<const std::function<Mat<T>(double, double)>> fn_;
};

template <class T = double>
struct FirstOrderSystem {
    std::string name = "system";
    MatrixField<T> a0, a1, b; // each rank_out x rank_in
    Mat<T> fiber_metric;      // rank_out x rank_out (target bundle)

    [[nodiscard]] int rank_out() const { return a0.rows(); }
    [[nodiscard]] int rank_in() const { return a0.cols(); }
    [[nodiscard]] int rank() const
    {
        require(rank_in() == rank_out(), "system is not square");
        return rank_in();
    }
    [[nodiscard]] bool is_constant() const { return a0.is_constant() && a1.is_constant() && b.is_constant(); }

    // sigma_P(xi_t dt + xi_x dx)
    [[nodiscard]] Mat<T> symbol(double t, double x, double xi_t, double xi_x) const
    {
        return xi_t * a0(t, x) + xi_x * a1(t, x);
    }

    static FirstOrderSystem make(std::string name, MatrixField<T> a0, MatrixField<T> a1, MatrixField<T> b,
                                 std::optional<Mat<T>> h = std::nullopt)
    {
        FirstOrderSystem s;
        s.name = std::move(name);
        s.a0 = std::move(a0);
        s.a1 = std::move(a1);
        s.b = std::move(b);
        require(s.a0.rows() == s.a1.rows() && s.a0.rows() == s.b.rows() && s.a0.cols() == s.a1.cols() &&
                    s.a0.cols() == s.b.cols() && s.a0.rows() > 0 && s.a0.cols() > 0,
                "coefficient shape mismatch", ErrorKind::invalid_argument);
        s.fiber_metric = h ? *h : Mat<T>::Identity(s.a0.rows(), s.a0.rows());
        require(s.fiber_metric.rows() == s.a0.rows() && s.fiber_metric.cols() == s.a0.rows(),
                "fiber metric shape mismatch", ErrorKind::invalid_argument);
        require(std::abs(Eigen::FullPivLU<Mat<T>>(s.fiber_metric).determinant()) > 1e-14,
                "degenerate fiber metric", ErrorKind::invalid_argument);
        return s;
    }

    static FirstOrderSystem constant(std::string name, Mat<T> a0, Mat<T> a1, Mat<T> b,
                                     std::optional<Mat<T>> h = std::nullopt)
    {
        return make(std::move(name), MatrixField<T>::constant(std::move(a0)), MatrixField<T>::constant(std::move(a1)),
                    MatrixField<T>::constant(std::move(b)), std::move(h));
    }

    // Scalar transport dt u + v dx u = 0.
    static FirstOrderSystem transport(double v)
    {
        Mat<T> one = Mat<T>::Identity(1, 1);
        return constant("transport", one, T(v) * one, Mat<T>::Zero(1, 1));
    }
};

// Rectangular operator with fiber metrics on both bundles.
template <class T = double>
struct OperatorPair {
    FirstOrderSystem<T> op; // rank_out = N2, rank_in = N1
    Mat<T> h_in;            // N1 x N1
    Mat<T> h_out;           // N2 x N2
};

// ---------------------------------------------------------------- validation

struct HyperbolicityReport {
    bool valid = true;
    bool hermitian = true;
    double min_eigenvalue = std::numeric_limits<double>::infinity(); // over points and fan
    double hermitian_defect = 0.0;
    double fail_t = 0, fail_x = 0, fail_alpha = 0;
    std::string message;
};

// Covector fan tau = dt + alpha dx with |alpha| <= (1 - 1e-3)/c: 33 evenly
// spaced values, which include the centre alpha = 0.
inline std::vector<double> covector_fan(double c, int count = 33, double rel_margin = 1e-3)
{
    std::vector<double> a;
    const double amax = (1.0 - rel_margin) / c;
    for (int k = 0; k < count; ++k) a.push_back(-amax + 2.0 * amax * k / (count - 1));
    return a;
}

// Positivity of H sigma(tau) on future timelike covectors and hermiticity of
// H A0, H A1, sampled at the grid nodes (every `stride`-th node per axis).
template <class T>
HyperbolicityReport validate_symmetric_hyperbolic(const FirstOrderSystem<T>& sys, const ProductSpacetime& st,
                                                  const Grid& samples, int stride = 1)
{
    require(sys.rank_in() == sys.rank_out(), "shape mismatch: system is not square", ErrorKind::invalid_argument);
    HyperbolicityReport rep;
    const Mat<T>& h = sys.fiber_metric;
    const bool constant = sys.is_constant() && st.constant_metric();
    stride = std::max(1, stride);
    for (int i = 0; i < samples.nt; i += stride)
        for (int j = 0; j < samples.nx; j += stride) {
            const double t = samples.t(i), x = samples.x(j);
            const Mat<T> ha0 = h * sys.a0(t, x);
            const Mat<T> ha1 = h * sys.a1(t, x);
            for (const Mat<T>* m : {&ha0, &ha1}) {
                const double defect = (*m - m->adjoint()).norm();
                const double scale = std::max(1.0, m->norm());
                rep.hermitian_defect = std::max(rep.hermitian_defect, defect / scale);
                if (defect > 1e-10 * scale && rep.hermitian) {
                    rep.hermitian = false;
                    rep.valid = false;
                    rep.fail_t = t;
                    rep.fail_x = x;
                    rep.message = "H*A not Hermitian";
                }
            }
            const double c = st.speed_unchecked(t, x);
            for (double alpha : covector_fan(c)) {
                const Mat<T> s = ha0 + T(alpha) * ha1;
                const Mat<T> herm = 0.5 * (s + s.adjoint());
                Eigen::SelfAdjointEigenSolver<Mat<T>> es(herm, Eigen::EigenvaluesOnly);
                const double lmin = es.eigenvalues().minCoeff();
                Eigen::LLT<Mat<T>> llt(herm);
                const bool pd = llt.info() == Eigen::Success && lmin > 0;
                if (lmin < rep.min_eigenvalue) rep.min_eigenvalue = lmin;
                if (!pd && rep.valid) {
                    rep.valid = false;
                    rep.fail_t = t;
                    rep.fail_x = x;
                    rep.fail_alpha = alpha;
                    rep.message = "H sigma(dt + " + format_short(alpha) + " dx) not positive definite";
                }
            }
            if (constant) return rep;
        }
    return rep;
}

// ---------------------------------------------------------------- algebra

// Formal dual by integration by parts against sqrt(beta gamma) dt dx:
//   tP phi = -(1/w)[dt(w A0^T phi) + dx(w A1^T phi)] + B^T phi.
template <class T>
FirstOrderSystem<T> formal_dual(const FirstOrderSystem<T>& sys, const ProductSpacetime& st)
{
    const int r = sys.rank_in(), c = sys.rank_out();
    const Mat<T> h_inv_t = -sys.fiber_metric.inverse().transpose();
    MatrixField<T> a0, a1, b;
    if (sys.is_constant() && st.constant_metric()) {
        a0 = MatrixField<T>::constant(-sys.a0.constant_value().transpose());
        a1 = MatrixField<T>::constant(-sys.a1.constant_value().transpose());
        b = MatrixField<T>::constant(sys.b.constant_value().transpose());
    } else {
        auto s = sys;
        a0 = MatrixField<T>::function(r, c, [s](double t, double x) -> Mat<T> { return -s.a0(t, x).transpose(); });
        a1 = MatrixField<T>::function(r, c, [s](double t, double x) -> Mat<T> { return -s.a1(t, x).transpose(); });
        b = MatrixField<T>::function(r, c, [s, st](double t, double x) -> Mat<T> {
            const double hh = 1e-5;
            auto wa0 = [&](double tt) -> Mat<T> { return st.volume_density(tt, x) * s.a0(tt, x).transpose(); };
            auto wa1 = [&](double xx) -> Mat<T> { return st.volume_density(t, xx) * s.a1(t, xx).transpose(); };
            const Mat<T> dwa0 = (wa0(t + hh) - wa0(t - hh)) / (2 * hh);
            const Mat<T> dwa1 = (wa1(x + hh) - wa1(x - hh)) / (2 * hh);
            return Mat<T>(s.b(t, x).transpose() - (dwa0 + dwa1) / st.volume_density(t, x));
        });
    }
    FirstOrderSystem<T> d;
    d.name = "dual(" + sys.name + ")";
    d.a0 = a0;
    d.a1 = a1;
    d.b = b;
    // dual bundle metric; only meaningful for square systems
    d.fiber_metric = r == c ? h_inv_t : Mat<T>::Identity(r, r);
    return d;
}

// Formal adjoint with respect to the fiber metrics and sqrt(beta gamma):
//   <g, P f>_{H2} = <P* g, f>_{H1}.
template <class T>
OperatorPair<T> formal_adjoint(const OperatorPair<T>& pair, const ProductSpacetime& st)
{
    const auto& p = pair.op;
    const int n1 = p.rank_in(), n2 = p.rank_out();
    require(pair.h_in.rows() == n1 && pair.h_out.rows() == n2, "fiber metric shape mismatch",
            ErrorKind::invalid_argument);
    Eigen::FullPivLU<Mat<T>> lu1(pair.h_in), lu2(pair.h_out);
    require(lu1.isInvertible() && lu2.isInvertible(), "degenerate fiber metric", ErrorKind::invalid_argument);
    const Mat<T> h1inv = pair.h_in.inverse();
    const Mat<T> h2 = pair.h_out;
    FirstOrderSystem<T> q;
    q.name = "adjoint(" + p.name + ")";
    if (p.is_constant() && st.constant_metric()) {
        q.a0 = MatrixField<T>::constant(-h1inv * p.a0.constant_value().adjoint() * h2);
        q.a1 = MatrixField<T>::constant(-h1inv * p.a1.constant_value().adjoint() * h2);
        q.b = MatrixField<T>::constant(h1inv * p.b.constant_value().adjoint() * h2);
    } else {
        q.a0 = MatrixField<T>::function(n1, n2, [p, h1inv, h2](double t, double x) -> Mat<T> {
            return -h1inv * p.a0(t, x).adjoint() * h2;
        });
        q.a1 = MatrixField<T>::function(n1, n2, [p, h1inv, h2](double t, double x) -> Mat<T> {
            return -h1inv * p.a1(t, x).adjoint() * h2;
        });
        q.b = MatrixField<T>::function(n1, n2, [p, h1inv, h2, st](double t, double x) -> Mat<T> {
            const double hh = 1e-5;
            auto wa0 = [&](double tt) -> Mat<T> { return st.volume_density(tt, x) * p.a0(tt, x).adjoint(); };
            auto wa1 = [&](double xx) -> Mat<T> { return st.volume_density(t, xx) * p.a1(t, xx).adjoint(); };
            const Mat<T> div = ((wa0(t + hh) - wa0(t - hh)) + (wa1(x + hh) - wa1(x - hh))) / (2 * hh);
            return Mat<T>(h1inv * (p.b(t, x).adjoint() - div / st.volume_density(t, x)) * h2);
        });
    }
    q.fiber_metric = pair.h_in;
    return {q, pair.h_out, pair.h_in};
}

namespace detail {

template <class T>
MatrixField<T> block_field(const MatrixField<T>& p, const MatrixField<T>& q, bool diagonal)
{
    // diagonal: [[p,0],[0,q]]; otherwise [[0,q],[p,0]]
    const int r = diagonal ? p.rows() + q.rows() : p.rows() + q.rows();
    const int c = diagonal ? p.cols() + q.cols() : p.cols() + q.cols();
    auto assemble = [diagonal](const Mat<T>& a, const Mat<T>& b) {
        Mat<T> m = Mat<T>::Zero(a.rows() + b.rows(), a.cols() + b.cols());
        if (diagonal) {
            m.topLeftCorner(a.rows(), a.cols()) = a;
            m.bottomRightCorner(b.rows(), b.cols()) = b;
        } else {
            // a maps the first bundle into the second: bottom-left
            m.bottomLeftCorner(a.rows(), a.cols()) = a;
            m.topRightCorner(b.rows(), b.cols()) = b;
        }
        return m;
    };
    if (p.is_constant() && q.is_constant()) return MatrixField<T>::constant(assemble(p.constant_value(), q.constant_value()));
    return MatrixField<T>::function(r, c, [p, q, assemble](double t, double x) { return assemble(p(t, x), q(t, x)); });
}

} // namespace detail

template <class T>
FirstOrderSystem<T> direct_sum(const FirstOrderSystem<T>& p, const FirstOrderSystem<T>& q)
{
    FirstOrderSystem<T> s;
    s.name = p.name + "+" + q.name;
    s.a0 = detail::block_field(p.a0, q.a0, true);
    s.a1 = detail::block_field(p.a1, q.a1, true);
    s.b = detail::block_field(p.b, q.b, true);
    const int n = p.rank_out() + q.rank_out();
    s.fiber_metric = Mat<T>::Zero(n, n);
    s.fiber_metric.topLeftCorner(p.rank_out(), p.rank_out()) = p.fiber_metric;
    s.fiber_metric.bottomRightCorner(q.rank_out(), q.rank_out()) = q.fiber_metric;
    return s;
}

// [[0, P*], [P, 0]] acting on E1 + E2.
template <class T>
FirstOrderSystem<T> block_operator(const OperatorPair<T>& pair, const OperatorPair<T>& adjoint)
{
    const auto& p = pair.op;
    const auto& q = adjoint.op;
    require(q.rank_in() == p.rank_out() && q.rank_out() == p.rank_in(), "block shape mismatch",
            ErrorKind::invalid_argument);
    FirstOrderSystem<T> s;
    s.name = "block(" + p.name + ")";
    s.a0 = detail::block_field(p.a0, q.a0, false);
    s.a1 = detail::block_field(p.a1, q.a1, false);
    s.b = detail::block_field(p.b, q.b, false);
    const int n1 = p.rank_in(), n2 = p.rank_out();
    s.fiber_metric = Mat<T>::Zero(n1 + n2, n1 + n2);
    s.fiber_metric.topLeftCorner(n1, n1) = pair.h_in;
    s.fiber_metric.bottomRightCorner(n2, n2) = pair.h_out;
    return s;
}

// ---------------------------------------------------------------- apply

namespace detail {

// Second-order difference weights along an axis of n nodes at index k:
// centred inside, one-sided at the ends; periodic axes wrap.
struct Stencil {
    int idx[3];
    double w[3];
};

inline Stencil diff_stencil(int k, int n, double h, bool periodic)
{
    Stencil s{};
    if (periodic) {
        s.idx[0] = (k - 1 + n) % n;
        s.idx[1] = k;
        s.idx[2] = (k + 1) % n;
        s.w[0] = -0.5 / h;
        s.w[1] = 0.0;
        s.w[2] = 0.5 / h;
        return s;
    }
    require(n >= 3, "need three nodes on each axis for differences");
    if (k == 0) {
        s.idx[0] = 0; s.idx[1] = 1; s.idx[2] = 2;
        s.w[0] = -1.5 / h; s.w[1] = 2.0 / h; s.w[2] = -0.5 / h;
    } else if (k == n - 1) {
        s.idx[0] = n - 3; s.idx[1] = n - 2; s.idx[2] = n - 1;
        s.w[0] = 0.5 / h; s.w[1] = -2.0 / h; s.w[2] = 1.5 / h;
    } else {
        s.idx[0] = k - 1; s.idx[1] = k; s.idx[2] = k + 1;
        s.w[0] = -0.5 / h; s.w[1] = 0.0; s.w[2] = 0.5 / h;
    }
    return s;
}

} // namespace detail

template <class T>
GridSection<T> d_dt(const GridSection<T>& u)
{
    GridSection<T> out(u.grid, u.rank);
    const Grid& g = u.grid;
    for (int i = 0; i < g.nt; ++i) {
        const auto s = detail::diff_stencil(i, g.nt, g.dt, false);
        for (int j = 0; j < g.nx; ++j)
            for (int k = 0; k < u.rank; ++k)
                out.at(i, j, k) = s.w[0] * u.at(s.idx[0], j, k) + s.w[1] * u.at(s.idx[1], j, k) +
                                  s.w[2] * u.at(s.idx[2], j, k);
    }
    return out;
}

template <class T>
GridSection<T> d_dx(const GridSection<T>& u)
{
    GridSection<T> out(u.grid, u.rank);
    const Grid& g = u.grid;
    const bool periodic = g.topology == Topology::circle;
    for (int j = 0; j < g.nx; ++j) {
        const auto s = detail::diff_stencil(j, g.nx, g.dx, periodic);
        for (int i = 0; i < g.nt; ++i)
            for (int k = 0; k < u.rank; ++k)
                out.at(i, j, k) = s.w[0] * u.at(i, s.idx[0], k) + s.w[1] * u.at(i, s.idx[1], k) +
                                  s.w[2] * u.at(i, s.idx[2], k);
    }
    return out;
}

// A0 Dt u + A1 Dx u + B u with second-order differences.
template <class T>
GridSection<T> apply(const FirstOrderSystem<T>& sys, const GridSection<T>& u)
{
    require(u.rank == sys.rank_in(), "grid mismatch: section rank differs from the system", ErrorKind::invalid_argument);
    const GridSection<T> ut = d_dt(u), ux = d_dx(u);
    const Grid& g = u.grid;
    const int n = sys.rank_out(), m = sys.rank_in();
    GridSection<T> out(g, n);
    const bool constant = sys.is_constant();
    Mat<T> a0, a1, b;
    if (constant) {
        a0 = sys.a0.constant_value();
        a1 = sys.a1.constant_value();
        b = sys.b.constant_value();
    }
    for (int i = 0; i < g.nt; ++i)
        for (int j = 0; j < g.nx; ++j) {
            if (!constant) {
                a0 = sys.a0(g.t(i), g.x(j));
                a1 = sys.a1(g.t(i), g.x(j));
                b = sys.b(g.t(i), g.x(j));
            }
            for (int r = 0; r < n; ++r) {
                T acc{};
                for (int c = 0; c < m; ++c)
                    acc += a0(r, c) * ut.at(i, j, c) + a1(r, c) * ux.at(i, j, c) + b(r, c) * u.at(i, j, c);
                out.at(i, j, r) = acc;
            }
        }
    return out;
}

// ---------------------------------------------------------------- wave operator

// box_g u + b0 dt u + b1 dx u + V u, with box_g the metric d'Alembertian of
// -beta dt^2 + gamma dx^2 (so box = -dt^2 + dx^2 on Minkowski).
struct WaveOperator {
    ProductSpacetime spacetime;
    ScalarField b0 = 0.0;
    ScalarField b1 = 0.0;
    ScalarField potential = 0.0;

    static WaveOperator flat(const ProductSpacetime& st) { return {st}; }
    // Potential -m^2, so cos(kx - wt) solves with w^2 = k^2 + m^2.
    static WaveOperator klein_gordon(const ProductSpacetime& st, double m)
    {
        return {st, 0.0, 0.0, ScalarField(-m * m)};
    }
};

// Discrete application with centred second differences in divergence form.
inline Section apply_wave(const WaveOperator& w, const Section& u)
{
    require(u.rank == 1, "wave operator acts on scalars", ErrorKind::invalid_argument);
    const Grid& g = u.grid;
    const ProductSpacetime& st = w.spacetime;
    Section out(g, 1);
    const bool flat = st.is_flat();
    const bool periodic = g.topology == Topology::circle;
    const Section ut = d_dt(u), ux = d_dx(u);
    for (int i = 1; i + 1 < g.nt; ++i)
        for (int j = 0; j < g.nx; ++j) {
            int jm = j - 1, jp = j + 1;
            if (periodic) {
                jm = g.wrap(jm);
                jp = g.wrap(jp);
            } else if (j == 0 || j == g.nx - 1) {
                continue;
            }
            const double t = g.t(i), x = g.x(j);
            double box;
            if (flat) {
                box = -(u.at(i + 1, j) - 2 * u.at(i, j) + u.at(i - 1, j)) / (g.dt * g.dt) +
                      (u.at(i, jp) - 2 * u.at(i, j) + u.at(i, jm)) / (g.dx * g.dx);
            } else {
                auto a = [&](double tt, double xx) { return std::sqrt(st.gamma(tt, xx) / st.beta(tt, xx)); };
                auto bb = [&](double tt, double xx) { return 1.0 / a(tt, xx); };
                const double ap = a(t + g.dt / 2, x), am = a(t - g.dt / 2, x);
                const double bp = bb(t, x + g.dx / 2), bm = bb(t, x - g.dx / 2);
                const double tt = (ap * (u.at(i + 1, j) - u.at(i, j)) - am * (u.at(i, j) - u.at(i - 1, j))) / (g.dt * g.dt);
                const double xx = (bp * (u.at(i, jp) - u.at(i, j)) - bm * (u.at(i, j) - u.at(i, jm))) / (g.dx * g.dx);
                box = (-tt + xx) / st.volume_density(t, x);
            }
            out.at(i, j) = box + w.b0(t, x) * ut.at(i, j) + w.b1(t, x) * ux.at(i, j) + w.potential(t, x) * u.at(i, j);
        }
    return out;
}

// First-order reduction in v = (u, dt u, dx u). With a = sqrt(gamma/beta),
// b = 1/a, w = sqrt(beta gamma):
//   u_t - p = 0
//   a p_t - b q_x + (a_t - w b0) p - (b_x + w b1) q - w V u = -w f
//   b q_t - b p_x = 0
// H = I symmetrizes it; H (A0 + alpha A1) > 0 exactly for |alpha| < 1/c.
struct WaveReduction {
    FirstOrderSystem<double> system;
    ProductSpacetime spacetime;

    // Cauchy data (u0, du0/dt) sampled on slice `slice`; dx u0 by differences.
    [[nodiscard]] CauchyData embed(const Grid& g, int slice, const std::vector<double>& u0,
                                   const std::vector<double>& u0dot) const
    {
        require(static_cast<int>(u0.size()) == g.nx && static_cast<int>(u0dot.size()) == g.nx,
                "Cauchy data length mismatch", ErrorKind::invalid_argument);
        CauchyData d = CauchyData::zeros(g, slice, 3);
        const bool periodic = g.topology == Topology::circle;
        for (int j = 0; j < g.nx; ++j) {
            const auto s = detail::diff_stencil(j, g.nx, g.dx, periodic);
            d.at(j, 0) = u0[j];
            d.at(j, 1) = u0dot[j];
            d.at(j, 2) = s.w[0] * u0[s.idx[0]] + s.w[1] * u0[s.idx[1]] + s.w[2] * u0[s.idx[2]];
        }
        return d;
    }

    [[nodiscard]] CauchyData embed_exact(const Grid& g, int slice, const std::function<double(double, double)>& u,
                                         const std::function<double(double, double)>& ut,
                                         const std::function<double(double, double)>& ux) const
    {
        CauchyData d = CauchyData::zeros(g, slice, 3);
        const double t = g.t(slice);
        for (int j = 0; j < g.nx; ++j) {
            d.at(j, 0) = u(t, g.x(j));
            d.at(j, 1) = ut(t, g.x(j));
            d.at(j, 2) = ux(t, g.x(j));
        }
        return d;
    }

    [[nodiscard]] Section source(const Section& f) const
    {
        require(f.rank == 1, "wave source must be scalar", ErrorKind::invalid_argument);
        Section out(f.grid, 3);
        const bool flat = spacetime.is_flat();
        for (int i = 0; i < f.grid.nt; ++i)
            for (int j = 0; j < f.grid.nx; ++j) {
                const double w = flat ? 1.0 : spacetime.volume_density(f.grid.t(i), f.grid.x(j));
                out.at(i, j, 1) = -w * f.at(i, j);
            }
        out.tag = f.tag;
        out.mask = f.mask;
        return out;
    }

    [[nodiscard]] Section extract(const Section& v) const { return v.component(0); }
};

inline WaveReduction wave_to_first_order(const WaveOperator& w)
{
    const ProductSpacetime st = w.spacetime;
    const bool simple = st.constant_metric() && w.b0.is_constant() && w.b1.is_constant() && w.potential.is_constant();
    auto coeffs = [st, w](double t, double x, MatR& a0, MatR& a1, MatR& b) {
        const double beta = st.beta(t, x), gamma = st.gamma(t, x);
        const double a = std::sqrt(gamma / beta), bb = std::sqrt(beta / gamma), vol = std::sqrt(beta * gamma);
        a0 = MatR::Zero(3, 3);
        a1 = MatR::Zero(3, 3);
        b = MatR::Zero(3, 3);
        a0(0, 0) = 1;
        a0(1, 1) = a;
        a0(2, 2) = bb;
        a1(1, 2) = -bb;
        a1(2, 1) = -bb;
        double a_t = 0, b_x = 0;
        if (!st.constant_metric()) {
            const double h = 1e-5;
            auto af = [&](double tt, double xx) { return std::sqrt(st.gamma(tt, xx) / st.beta(tt, xx)); };
            a_t = (af(t + h, x) - af(t - h, x)) / (2 * h);
            b_x = (1.0 / af(t, x + h) - 1.0 / af(t, x - h)) / (2 * h);
        }
        b(0, 1) = -1;
        b(1, 0) = -vol * w.potential(t, x);
        b(1, 1) = a_t - vol * w.b0(t, x);
        b(1, 2) = -b_x - vol * w.b1(t, x);
    };
    FirstOrderSystem<double> sys;
    if (simple) {
        MatR a0, a1, b;
        coeffs(0, 0, a0, a1, b);
        sys = FirstOrderSystem<double>::constant("wave", a0, a1, b);
    } else {
        auto f0 = [coeffs](double t, double x) { MatR a0, a1, b; coeffs(t, x, a0, a1, b); return a0; };
        auto f1 = [coeffs](double t, double x) { MatR a0, a1, b; coeffs(t, x, a0, a1, b); return a1; };
        auto fb = [coeffs](double t, double x) { MatR a0, a1, b; coeffs(t, x, a0, a1, b); return b; };
        sys = FirstOrderSystem<double>::make("wave", MatrixField<double>::function(3, 3, f0),
                                             MatrixField<double>::function(3, 3, f1),
                                             MatrixField<double>::function(3, 3, fb));
    }
    return {sys, st};
}

// ---------------------------------------------------------------- Dirac

struct DiracCertificate {
    MatR gamma0_squared;
    MatR gamma1_squared;
    MatR anticommutator;
    bool ok = false;
};

struct DiracOperator {
    FirstOrderSystem<double> d; // gamma0 dt + gamma1 dx
    MatR q;                     // Q D is symmetric hyperbolic
    DiracCertificate certificate;

    [[nodiscard]] FirstOrderSystem<double> symmetrized() const
    {
        FirstOrderSystem<double> s = FirstOrderSystem<double>::constant(
            "dirac_sym", q * d.a0.constant_value(), q * d.a1.constant_value(), q * d.b.constant_value());
        return s;
    }
};

// gamma0 = [[0,1],[-1,0]], gamma1 = [[0,1],[1,0]]: (gamma0)^2 = -I,
// (gamma1)^2 = I, anticommuting, so D D = (-dt^2 + dx^2) I.
inline DiracOperator dirac_1p1()
{
    MatR g0(2, 2), g1(2, 2);
    g0 << 0, 1, -1, 0;
    g1 << 0, 1, 1, 0;
    DiracOperator op;
    op.d = FirstOrderSystem<double>::constant("dirac", g0, g1, MatR::Zero(2, 2));
    op.q = -g0;
    op.certificate.gamma0_squared = g0 * g0;
    op.certificate.gamma1_squared = g1 * g1;
    op.certificate.anticommutator = g0 * g1 + g1 * g0;
    const MatR id = MatR::Identity(2, 2);
    op.certificate.ok = op.certificate.gamma0_squared == -id && op.certificate.gamma1_squared == id &&
                        op.certificate.anticommutator == MatR::Zero(2, 2);
    return op;
}

// Component (2,1) of the Dirac operator: E1 -> E2, u1 |-> (dx - dt) u1.
inline OperatorPair<double> chiral_block()
{
    const DiracOperator dir = dirac_1p1();
    MatR a0(1, 1), a1(1, 1);
    a0(0, 0) = dir.d.a0.constant_value()(1, 0);
    a1(0, 0) = dir.d.a1.constant_value()(1, 0);
    auto sys = FirstOrderSystem<double>::constant("chiral", a0, a1, MatR::Zero(1, 1));
    return {sys, MatR::Identity(1, 1), MatR::Identity(1, 1)};
}

} // namespace greenhyp
