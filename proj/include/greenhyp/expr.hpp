#pragma once

#include "core.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace greenhyp {

// Small arithmetic expression language in the variables t and x:
//   expr  := term (('+'|'-') term)*
//   term  := unary (('*'|'/') unary)*
//   unary := '-' unary | power
//   power := atom ('^' unary)?
//   atom  := number | t | x | pi | fn '(' expr ')' | '(' expr ')'
// fn is one of sin, cos, exp, sqrt. Compiled to postfix code.
class Expr {
public:
    static Expr parse(std::string_view text)
    {
        Expr e;
        e.text_ = std::string(text);
        Parser p{text, 0, &e.code_};
        p.skip();
        if (p.pos == text.size()) p.fail("empty expression");
        p.expr();
        p.skip();
        if (p.pos != text.size()) p.fail("unexpected '" + std::string(1, text[p.pos]) + "'");
        e.fold_constant();
        return e;
    }

    [[nodiscard]] double operator()(double t, double x) const
    {
        if (constant_) return value_;
        double stack[64];
        int sp = 0;
        for (const Op& op : code_) {
            switch (op.code) {
            case Code::num: stack[sp++] = op.value; break;
            case Code::var_t: stack[sp++] = t; break;
            case Code::var_x: stack[sp++] = x; break;
            case Code::add: --sp; stack[sp - 1] += stack[sp]; break;
            case Code::sub: --sp; stack[sp - 1] -= stack[sp]; break;
            case Code::mul: --sp; stack[sp - 1] *= stack[sp]; break;
            case Code::div: --sp; stack[sp - 1] /= stack[sp]; break;
            case Code::pow: --sp; stack[sp - 1] = ipow_or_pow(stack[sp - 1], stack[sp]); break;
            case Code::neg: stack[sp - 1] = -stack[sp - 1]; break;
            case Code::sin: stack[sp - 1] = std::sin(stack[sp - 1]); break;
            case Code::cos: stack[sp - 1] = std::cos(stack[sp - 1]); break;
            case Code::exp: stack[sp - 1] = std::exp(stack[sp - 1]); break;
            case Code::sqrt: stack[sp - 1] = std::sqrt(stack[sp - 1]); break;
            }
        }
        return stack[0];
    }

    [[nodiscard]] const std::string& text() const { return text_; }
    [[nodiscard]] bool is_constant() const { return constant_; }

private:
    enum class Code : std::uint8_t { num, var_t, var_x, add, sub, mul, div, pow, neg, sin, cos, exp, sqrt };
    struct Op {
        Code code;
        double value = 0.0;
    };

    struct Parser {
        std::string_view s;
        std::size_t pos;
        std::vector<Op>* out;
        int depth = 0;

        [[noreturn]] void fail(const std::string& msg) const
        {
            throw Error(ErrorKind::parse, "expression '" + std::string(s) + "' column " +
                                              std::to_string(pos + 1) + ": " + msg);
        }
        void skip()
        {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        }
        bool eat(char c)
        {
            skip();
            if (pos < s.size() && s[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }
        void emit(Code c, double v = 0.0) { out->push_back({c, v}); }

        void expr()
        {
            if (++depth > 24) fail("nesting too deep");
            term();
            for (;;) {
                if (eat('+')) { term(); emit(Code::add); }
                else if (eat('-')) { term(); emit(Code::sub); }
                else break;
            }
            --depth;
        }
        void term()
        {
            unary();
            for (;;) {
                if (eat('*')) { unary(); emit(Code::mul); }
                else if (eat('/')) { unary(); emit(Code::div); }
                else break;
            }
        }
        void unary()
        {
            if (eat('-')) {
                unary();
                emit(Code::neg);
                return;
            }
            if (eat('+')) {
                unary();
                return;
            }
            power();
        }
        void power()
        {
            atom();
            if (eat('^')) {
                unary();
                emit(Code::pow);
            }
        }
        void atom()
        {
            skip();
            if (pos >= s.size()) fail("unexpected end");
            const char c = s[pos];
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                const std::string rest(s.substr(pos));
                std::size_t used = 0;
                double v = 0.0;
                try {
                    v = std::stod(rest, &used);
                } catch (const std::exception&) {
                    fail("bad number");
                }
                pos += used;
                emit(Code::num, v);
                return;
            }
            if (std::isalpha(static_cast<unsigned char>(c))) {
                std::size_t end = pos;
                while (end < s.size() && std::isalnum(static_cast<unsigned char>(s[end]))) ++end;
                const std::string name(s.substr(pos, end - pos));
                pos = end;
                if (name == "t") { emit(Code::var_t); return; }
                if (name == "x") { emit(Code::var_x); return; }
                if (name == "pi") { emit(Code::num, greenhyp::pi); return; }
                Code fn;
                if (name == "sin") fn = Code::sin;
                else if (name == "cos") fn = Code::cos;
                else if (name == "exp") fn = Code::exp;
                else if (name == "sqrt") fn = Code::sqrt;
                else fail("unknown name '" + name + "'");
                if (!eat('(')) fail("expected '(' after " + name);
                expr();
                if (!eat(')')) fail("expected ')'");
                emit(fn);
                return;
            }
            if (eat('(')) {
                expr();
                if (!eat(')')) fail("expected ')'");
                return;
            }
            fail("unexpected '" + std::string(1, c) + "'");
        }
    };

    static double ipow_or_pow(double b, double e)
    {
        if (e == 2.0) return b * b;
        if (e == 3.0) return b * b * b;
        return std::pow(b, e);
    }

    void fold_constant()
    {
        int sp = 0, peak = 0;
        for (const Op& op : code_) {
            if (op.code == Code::num || op.code == Code::var_t || op.code == Code::var_x) peak = std::max(peak, ++sp);
            else if (op.code >= Code::add && op.code <= Code::pow) --sp;
        }
        if (peak > 64) throw Error(ErrorKind::parse, "expression '" + text_ + "' is too deeply nested");
        for (const Op& op : code_)
            if (op.code == Code::var_t || op.code == Code::var_x) return;
        value_ = (*this)(0.0, 0.0);
        constant_ = true;
    }

    std::string text_;
    std::vector<Op> code_;
    bool constant_ = false;
    double value_ = 0.0;
};

// Regularly sampled scalar with bilinear interpolation, clamped at the edges.
struct SampledScalar {
    int nt = 0, nx = 0;
    double t0 = 0, dt = 1, x0 = 0, dx = 1;
    std::vector<double> values; // row-major, nt rows of nx

    [[nodiscard]] double operator()(double t, double x) const
    {
        auto locate = [](double v, double origin, double h, int n, int& i, double& w) {
            double s = (v - origin) / h;
            if (n == 1 || s <= 0.0) { i = 0; w = 0.0; return; }
            if (s >= n - 1) { i = n - 2; w = 1.0; return; }
            i = static_cast<int>(std::floor(s));
            w = s - i;
        };
        int i = 0, j = 0;
        double wt = 0, wx = 0;
        locate(t, t0, dt, nt, i, wt);
        locate(x, x0, dx, nx, j, wx);
        auto at = [&](int a, int b) {
            a = std::min(a, nt - 1);
            b = std::min(b, nx - 1);
            return values[static_cast<std::size_t>(a) * nx + b];
        };
        return (1 - wt) * ((1 - wx) * at(i, j) + wx * at(i, j + 1)) +
               wt * ((1 - wx) * at(i + 1, j) + wx * at(i + 1, j + 1));
    }
};

// A scalar coefficient field: constant, expression, samples or callable.
class ScalarField {
public:
    ScalarField() : ScalarField(0.0) {}
    ScalarField(double c) : constant_(true), value_(c), fn_([c](double, double) { return c; }),
                            text_(format_double(c)) {}

    static ScalarField expression(std::string_view text)
    {
        auto e = std::make_shared<Expr>(Expr::parse(text));
        if (e->is_constant()) {
            ScalarField f((*e)(0.0, 0.0));
            f.text_ = e->text();
            return f;
        }
        ScalarField f;
        f.constant_ = false;
        f.fn_ = [e](double t, double x) { return (*e)(t, x); };
        f.text_ = e->text();
        return f;
    }

    static ScalarField sampled(SampledScalar s, std::string label)
    {
        auto p = std::make_shared<SampledScalar>(std::move(s));
        ScalarField f;
        f.constant_ = false;
        f.fn_ = [p](double t, double x) { return (*p)(t, x); };
        f.text_ = std::move(label);
        return f;
    }

    static ScalarField function(std::function<double(double, double)> fn, std::string label)
    {
        ScalarField f;
        f.constant_ = false;
        f.fn_ = std::move(fn);
        f.text_ = std::move(label);
        return f;
    }

    [[nodiscard]] double operator()(double t, double x) const { return constant_ ? value_ : fn_(t, x); }
    [[nodiscard]] bool is_constant() const { return constant_; }
    [[nodiscard]] double constant_value() const { return value_; }
    [[nodiscard]] const std::string& text() const { return text_; }

private:
    bool constant_ = true;
    double value_ = 0.0;
    std::function<double(double, double)> fn_;
    std::string text_;
};

} // namespace greenhyp
