#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace greenhyp {

enum class ErrorKind {
    invalid_argument,
    precondition,
    parse,
    io,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    explicit Error(const std::string& what) : Error(ErrorKind::precondition, what) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline void require(bool cond, const std::string& msg, ErrorKind kind = ErrorKind::precondition)
{
    if (!cond) throw Error(kind, msg);
}

// Write to path.tmp, then rename over path.
inline void atomic_write(const std::string& path, const std::string& content)
{
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        require(bool(out), "cannot write " + path, ErrorKind::io);
        out << content;
        out.flush();
        require(bool(out), "write failed: " + path, ErrorKind::io);
    }
    require(std::rename(tmp.c_str(), path.c_str()) == 0, "cannot move " + tmp + " into place", ErrorKind::io);
}

// 64-bit FNV-1a, used for input digests in reports.
class Fnv1a {
public:
    void update(const void* data, std::size_t n)
    {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h_ ^= p[i];
            h_ *= 0x100000001b3ULL;
        }
    }
    void update(std::string_view s) { update(s.data(), s.size()); }
    void update(double v) { update(&v, sizeof v); }

    [[nodiscard]] std::uint64_t value() const { return h_; }

    [[nodiscard]] std::string hex() const
    {
        static const char* digits = "0123456789abcdef";
        std::string out(16, '0');
        for (int i = 0; i < 16; ++i) out[15 - i] = digits[(h_ >> (4 * i)) & 0xf];
        return out;
    }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

// Portable deterministic RNG: the standard distributions are implementation
// defined, so uniform doubles are built from raw mt19937_64 bits.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // integer in [lo, hi]
    int integer(int lo, int hi)
    {
        const auto span = static_cast<std::uint64_t>(hi - lo + 1);
        return lo + static_cast<int>(eng_() % span);
    }

    bool coin(double p = 0.5) { return uniform() < p; }

    std::uint64_t bits() { return eng_(); }

private:
    std::mt19937_64 eng_;
};

inline constexpr double pi = 3.14159265358979323846;

template <class T>
[[nodiscard]] constexpr T sqr(T v) { return v * v; }

// Smoothstep s(r) = 6r^5 - 15r^4 + 10r^3 clamped to [0,1].
[[nodiscard]] inline double smoothstep5(double r)
{
    if (r <= 0.0) return 0.0;
    if (r >= 1.0) return 1.0;
    return std::min(1.0, r * r * r * (r * (6.0 * r - 15.0) + 10.0));
}

// Compact bump (1 - r^2)^6 on r < 1; C^5 and exactly zero outside.
[[nodiscard]] inline double bump6(double r2)
{
    if (r2 >= 1.0) return 0.0;
    const double s = 1.0 - r2;
    const double s3 = s * s * s;
    return s3 * s3;
}

[[nodiscard]] inline std::string format_double(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

[[nodiscard]] inline std::string format_short(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

} // namespace greenhyp
