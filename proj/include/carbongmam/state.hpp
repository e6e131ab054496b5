#pragma once

#include <array>
#include <cmath>
#include <complex>

namespace carbongmam {

/// A point (c, w) of the phase plane. Generic 2D systems reuse it with
/// c as the first and w as the second coordinate.
struct State {
    double c = 0.0;
    double w = 0.0;

    constexpr State& operator+=(const State& o) noexcept {
        c += o.c;
        w += o.w;
        return *this;
    }
    constexpr State& operator-=(const State& o) noexcept {
        c -= o.c;
        w -= o.w;
        return *this;
    }
    constexpr State& operator*=(double s) noexcept {
        c *= s;
        w *= s;
        return *this;
    }

    constexpr double operator[](int i) const noexcept { return i == 0 ? c : w; }
    constexpr double& operator[](int i) noexcept { return i == 0 ? c : w; }

    friend constexpr bool operator==(const State&, const State&) = default;
};

constexpr State operator+(State a, const State& b) noexcept { return a += b; }
constexpr State operator-(State a, const State& b) noexcept { return a -= b; }
constexpr State operator-(const State& a) noexcept { return {-a.c, -a.w}; }
constexpr State operator*(double s, State a) noexcept { return a *= s; }
constexpr State operator*(State a, double s) noexcept { return a *= s; }
constexpr State operator/(State a, double s) noexcept { return {a.c / s, a.w / s}; }

constexpr double dot(const State& a, const State& b) noexcept { return a.c * b.c + a.w * b.w; }
inline double norm(const State& a) noexcept { return std::hypot(a.c, a.w); }
inline double distance(const State& a, const State& b) noexcept { return norm(a - b); }
inline double max_norm(const State& a) noexcept { return std::fmax(std::fabs(a.c), std::fabs(a.w)); }
inline bool is_finite(const State& a) noexcept { return std::isfinite(a.c) && std::isfinite(a.w); }

/// Row-major 2x2 matrix.
struct Mat2 {
    double a11 = 0.0, a12 = 0.0;
    double a21 = 0.0, a22 = 0.0;

    static constexpr Mat2 identity() noexcept { return {1.0, 0.0, 0.0, 1.0}; }
    static constexpr Mat2 diagonal(double d1, double d2) noexcept { return {d1, 0.0, 0.0, d2}; }

    constexpr Mat2 transposed() const noexcept { return {a11, a21, a12, a22}; }
    constexpr double trace() const noexcept { return a11 + a22; }
    constexpr double det() const noexcept { return a11 * a22 - a12 * a21; }

    friend constexpr bool operator==(const Mat2&, const Mat2&) = default;
};

constexpr State operator*(const Mat2& m, const State& v) noexcept {
    return {m.a11 * v.c + m.a12 * v.w, m.a21 * v.c + m.a22 * v.w};
}

constexpr Mat2 operator*(const Mat2& a, const Mat2& b) noexcept {
    return {a.a11 * b.a11 + a.a12 * b.a21, a.a11 * b.a12 + a.a12 * b.a22,
            a.a21 * b.a11 + a.a22 * b.a21, a.a21 * b.a12 + a.a22 * b.a22};
}

constexpr Mat2 operator+(const Mat2& a, const Mat2& b) noexcept {
    return {a.a11 + b.a11, a.a12 + b.a12, a.a21 + b.a21, a.a22 + b.a22};
}

constexpr Mat2 operator*(double s, const Mat2& m) noexcept {
    return {s * m.a11, s * m.a12, s * m.a21, s * m.a22};
}

/// <u, v>_A = u^T A v
constexpr double inner(const State& u, const Mat2& a, const State& v) noexcept { return dot(u, a * v); }

inline double metric_norm(const State& u, const Mat2& a) noexcept {
    return std::sqrt(std::fmax(0.0, inner(u, a, u)));
}

inline std::array<std::complex<double>, 2> eigenvalues(const Mat2& m) {
    const double half_tr = 0.5 * m.trace();
    const std::complex<double> disc = std::sqrt(std::complex<double>(half_tr * half_tr - m.det(), 0.0));
    return {half_tr + disc, half_tr - disc};
}

}  // namespace carbongmam
