// Copyright 2026 The twoi-sim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Small fixed-size vector types and the unit system shared by every module.
//
// Lengths are measured in wavelengths and times in wavelength / c, so that
// lambda = 1, c = 1, k = 2 pi and the ray-velocity amplitude A = c / k.
#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>

namespace twoi {

using complex = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kWavelength = 1.0;
inline constexpr double kLightSpeed = 1.0;
inline constexpr double kWavenumber = 2.0 * kPi / kWavelength;
inline constexpr double kRayAmplitude = kLightSpeed / kWavenumber;

/// Transverse (y) and longitudinal (z) components.
struct Vec2 {
    double y = 0.0;
    double z = 0.0;

    constexpr Vec2& operator+=(const Vec2& o) { y += o.y; z += o.z; return *this; }
    constexpr Vec2& operator-=(const Vec2& o) { y -= o.y; z -= o.z; return *this; }
    constexpr Vec2& operator*=(double s) { y *= s; z *= s; return *this; }

    friend constexpr Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
    friend constexpr Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
    friend constexpr Vec2 operator-(const Vec2& a) { return {-a.y, -a.z}; }
    friend constexpr Vec2 operator*(Vec2 a, double s) { return a *= s; }
    friend constexpr Vec2 operator*(double s, Vec2 a) { return a *= s; }
    friend constexpr bool operator==(const Vec2&, const Vec2&) = default;
};

inline constexpr double dot(const Vec2& a, const Vec2& b) { return a.y * b.y + a.z * b.z; }
inline double norm(const Vec2& a) { return std::hypot(a.y, a.z); }
inline bool is_finite(const Vec2& a) { return std::isfinite(a.y) && std::isfinite(a.z); }

/// Angle of a direction measured from +z towards +y.
inline double direction_angle(const Vec2& a) { return std::atan2(a.y, a.z); }
inline Vec2 unit_from_angle(double theta) { return {std::sin(theta), std::cos(theta)}; }

/// Real 2x2 matrix, row-major: m[i][j] = d(out_i)/d(in_j) for Jacobians.
struct Mat2 {
    std::array<std::array<double, 2>, 2> m{};

    constexpr double operator()(int i, int j) const { return m[i][j]; }
    constexpr double& operator()(int i, int j) { return m[i][j]; }

    constexpr Vec2 apply(const Vec2& v) const
    {
        return {m[0][0] * v.y + m[0][1] * v.z, m[1][0] * v.y + m[1][1] * v.z};
    }
};

struct CVec2 {
    complex y{};
    complex z{};
};

/// Complex symmetric 2x2 matrix. Only three entries are stored, so the
/// off-diagonal pair is identical by construction.
struct CSymMat2 {
    complex yy{};
    complex yz{};
    complex zz{};

    constexpr complex operator()(int i, int j) const
    {
        if (i == 0 && j == 0) return yy;
        if (i == 1 && j == 1) return zz;
        return yz;
    }
};

} // namespace twoi
