// Copyright 2026 The twoi-sim Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include "twoi/rng.hpp"
#include "twoi/wavefield.hpp"

namespace twoi {
namespace {

constexpr double k = kWavenumber;

// Independent evaluation of the diffraction integral: composite Simpson on
// every opening with the kernel and incident wave written out directly.
complex oracle_psi(Vec2 source, const SlitMask& mask, Vec2 p, int per_wavelength = 64)
{
    const complex eighth = std::polar(1.0, -0.25 * kPi);
    auto integrand = [&](double y) {
        const double R = std::hypot(y - source.y, mask.plane_z - source.z);
        const complex inc = eighth * std::polar(1.0 / std::sqrt(R), k * R);
        const double r = std::hypot(p.y - y, p.z - mask.plane_z);
        const complex ker = std::sqrt(k / (2.0 * kPi * r)) * std::polar(1.0, k * r - 0.25 * kPi);
        return inc * ker;
    };
    complex total = 0.0;
    for (double c : mask.slit_centers) {
        const double a = c - 0.5 * mask.slit_width;
        int n = static_cast<int>(std::ceil(mask.slit_width * per_wavelength));
        n += n % 2;
        const double h = mask.slit_width / n;
        complex s = integrand(a) + integrand(a + mask.slit_width);
        for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * integrand(a + i * h);
        total += s * (h / 3.0);
    }
    return total;
}

// Richardson-extrapolated central differences (steps h and h/2): grad from
// psi, hessian from the analytic grad. A second difference of psi would lose
// too many digits to the rounding of the phase kr.
template <class Field>
FieldSample finite_difference(const Field& f, Vec2 p, double h)
{
    auto d = [&](Vec2 e) {
        auto c = [&](double s) {
            const FieldSample a = f.sample(p + e * s);
            const FieldSample b = f.sample(p - e * s);
            return std::array<complex, 3>{(a.psi - b.psi) / (2 * s), (a.grad.y - b.grad.y) / (2 * s),
                                          (a.grad.z - b.grad.z) / (2 * s)};
        };
        const auto x = c(h);
        const auto y = c(h / 2);
        std::array<complex, 3> r;
        for (int i = 0; i < 3; ++i) r[i] = (4.0 * y[i] - x[i]) / 3.0;
        return r;
    };
    const auto dy = d({1, 0});
    const auto dz = d({0, 1});
    FieldSample s;
    s.psi = f.sample(p).psi;
    s.grad.y = dy[0];
    s.grad.z = dz[0];
    s.hessian.yy = dy[1];
    s.hessian.yz = 0.5 * (dy[2] + dz[1]);
    s.hessian.zz = dz[2];
    return s;
}

double relative_mismatch(const FieldSample& a, const FieldSample& fd)
{
    const double g = std::max(std::abs(a.grad.y), std::abs(a.grad.z));
    const double hs = std::max({std::abs(a.hessian.yy), std::abs(a.hessian.yz), std::abs(a.hessian.zz)});
    return std::max({std::abs(a.grad.y - fd.grad.y) / g, std::abs(a.grad.z - fd.grad.z) / g,
                     std::abs(a.hessian.yy - fd.hessian.yy) / hs, std::abs(a.hessian.yz - fd.hessian.yz) / hs,
                     std::abs(a.hessian.zz - fd.hessian.zz) / hs});
}

// Richardson-extrapolated phase gradient, times A.
template <class Field>
Vec2 phase_gradient_oracle(const Field& f, Vec2 p)
{
    auto d = [&](Vec2 e, double h) {
        return std::arg(f.sample(p + e * h).psi / f.sample(p - e * h).psi) / (2 * h);
    };
    auto rich = [&](Vec2 e) {
        const double h = 2e-4;
        return (4.0 * d(e, h / 2) - d(e, h)) / 3.0;
    };
    return Vec2{rich({1, 0}), rich({0, 1})} * kRayAmplitude;
}

PlaneWaveSum two_waves(double alpha)
{
    PlaneWaveSum f;
    f.components.push_back({{1.0, 0.0}, {0.0, k}});
    f.components.push_back({{0.6, 0.2}, {k * std::sin(alpha), k * std::cos(alpha)}});
    return f;
}

TEST(PointSource, Kernel3DClosedForm)
{
    const PointSourceField f{{0, 0}, KernelKind::Kernel3D};
    const FieldSample s = f.sample({0, 10});
    EXPECT_NEAR(s.psi.real(), 0.1, 1e-15);
    EXPECT_NEAR(s.psi.imag(), 0.0, 1e-14);
}

TEST(PointSource, Kernel2DAmplitudeAndPhase)
{
    const PointSourceField f{{0, 0}, KernelKind::Kernel2DAsymptotic};
    const FieldSample s = f.sample({0, 4});
    EXPECT_NEAR(std::abs(s.psi), 0.5, 1e-15);
    EXPECT_NEAR(std::arg(s.psi), -0.25 * kPi, 1e-12);
}

TEST(PointSource, RejectsOrigin)
{
    const PointSourceField f{{1, -2}};
    try {
        f.sample({1, -2});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::SingularPoint);
    }
}

TEST(PointSource, PhaseGradientIsK)
{
    CounterRng rng(1, 0);
    for (KernelKind kind : {KernelKind::Kernel3D, KernelKind::Kernel2DAsymptotic}) {
        const PointSourceField f{{3.0, -500.0}, kind};
        for (int i = 0; i < 200; ++i) {
            const Vec2 p{rng.uniform(-400, 400), rng.uniform(-499, 1000)};
            const FieldSample s = f.sample(p);
            const double gy = (std::conj(s.psi) * s.grad.y).imag() / std::norm(s.psi);
            const double gz = (std::conj(s.psi) * s.grad.z).imag() / std::norm(s.psi);
            ASSERT_NEAR(std::hypot(gy, gz), k, 1e-9 * k);
            ASSERT_NEAR(norm(ray_velocity(s)), kLightSpeed, 1e-9);
        }
    }
}

TEST(PointSource, DerivativesMatchFiniteDifferences)
{
    CounterRng rng(2, 0);
    for (KernelKind kind : {KernelKind::Kernel3D, KernelKind::Kernel2DAsymptotic}) {
        const PointSourceField f{{0.0, 0.0}, kind};
        EXPECT_LT(relative_mismatch(f.sample({3, 4}), finite_difference(f, {3, 4}, 1e-4)), 1e-6);
        for (int i = 0; i < 100; ++i) {
            const Vec2 p{rng.uniform(-50, 50), rng.uniform(1, 50)};
            ASSERT_LT(relative_mismatch(f.sample(p), finite_difference(f, p, 1e-4)), 1e-6) << p.y << ", " << p.z;
        }
    }
}

TEST(PlaneWaves, DerivativesMatchFiniteDifferences)
{
    const PlaneWaveSum f = two_waves(30.0 * kPi / 180.0);
    CounterRng rng(3, 0);
    for (int i = 0; i < 50; ++i) {
        const Vec2 p{rng.uniform(-5, 5), rng.uniform(-5, 5)};
        ASSERT_LT(relative_mismatch(f.sample(p), finite_difference(f, p, 1e-4)), 1e-6);
    }
}

TEST(SlitMaskSpec, Invariants)
{
    EXPECT_NO_THROW(SlitMask::uniform(3, 5.0, 7.0).validate());
    EXPECT_THROW(SlitMask::uniform(2, 5.0, 4.0).validate(), Error);
    EXPECT_THROW(SlitMask::uniform(1, 0.0, 0.0).validate(), Error);
    const SlitMask m = SlitMask::uniform(2, 5.0, 25.0);
    EXPECT_TRUE(m.transmits(12.5));
    EXPECT_TRUE(m.transmits(-10.0));
    EXPECT_FALSE(m.transmits(0.0));
    EXPECT_DOUBLE_EQ(m.extent(), 30.0);
}

TEST(Diffracted, RejectsWrongSideAndAperture)
{
    const DiffractedField f({{0, -500}}, SlitMask::uniform(1, 8.0, 0.0));
    auto code_at = [&](Vec2 p) {
        try {
            f.sample(p);
        } catch (const Error& e) {
            return e.code();
        }
        return Errc::InvalidArgument;
    };
    EXPECT_EQ(code_at({0, 0}), Errc::WrongSide);
    EXPECT_EQ(code_at({0, -3}), Errc::WrongSide);
    EXPECT_EQ(code_at({0, 0.05}), Errc::SingularPoint);
    EXPECT_EQ(code_at({4.05, 0.05}), Errc::SingularPoint);
    EXPECT_NO_THROW(f.sample({4.2, 0.05}));
    EXPECT_NO_THROW(f.sample({0, 0.1}));
}

TEST(Diffracted, MatchesDenseQuadratureOracle)
{
    const Vec2 src{0, -500};
    for (const SlitMask& mask : {SlitMask::uniform(1, 8.0, 0.0), SlitMask::uniform(2, 5.0, 25.0),
                                 SlitMask::uniform(3, 5.0, 10.0)}) {
        const DiffractedField f({src}, mask);
        for (Vec2 p : {Vec2{0, 1000}, Vec2{37, 1000}, Vec2{-120, 1000}, Vec2{3, 40}, Vec2{-11, 12}}) {
            const complex o = oracle_psi(src, mask, p, 256);
            EXPECT_LT(std::abs(f.sample(p).psi - o), 1e-7 * std::abs(o)) << p.y << ", " << p.z;
        }
    }
}

TEST(Diffracted, Fig3ScreenMaximumAtCentre)
{
    const Vec2 src{0, -500};
    const SlitMask mask = SlitMask::uniform(1, 8.0, 0.0);
    const DiffractedField f({src}, mask);
    double best_y = 1e9, best = -1.0;
    for (int i = -300; i <= 300; ++i) {
        const double v = std::norm(oracle_psi(src, mask, {static_cast<double>(i), 1000.0}));
        if (v > best) best = v, best_y = i;
    }
    EXPECT_EQ(best_y, 0.0);
    const double centre = std::norm(f.sample({0, 1000}).psi);
    for (int i = -300; i <= 300; ++i) ASSERT_LE(std::norm(f.sample({i + 0.37, 1000.0}).psi), centre);
}

TEST(Diffracted, WideApertureRecoversIncidentWave)
{
    // Half width 130 at source distance 500 and probe distance 100 spans
    // about 200 Fresnel zones.
    const PointSourceField src{{0, -500}};
    const DiffractedField f(src, SlitMask::uniform(1, 260.0, 0.0));
    for (double z : {100.0, 60.0}) {
        const double ratio = std::abs(f.sample({0, z}).psi) / std::abs(src.sample({0, z}).psi);
        EXPECT_NEAR(ratio, 1.0, 0.05) << z;
    }
}

TEST(Diffracted, MirrorSymmetry)
{
    const DiffractedField f({{0, -500}}, SlitMask::uniform(3, 5.0, 10.0));
    const double iref = f.reference_intensity();
    CounterRng rng(4, 0);
    for (int i = 0; i < 100; ++i) {
        const double y = rng.uniform(0.0, 200.0);
        const double z = rng.uniform(0.5, 1000.0);
        const FieldSample a = f.sample({y, z});
        const FieldSample b = f.sample({-y, z});
        ASSERT_NEAR(std::abs(a.psi), std::abs(b.psi), 1e-9 * std::abs(a.psi));
        if (std::norm(a.psi) < 1e-6 * iref) continue;
        const Vec2 ua = ray_velocity(a, kRayAmplitude, iref);
        const Vec2 ub = ray_velocity(b, kRayAmplitude, iref);
        ASSERT_NEAR(ua.y, -ub.y, 1e-9);
        ASSERT_NEAR(ua.z, ub.z, 1e-9);
    }
}

TEST(Diffracted, DerivativesMatchFiniteDifferences)
{
    CounterRng rng(5, 0);
    for (KernelKind kind : {KernelKind::Kernel2DAsymptotic, KernelKind::Kernel3D}) {
        for (Obliquity ob : {Obliquity::None, Obliquity::Cosine}) {
            const DiffractedField f({{0, -500}, kind}, SlitMask::uniform(2, 5.0, 25.0), {16, ob});
            for (int i = 0; i < 40; ++i) {
                const Vec2 p{rng.uniform(-100, 100), rng.uniform(0.6, 300)};
                ASSERT_LT(relative_mismatch(f.sample(p), finite_difference(f, p, 1e-4)), 1e-6) << p.y << ", " << p.z;
            }
        }
    }
}

TEST(Diffracted, QuadratureConverged)
{
    CounterRng rng(6, 0);
    for (const SlitMask& mask : {SlitMask::uniform(1, 8.0, 0.0), SlitMask::uniform(2, 5.0, 25.0),
                                 SlitMask::uniform(3, 5.0, 10.0)}) {
        const DiffractedField base({{0, -500}}, mask, {16, Obliquity::None});
        const DiffractedField fine({{0, -500}}, mask, {32, Obliquity::None});
        for (int i = 0; i < 100; ++i) {
            const double z = 0.5 * std::pow(2000.0, rng.uniform());
            const Vec2 p{rng.uniform(-0.3 * z - 20, 0.3 * z + 20), z};
            const complex a = base.sample(p).psi;
            const complex b = fine.sample(p).psi;
            ASSERT_LT(std::abs(a - b), 1e-6 * std::abs(b)) << p.y << ", " << p.z;
        }
    }
}

TEST(RayVelocity, PlaneWave)
{
    const Vec2 u = ray_velocity(PlaneWaveSum::single({0, k}).sample({0.3, 1.7}));
    EXPECT_NEAR(u.y, 0.0, 1e-15);
    EXPECT_NEAR(u.z, kLightSpeed, 1e-14);
    const Mat2 j = ray_velocity_jacobian(PlaneWaveSum::single({0, k}).sample({0.3, 1.7}));
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) EXPECT_NEAR(j(a, b), 0.0, 1e-13);
}

TEST(RayVelocity, RealFieldHasNoFlow)
{
    PlaneWaveSum f;  // cos(kz)
    f.components.push_back({{0.5, 0.0}, {0.0, k}});
    f.components.push_back({{0.5, 0.0}, {0.0, -k}});
    for (double z : {0.1, 0.33, 0.61}) {
        const Vec2 u = ray_velocity(f.sample({0.2, z}));
        EXPECT_NEAR(u.y, 0.0, 1e-14);
        EXPECT_NEAR(u.z, 0.0, 1e-14);
    }
}

TEST(RayVelocity, TwoWavesMatchPhaseGradient)
{
    const PlaneWaveSum f = two_waves(30.0 * kPi / 180.0);
    const Vec2 p{1.3, 2.7};
    const Vec2 u = ray_velocity(f.sample(p));
    const Vec2 o = phase_gradient_oracle(f, p);
    EXPECT_LT(norm(u - o), 1e-8 * norm(o));
}

TEST(RayVelocity, NodalPointRejected)
{
    PlaneWaveSum f;
    f.components.push_back({{0.5, 0.0}, {0.0, k}});
    f.components.push_back({{0.5, 0.0}, {0.0, -k}});
    try {
        ray_velocity(f.sample({0.0, 0.25}));  // cos(pi/2) = 0
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::NodalPoint);
    }
}

TEST(RayVelocityJacobian, SphericalWave)
{
    for (KernelKind kind : {KernelKind::Kernel3D, KernelKind::Kernel2DAsymptotic}) {
        const PointSourceField f{{0, 0}, kind};
        const Vec2 p{3.0, 4.0};
        const double r = 5.0;
        const Vec2 n{0.6, 0.8};
        const Mat2 j = ray_velocity_jacobian(f.sample(p));
        const double expect[2][2] = {{(1 - n.y * n.y) / r, -n.y * n.z / r}, {-n.y * n.z / r, (1 - n.z * n.z) / r}};
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) EXPECT_NEAR(j(a, b), kLightSpeed * expect[a][b], 1e-14);
    }
}

TEST(RayVelocityJacobian, TwoWavesMatchFiniteDifferences)
{
    const PlaneWaveSum f = two_waves(30.0 * kPi / 180.0);
    CounterRng rng(7, 0);
    for (int i = 0; i < 20; ++i) {
        const Vec2 p{rng.uniform(-3, 3), rng.uniform(-3, 3)};
        if (std::norm(f.sample(p).psi) < 1e-2) continue;
        const Mat2 j = ray_velocity_jacobian(f.sample(p));
        const double h = 1e-4;
        auto du = [&](Vec2 e, double s) {
            return (ray_velocity(f.sample(p + e * s)) - ray_velocity(f.sample(p - e * s))) * (1.0 / (2 * s));
        };
        auto rich = [&](Vec2 e) { return (4.0 * du(e, h / 2) - du(e, h)) * (1.0 / 3.0); };
        const Vec2 cy = rich({1, 0});
        const Vec2 cz = rich({0, 1});
        const double scale = std::max({std::abs(j(0, 0)), std::abs(j(0, 1)), std::abs(j(1, 1))});
        EXPECT_NEAR(j(0, 0), cy.y, 1e-6 * scale);
        EXPECT_NEAR(j(1, 0), cy.z, 1e-6 * scale);
        EXPECT_NEAR(j(0, 1), cz.y, 1e-6 * scale);
        EXPECT_NEAR(j(1, 1), cz.z, 1e-6 * scale);
    }
}

TEST(OrderingRate, Definition)
{
    FieldSample s;
    s.psi = {0.6, 0.8};
    EXPECT_DOUBLE_EQ(ordering_rate(s, 1.0, 1.0), 1.0);
    EXPECT_DOUBLE_EQ(ordering_rate(s, 2.5, 0.5), 5.0);
    s.psi = 0.0;
    EXPECT_EQ(ordering_rate(s, 1.0, 1.0), 0.0);
    EXPECT_THROW(ordering_rate(s, 1.0, 0.0), Error);
    EXPECT_THROW(ordering_rate(s, -1.0, 1.0), Error);
}

TEST(OrderingRate, Fig3CentreToMinimumRatio)
{
    const Vec2 src{0, -500};
    const SlitMask mask = SlitMask::uniform(1, 8.0, 0.0);
    const DiffractedField f({src}, mask);
    auto oracle = [&](double y) { return std::norm(oracle_psi(src, mask, {y, 1000.0}, 256)); };
    // First minimum near the Fraunhofer estimate 1000 tan(asin(1/8)); golden section.
    double a = 100.0, b = 150.0;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int i = 0; i < 80; ++i) {
        const double c = b - g * (b - a), d = a + g * (b - a);
        (oracle(c) < oracle(d) ? b : a) = (oracle(c) < oracle(d) ? d : c);
    }
    const double ymin = 0.5 * (a + b);
    const double iref = f.reference_intensity();
    const double ratio = ordering_rate(f.sample({0, 1000}), 1.0, iref) / ordering_rate(f.sample({ymin, 1000}), 1.0, iref);
    const double expect = oracle(0.0) / oracle(ymin);
    EXPECT_GT(expect, 10.0);
    EXPECT_NEAR(ratio, expect, 1e-4 * expect);
}

} // namespace
} // namespace twoi
